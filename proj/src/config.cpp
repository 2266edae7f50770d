#include "radmarket/config.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "radmarket/text.hpp"

namespace radmarket {

namespace {

std::filesystem::path resolve(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

int positive_int(const std::string& key, const std::string& value) {
  const int v = text::parse_int(value);
  if (v < 1) throw ConfigError(key + " must be >= 1");
  return v;
}

double number(const std::string& value) { return text::parse_double(value); }

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir) {
  try {
    if (key == "case") {
      cfg.case_path = resolve(value, base_dir);
    } else if (key == "roster") {
      cfg.roster_path = resolve(value, base_dir);
    } else if (key == "scenario") {
      if (value.empty() || value == "none") {
        cfg.scenario_path.reset();
      } else {
        cfg.scenario_path = resolve(value, base_dir);
      }
    } else if (key == "mechanism") {
      cfg.mechanism = parse_mechanism(value);
    } else if (key == "grid_steps") {
      cfg.grid_steps = positive_int(key, value);
    } else if (key == "market_steps") {
      if (value == "default") {
        cfg.market_steps.reset();
      } else {
        cfg.market_steps = positive_int(key, value);
      }
    } else if (key == "seed") {
      if (value.empty() || value[0] == '-') throw ConfigError("seed must be a non-negative integer");
      std::size_t used = 0;
      cfg.seed = std::stoull(value, &used);
      if (used != value.size()) throw ConfigError("seed must be a non-negative integer");
    } else if (key == "out_dir") {
      cfg.out_dir = std::filesystem::path(value).lexically_normal();
    } else if (key == "segments") {
      cfg.segments = positive_int(key, value);
    } else if (key == "lmp_source") {
      cfg.lmp_source = number(value);
    } else if (key == "allow_agent_access") {
      cfg.allow_agent_access = text::parse_bool(value);
    } else if (key == "p2p.c_service") {
      cfg.p2p.c_service = number(value);
    } else if (key == "p2p.c_lose") {
      cfg.p2p.c_lose = number(value);
    } else if (key == "p2p.ub") {
      cfg.p2p.ub = number(value);
    } else if (key == "p2p.T") {
      cfg.p2p.T = positive_int(key, value);
    } else if (key == "p2p.trade_quantity") {
      cfg.p2p.trade_quantity = number(value);
    } else if (key == "p2p.retail_price") {
      cfg.p2p.retail_price = number(value);
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment, const std::filesystem::path& base_dir) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, std::string(text::trim(assignment.substr(0, eq))), std::string(text::trim(assignment.substr(eq + 1))),
                base_dir);
}

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& origin) {
  RunConfig cfg;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    try {
      apply_setting(cfg, std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))),
                    base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in, path.parent_path(), path.string());
}

void write_run_config(std::ostream& out, const RunConfig& cfg) {
  auto abs = [](const std::filesystem::path& p) { return std::filesystem::absolute(p).lexically_normal().string(); };
  out << "case = " << abs(cfg.case_path) << '\n';
  out << "roster = " << abs(cfg.roster_path) << '\n';
  out << "scenario = " << (cfg.scenario_path ? abs(*cfg.scenario_path) : std::string("none")) << '\n';
  out << "mechanism = " << to_string(cfg.mechanism) << '\n';
  out << "grid_steps = " << cfg.grid_steps << '\n';
  out << "market_steps = " << (cfg.market_steps ? std::to_string(*cfg.market_steps) : std::string("default")) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "out_dir = " << abs(cfg.out_dir) << '\n';
  out << "segments = " << cfg.segments << '\n';
  if (cfg.lmp_source) out << "lmp_source = " << text::format_double(*cfg.lmp_source) << '\n';
  out << "allow_agent_access = " << (cfg.allow_agent_access ? "true" : "false") << '\n';
  out << "p2p.c_service = " << text::format_double(cfg.p2p.c_service) << '\n';
  out << "p2p.c_lose = " << text::format_double(cfg.p2p.c_lose) << '\n';
  out << "p2p.ub = " << text::format_double(cfg.p2p.ub) << '\n';
  out << "p2p.T = " << cfg.p2p.T << '\n';
  out << "p2p.trade_quantity = " << text::format_double(cfg.p2p.trade_quantity) << '\n';
  out << "p2p.retail_price = " << text::format_double(cfg.p2p.retail_price) << '\n';
}

void RunConfig::validate() const {
  auto need_file = [](const std::filesystem::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string(what) + " is not set");
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  need_file(case_path, "case");
  need_file(roster_path, "roster");
  if (scenario_path) need_file(*scenario_path, "scenario");
  if (grid_steps < 1) throw ConfigError("grid_steps must be >= 1");
  if (market_steps && *market_steps < 1) throw ConfigError("market_steps must be >= 1");
  if (segments < 1) throw ConfigError("segments must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir is not set");
  if (mechanism == Mechanism::Dlmp) {
    if (!lmp_source) throw ConfigError("dlmp runs need lmp_source");
    if (!(*lmp_source >= 0.0) || !std::isfinite(*lmp_source)) throw ConfigError("lmp_source must be finite and >= 0");
  }
  if (mechanism == Mechanism::P2p) {
    try {
      p2p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("p2p: ") + e.what());
    }
    if (!(p2p.trade_quantity > 0.0)) throw ConfigError("p2p.trade_quantity must be > 0");
    if (!(p2p.retail_price >= 0.0)) throw ConfigError("p2p.retail_price must be >= 0");
  }
}

EnvConfig RunConfig::env_config() const {
  EnvConfig e;
  e.mechanism = mechanism;
  e.seed = seed;
  e.segments = segments;
  e.p2p = p2p;
  e.lmp_source = lmp_source.value_or(e.lmp_source);
  e.allow_agent_access = allow_agent_access;
  return e;
}

int RunConfig::effective_market_steps() const { return market_steps.value_or(env_config().default_market_steps()); }

std::unique_ptr<Environment> build_environment(const RunConfig& cfg) {
  cfg.validate();
  Network network = build_network(read_case_file(cfg.case_path));
  auto roster = read_roster_file(cfg.roster_path);
  auto agents = make_agents(roster, cfg.roster_path.parent_path());
  Scenario scenario;
  if (cfg.scenario_path) scenario = read_scenario_file(*cfg.scenario_path);
  auto env = std::make_unique<Environment>(std::move(network), std::move(agents), cfg.env_config(), std::move(scenario));
  env->reset();
  return env;
}

}  // namespace radmarket
