#include "radmarket/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "radmarket/text.hpp"

namespace radmarket::cli {

namespace {

namespace fs = std::filesystem;

// Input and setup problems are configuration errors; anything raised while
// the model runs is a runtime error.
int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const text::ParseError*>(&e) ||
      dynamic_cast<const NetworkError*>(&e) || dynamic_cast<const AgentConfigError*>(&e) ||
      dynamic_cast<const EnvError*>(&e) || dynamic_cast<const CurveError*>(&e)) {
    return kConfig;
  }
  if (auto* c = dynamic_cast<const ClearingError*>(&e)) {
    return c->code() == ClearingErrc::InvalidInput ? kConfig : kRuntime;
  }
  if (auto* d = dynamic_cast<const DlmpError*>(&e)) {
    return d->code() == DlmpErrc::InfeasibleBaseline ? kRuntime : kConfig;
  }
  return kRuntime;
}

void commit(const fs::path& partial) {
  fs::path final_path = partial;
  final_path.replace_extension();
  fs::rename(partial, final_path);
}

template <class Fn>
void write_atomic(const fs::path& path, Fn&& fn) {
  fs::path partial = path;
  partial += ".partial";
  {
    std::ofstream f(partial);
    if (!f) throw std::runtime_error("cannot write " + partial.string());
    fn(f);
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + partial.string());
  }
  commit(partial);
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

int cmd_validate(const fs::path& case_path, std::ostream& out, std::ostream& err) {
  try {
    CaseFile cf = read_case_file(case_path);
    Network net = build_network(cf);
    out << net.bus_count() << " buses, " << net.line_count() << " lines, radial: yes\n";
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::size_t unlimited = 0;
    for (const auto& l : net.lines()) {
      if (std::isinf(l.limit_kw)) {
        ++unlimited;
        continue;
      }
      lo = std::min(lo, l.limit_kw);
      hi = std::max(hi, l.limit_kw);
    }
    if (unlimited == net.line_count()) {
      out << "line limits: all unlimited\n";
    } else {
      out << "line limits: min " << text::format_double(lo) << " kW, max " << text::format_double(hi)
          << " kW, unlimited " << unlimited << "\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "invalid case: " << e.what() << "\n";
    out << "radial: no\n";
    return kRuntime;
  }
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::unique_ptr<Environment> env;
  try {
    env = build_environment(cfg);
    fs::create_directories(cfg.out_dir);
    write_atomic(cfg.out_dir / "config.txt", [&](std::ostream& f) { write_run_config(f, cfg); });
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return classify(e) == kRuntime ? kRuntime : kConfig;
  }

  const fs::path log_partial = cfg.out_dir / "episode.jsonl.partial";
  std::ofstream log(log_partial);
  if (!log) {
    err << "cannot write " << log_partial.string() << "\n";
    return kRuntime;
  }
  env->attach_log(&log);
  try {
    env->reset();
    env->run_episode(cfg.grid_steps, cfg.effective_market_steps());
  } catch (const std::exception& e) {
    env->attach_log(nullptr);
    log.close();
    err << "runtime error: " << e.what() << "\n";
    err << "partial log kept at " << log_partial.string() << "\n";
    return kRuntime;
  }
  env->attach_log(nullptr);
  log.close();

  try {
    commit(log_partial);
    write_atomic(cfg.out_dir / "summary.csv", [&](std::ostream& f) { write_summary_csv(f, env->summary()); });
    if (cfg.mechanism == Mechanism::P2p) {
      write_atomic(cfg.out_dir / "trajectory.csv", [&](std::ostream& f) { write_trajectory_csv(f, env->trajectory()); });
    }
    if (cfg.mechanism == Mechanism::Dlmp && env->hub().dlmp_result()) {
      write_atomic(cfg.out_dir / "dlmp.csv",
                   [&](std::ostream& f) { write_dlmp_csv(f, env->network(), *env->hub().dlmp_result()); });
    }
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }

  const auto& summary = env->summary();
  std::size_t infeasible = 0;
  for (const auto& s : summary) infeasible += !s.feasible;
  out << "mechanism " << to_string(cfg.mechanism) << ", seed " << cfg.seed << ": " << cfg.grid_steps
      << " grid steps x " << cfg.effective_market_steps() << " market steps, " << env->log().size() << " records\n";
  if (!summary.empty() && !std::isnan(summary.back().mean_consumer_price)) {
    out << "last step mean consumer price " << fmt(summary.back().mean_consumer_price) << " c/kWh\n";
  }
  if (!summary.empty() && !std::isnan(summary.back().success_rate)) {
    out << "last step success rate " << fmt(summary.back().success_rate) << "\n";
  }
  out << "infeasible grid steps: " << infeasible << "\n";
  out << "outputs in " << cfg.out_dir.string() << "\n";
  return kOk;
}

int cmd_clear(const fs::path& case_path, const fs::path& bids_path, int segments,
              const std::optional<fs::path>& jsonl_out, std::ostream& out, std::ostream& err) {
  std::optional<Network> net;
  MarketInput input;
  try {
    if (segments < 1) throw ConfigError("segments must be >= 1");
    net = build_network(read_case_file(case_path));
    input = read_bids_file(bids_path);
    validate_market(*net, input);
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kConfig;
  }
  Dispatch d;
  try {
    d = clear(*net, input, ClearOptions{segments});
  } catch (const std::exception& e) {
    err << "clearing failed: " << e.what() << "\n";
    return classify(e);
  }
  out << std::left << std::setw(16) << "agent" << std::setw(8) << "bus" << std::setw(8) << "side" << std::right
      << std::setw(14) << "q_kw" << std::setw(14) << "price" << "\n";
  for (const auto& e : d.entries) {
    out << std::left << std::setw(16) << e.agent << std::setw(8) << e.bus.value << std::setw(8) << to_string(e.side)
        << std::right << std::setw(14) << fmt(e.q) << std::setw(14) << fmt(e.p) << "\n";
  }
  out << "binding lines:";
  if (d.binding_lines.empty()) out << " none";
  for (const auto& l : d.binding_lines) out << ' ' << l;
  out << "\ntotal surplus " << fmt(d.total_surplus) << ", lambda " << fmt(d.lambda) << (d.no_trade ? ", no trade" : "")
      << "\n";
  if (jsonl_out) {
    try {
      if (jsonl_out->has_parent_path()) fs::create_directories(jsonl_out->parent_path());
      write_atomic(*jsonl_out, [&](std::ostream& f) { write_dispatch_jsonl(f, *net, d); });
    } catch (const std::exception& e) {
      err << "runtime error: " << e.what() << "\n";
      return kRuntime;
    }
  }
  return kOk;
}

int cmd_dlmp(const fs::path& case_path, const fs::path& offers_path, std::optional<double> lmp_source,
             const std::optional<fs::path>& csv_out, std::ostream& out, std::ostream& err) {
  std::optional<Network> net;
  ScopfInput input;
  try {
    net = build_network(read_case_file(case_path));
    input = read_offers_file(offers_path);
    if (lmp_source) input.lmp_source = *lmp_source;
    if (!(input.lmp_source >= 0.0) || !std::isfinite(input.lmp_source)) {
      throw ConfigError("lmp_source must be finite and >= 0");
    }
    build_scopf(*net, input);
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kConfig;
  }
  DlmpResult r;
  try {
    r = solve_dlmp(*net, input);
  } catch (const DlmpError& e) {
    err << "dlmp failed: " << e.what() << "\n";
    if (!e.lines().empty()) {
      err << "lines over limit:";
      for (const auto& l : e.lines()) err << ' ' << l;
      err << "\n";
    }
    return classify(e);
  } catch (const std::exception& e) {
    err << "dlmp failed: " << e.what() << "\n";
    return kRuntime;
  }
  write_dlmp_csv(out, *net, r);
  if (csv_out) {
    try {
      if (csv_out->has_parent_path()) fs::create_directories(csv_out->parent_path());
      write_atomic(*csv_out, [&](std::ostream& f) { write_dlmp_csv(f, *net, r); });
    } catch (const std::exception& e) {
      err << "runtime error: " << e.what() << "\n";
      return kRuntime;
    }
  }
  return kOk;
}

SeedRange parse_seed_range(const std::string& text) {
  auto dots = text.find("..");
  if (dots == std::string::npos) throw ConfigError("seed range must look like a..b");
  auto num = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("bad seed '" + s + "' in range " + text);
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  SeedRange r{num(text.substr(0, dots)), num(text.substr(dots + 2))};
  if (r.hi < r.lo) throw ConfigError("seed range " + text + " is empty");
  if (r.hi - r.lo >= 100000) throw ConfigError("seed range " + text + " is too large");
  return r;
}

int cmd_sweep(const RunConfig& cfg, SeedRange seeds, unsigned threads, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  }
  const std::size_t n = static_cast<std::size_t>(seeds.hi - seeds.lo + 1);
  std::vector<int> codes(n, kOk);
  std::vector<std::string> outs(n), errs(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      RunConfig one = cfg;
      one.seed = seeds.lo + i;
      one.out_dir = cfg.out_dir / ("seed_" + std::to_string(one.seed));
      std::ostringstream o, e;
      codes[i] = cmd_run(one, o, e);
      outs[i] = o.str();
      errs[i] = e.str();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kOk;
  for (std::size_t i = 0; i < n; ++i) {
    out << "[seed " << seeds.lo + i << "] " << outs[i];
    err << errs[i];
    worst = std::max(worst, codes[i]);
  }
  try {
    fs::create_directories(cfg.out_dir);
    write_atomic(cfg.out_dir / "sweep.csv", [&](std::ostream& f) {
      f << "seed,exit_code,out_dir\n";
      for (std::size_t i = 0; i < n; ++i) {
        f << seeds.lo + i << ',' << codes[i] << ",seed_" << seeds.lo + i << '\n';
      }
    });
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return std::max(worst, static_cast<int>(kRuntime));
  }
  return worst;
}

}  // namespace radmarket::cli
