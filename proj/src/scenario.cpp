#include "radmarket/scenario.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "radmarket/text.hpp"

namespace radmarket {

std::optional<ScenarioEntry> Scenario::at(int t, const std::string& agent) const {
  auto it = entries_.find({t, agent});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

Scenario parse_scenario(std::istream& in, const std::string& origin) {
  Scenario out;
  std::string raw;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (!header) {
      if (line != "t,agent,load_kw,available") {
        throw text::ParseError(where + "expected header t,agent,load_kw,available");
      }
      header = true;
      continue;
    }
    auto f = text::split(line, ',');
    if (f.size() != 4) throw text::ParseError(where + "expected 4 fields");
    try {
      ScenarioEntry e;
      const int t = text::parse_int(text::trim(f[0]));
      const std::string agent(text::trim(f[1]));
      if (agent.empty()) throw text::ParseError("empty agent id");
      if (!text::trim(f[2]).empty()) e.load_kw = text::parse_double(text::trim(f[2]));
      if (!text::trim(f[3]).empty()) e.available = text::parse_bool(text::trim(f[3]));
      out.set(t, agent, e);
    } catch (const std::exception& ex) {
      throw text::ParseError(where + ex.what());
    }
  }
  return out;
}

Scenario read_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw text::ParseError("cannot open " + path.string());
  return parse_scenario(in, path.string());
}

void write_scenario(std::ostream& out, const Scenario& scenario) {
  out << "t,agent,load_kw,available\n";
  for (const auto& [key, e] : scenario.entries()) {
    out << key.first << ',' << key.second << ',';
    if (e.load_kw) out << text::format_double(*e.load_kw);
    out << ',';
    if (e.available) out << (*e.available ? 1 : 0);
    out << '\n';
  }
}

}  // namespace radmarket
