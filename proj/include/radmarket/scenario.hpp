#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace radmarket {

/// Exogenous per-step inputs for one agent. Unset fields fall back to the
/// agent's own parameters.
struct ScenarioEntry {
  std::optional<double> load_kw;
  std::optional<bool> available;
};

/// CSV with header `t,agent,load_kw,available`; either value may be empty.
class Scenario {
 public:
  void set(int t, const std::string& agent, ScenarioEntry entry) { entries_[{t, agent}] = entry; }
  std::optional<ScenarioEntry> at(int t, const std::string& agent) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::pair<int, std::string>, ScenarioEntry>& entries() const { return entries_; }

 private:
  std::map<std::pair<int, std::string>, ScenarioEntry> entries_;
};

Scenario parse_scenario(std::istream& in, const std::string& origin = "<memory>");
Scenario read_scenario_file(const std::filesystem::path& path);
void write_scenario(std::ostream& out, const Scenario& scenario);

}  // namespace radmarket
