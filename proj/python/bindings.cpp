#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "radmarket/cli.hpp"
#include "radmarket/dlmp.hpp"
#include "radmarket/p2p.hpp"

namespace py = pybind11;
using namespace radmarket;

namespace {

RunConfig configure(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = read_run_config(path);
  for (const auto& o : overrides) apply_override(cfg, o, std::filesystem::current_path());
  return cfg;
}

py::dict dispatch_dict(const Network& net, const Dispatch& d) {
  py::list entries;
  for (const auto& e : d.entries) {
    py::dict row;
    row["agent"] = e.agent;
    row["bus"] = e.bus.value;
    row["side"] = to_string(e.side);
    row["q_kw"] = e.q;
    row["price"] = e.p;
    entries.append(row);
  }
  py::dict nodal;
  for (std::size_t b = 0; b < d.nodal_prices.size(); ++b) nodal[py::int_(net.bus_id(b).value)] = d.nodal_prices[b];
  py::dict out;
  out["entries"] = entries;
  out["binding_lines"] = d.binding_lines;
  out["nodal_prices"] = nodal;
  out["total_surplus"] = d.total_surplus;
  out["lambda"] = d.lambda;
  out["no_trade"] = d.no_trade;
  return out;
}

py::dict dlmp_dict(const Network& net, const DlmpResult& r) {
  py::dict dlmp, p_g, p_d;
  for (std::size_t b = 0; b < net.bus_count(); ++b) {
    py::int_ id(net.bus_id(b).value);
    dlmp[id] = r.dlmp[b];
    p_g[id] = r.p_g[b];
    p_d[id] = r.p_d[b];
  }
  py::dict out;
  out["dlmp"] = dlmp;
  out["p_g"] = p_g;
  out["p_d"] = p_d;
  out["lambda"] = r.lambda;
  out["p_source"] = r.p_source;
  out["objective"] = r.objective;
  out["binding_lines"] = r.binding_lines;
  return out;
}

py::dict summary_dict(const StepSummary& s) {
  py::dict d;
  d["t_grid"] = s.t_grid;
  d["feasible"] = s.feasible;
  d["violated_lines"] = s.violated_lines;
  d["consumption_kw"] = s.consumption_kw;
  d["generation_kw"] = s.generation_kw;
  d["feeder_flow_kw"] = s.feeder_flow_kw;
  d["mean_consumer_price"] = s.mean_consumer_price;
  d["total_reward"] = s.total_reward;
  d["success_rate"] = s.success_rate;
  return d;
}

// Owns an environment built from a run config file.
class PyEnvironment {
 public:
  PyEnvironment(const std::filesystem::path& path, const std::vector<std::string>& overrides)
      : cfg_(configure(path, overrides)), env_(build_environment(cfg_)) {}

  void reset(std::optional<std::uint64_t> seed) {
    if (seed) {
      env_->reset(*seed);
    } else {
      env_->reset();
    }
  }

  std::size_t run_episode(std::optional<int> grid_steps, std::optional<int> market_steps) {
    return env_->run_episode(grid_steps.value_or(cfg_.grid_steps), market_steps.value_or(cfg_.effective_market_steps()))
        .size();
  }

  std::vector<std::string> log() const {
    std::vector<std::string> out;
    for (const auto& r : env_->log().records()) out.push_back(r.json);
    return out;
  }

  py::list summary() const {
    py::list out;
    for (const auto& s : env_->summary()) out.append(summary_dict(s));
    return out;
  }

  std::string fingerprint() const { return env_->fingerprint(); }
  const Network& network() const { return env_->network(); }
  std::vector<std::string> agent_ids() const {
    std::vector<std::string> ids;
    for (const auto& a : env_->agents()) ids.push_back(a->id());
    return ids;
  }

 private:
  RunConfig cfg_;
  std::unique_ptr<Environment> env_;
};

}  // namespace

PYBIND11_MODULE(_radmarket, m) {
  m.doc() = "Radial distribution-market simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NetworkError>(m, "NetworkError", PyExc_ValueError);
  py::register_exception<DlmpError>(m, "DlmpError", PyExc_RuntimeError);
  py::register_exception<ClearingError>(m, "ClearingError", PyExc_RuntimeError);

  py::class_<Network>(m, "Network")
      .def_static(
          "from_file", [](const std::filesystem::path& p) { return build_network(read_case_file(p)); }, py::arg("path"))
      .def_static(
          "from_text", [](const std::string& t) { return build_network(parse_case_text(t)); }, py::arg("text"))
      .def_property_readonly("bus_count", &Network::bus_count)
      .def_property_readonly("line_count", &Network::line_count)
      .def_property_readonly("bus_ids",
                             [](const Network& n) {
                               std::vector<int> ids;
                               for (std::size_t b = 0; b < n.bus_count(); ++b) ids.push_back(n.bus_id(b).value);
                               return ids;
                             })
      .def_property_readonly("line_ids",
                             [](const Network& n) {
                               std::vector<std::string> ids;
                               for (const auto& l : n.lines()) ids.push_back(l.id);
                               return ids;
                             })
      .def(
          "line_flows",
          [](const Network& n, const std::map<int, double>& injections) {
            std::map<BusId, double> inj;
            for (const auto& [b, v] : injections) inj[BusId{b}] = v;
            auto flows = n.line_flows(inj);
            std::map<std::string, double> out;
            for (std::size_t l = 0; l < flows.size(); ++l) out[n.line(l).id] = flows[l];
            return out;
          },
          py::arg("injections"), "Flows by line id for consumption-positive injections keyed by bus id.")
      .def(
          "ptdf", [](const Network& n) { return Eigen::MatrixXd(n.ptdf().matrix()); },
          "Rows follow line_ids, columns follow bus_ids[1:].")
      .def("with_unlimited_lines", &Network::with_unlimited_lines);

  m.def(
      "clear",
      [](const Network& net, const std::string& bids, int segments) {
        MarketInput in = parse_bids_text(bids);
        validate_market(net, in);
        return dispatch_dict(net, clear(net, in, ClearOptions{segments}));
      },
      py::arg("network"), py::arg("bids"), py::arg("segments") = 100, "Clears bid records given as text.");

  m.def(
      "solve_dlmp",
      [](const Network& net, const std::string& offers, std::optional<double> lmp_source) {
        ScopfInput in = parse_offers_text(offers);
        if (lmp_source) in.lmp_source = *lmp_source;
        return dlmp_dict(net, solve_dlmp(net, in));
      },
      py::arg("network"), py::arg("offers"), py::arg("lmp_source") = py::none());

  m.def(
      "negotiate",
      [](double b_p, double b_c, double c_service, double c_lose, double ub) {
        P2pConfig cfg;
        cfg.c_service = c_service;
        cfg.c_lose = c_lose;
        cfg.ub = ub;
        cfg.validate();
        auto o = negotiate(b_p, b_c, cfg);
        py::dict d;
        d["success"] = o.success;
        d["price"] = o.trade_price ? py::cast(*o.trade_price) : py::none();
        d["r_p"] = o.r_p;
        d["r_c"] = o.r_c;
        return d;
      },
      py::arg("b_p"), py::arg("b_c"), py::arg("c_service") = 0.5, py::arg("c_lose") = 1.0, py::arg("ub") = 12.0);

  py::class_<BanditState>(m, "BanditState")
      .def(py::init<std::vector<double>, double>(), py::arg("arms"), py::arg("delta") = 0.01)
      .def_readonly("arms", &BanditState::arms)
      .def_readonly("counts", &BanditState::counts)
      .def_readonly("means", &BanditState::means)
      .def_readonly("delta", &BanditState::delta)
      .def("pulls", &BanditState::pulls);
  m.def("ucb_index", &ucb_index, py::arg("state"), py::arg("arm"), py::arg("t"));
  m.def("ucb_select", &ucb_select, py::arg("state"));
  m.def("ucb_update", &ucb_update, py::arg("state"), py::arg("arm"), py::arg("reward"));
  m.def("arm_grid", &arm_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));

  m.def(
      "load_config",
      [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
        std::ostringstream s;
        write_run_config(s, configure(path, overrides));
        return s.str();
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
      "Resolved config as `key = value` text.");

  m.def(
      "run",
      [](const std::filesystem::path& path, const std::vector<std::string>& overrides) -> py::tuple {
        RunConfig cfg;
        std::ostringstream out, err;
        try {
          cfg = configure(path, overrides);
        } catch (const std::exception& e) {
          return py::make_tuple(static_cast<int>(cli::kConfig), std::string(), std::string(e.what()));
        }
        int code;
        {
          py::gil_scoped_release release;
          code = cli::cmd_run(cfg, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
      "Same as the `run` subcommand; returns (exit_code, stdout, stderr).");

  py::class_<PyEnvironment>(m, "Environment")
      .def(py::init<const std::filesystem::path&, const std::vector<std::string>&>(), py::arg("config"),
           py::arg("overrides") = std::vector<std::string>{})
      .def("reset", &PyEnvironment::reset, py::arg("seed") = py::none())
      .def("run_episode", &PyEnvironment::run_episode, py::arg("grid_steps") = py::none(),
           py::arg("market_steps") = py::none(), "Returns the number of log records.")
      .def("log", &PyEnvironment::log, "Episode log, one JSON string per record.")
      .def("summary", &PyEnvironment::summary)
      .def("fingerprint", &PyEnvironment::fingerprint)
      .def_property_readonly("agent_ids", &PyEnvironment::agent_ids)
      .def_property_readonly("network", &PyEnvironment::network, py::return_value_policy::copy);
}
