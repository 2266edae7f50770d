#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "radmarket/network.hpp"

using namespace radmarket;

namespace {

Network chain3() {
  return build_network(parse_case_text("bus 0\nbus 1\nbus 2\nline a 0 1 10\nline b 1 2 10\n"));
}

Network star(int leaves) {
  std::ostringstream s;
  for (int i = 0; i <= leaves; ++i) s << "bus " << i << "\n";
  for (int i = 1; i <= leaves; ++i) s << "line l" << i << " 0 " << i << " 10\n";
  return build_network(parse_case_text(s.str()));
}

}  // namespace

TEST(CaseParse, CommentsAndWhitespace) {
  auto cf = parse_case_text("# header\n  bus 0   # root\nbus 7\n\nline x 7 0 2.5\n");
  ASSERT_EQ(cf.buses.size(), 2u);
  ASSERT_EQ(cf.lines.size(), 1u);
  EXPECT_EQ(cf.lines[0].id, "x");
  EXPECT_EQ(cf.lines[0].from.value, 7);
  EXPECT_DOUBLE_EQ(cf.lines[0].limit_kw, 2.5);
  EXPECT_EQ(cf.lines[0].source_line, 5);
}

TEST(CaseParse, RejectsUnknownDirective) {
  try {
    parse_case_text("bus 0\nnode 1\n", "x.case");
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.code(), NetworkErrc::Parse);
    EXPECT_NE(std::string(e.what()).find("x.case:2"), std::string::npos);
  }
}

TEST(CaseParse, RejectsBadArity) {
  EXPECT_THROW(parse_case_text("bus 0\nline a 0 1\n"), NetworkError);
  EXPECT_THROW(parse_case_text("bus\n"), NetworkError);
  EXPECT_THROW(parse_case_text("bus 0 1\n"), NetworkError);
}

TEST(CaseParse, RoundTrip) {
  Network n = chain3();
  std::ostringstream out;
  write_case(out, n.to_case());
  Network back = build_network(parse_case_text(out.str()));
  EXPECT_EQ(back.bus_count(), 3u);
  EXPECT_EQ(back.line_count(), 2u);
  EXPECT_EQ(back.line(1).id, n.line(1).id);
  EXPECT_DOUBLE_EQ(back.line(1).limit_kw, n.line(1).limit_kw);
}

TEST(BuildNetwork, Chain) {
  Network n = chain3();
  auto i1 = n.require_index(BusId{1});
  auto i2 = n.require_index(BusId{2});
  ASSERT_EQ(n.children(i1).size(), 1u);
  EXPECT_EQ(n.children(i1)[0], i2);
  EXPECT_EQ(*n.parent(i2), i1);
  EXPECT_FALSE(n.parent(0).has_value());
  EXPECT_EQ(n.bus_id(0), kFeederBus);
}

TEST(BuildNetwork, Cycle) {
  try {
    build_network(parse_case_text("bus 0\nbus 1\nbus 2\nline a 0 1 1\nline b 1 2 1\nline c 2 0 1\n"));
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.code(), NetworkErrc::CyclicTopology);
    EXPECT_NE(std::string(e.what()).find("c"), std::string::npos);
  }
}

TEST(BuildNetwork, Disconnected) {
  try {
    build_network(parse_case_text("bus 0\nbus 1\nbus 2\nbus 3\nline a 0 1 1\nline b 2 3 1\n"));
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.code(), NetworkErrc::Disconnected);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(BuildNetwork, ErrorsNameOffender) {
  auto code_of = [](const std::string& text) {
    try {
      build_network(parse_case_text(text));
    } catch (const NetworkError& e) {
      return e.code();
    }
    return NetworkErrc::Parse;
  };
  EXPECT_EQ(code_of("bus 0\nbus 1\nline a 0 1 1\nline a 0 1 2\n"), NetworkErrc::DuplicateLine);
  EXPECT_EQ(code_of("bus 0\nbus 1\nbus 2\nline a 0 1 1\nline b 1 0 2\n"), NetworkErrc::DuplicateLine);
  EXPECT_EQ(code_of("bus 0\nbus 1\nline a 0 9 1\n"), NetworkErrc::UnknownBus);
  EXPECT_EQ(code_of("bus 0\nbus 1\nline a 1 1 1\n"), NetworkErrc::SelfLoop);
  EXPECT_EQ(code_of("bus 0\nbus 1\nline a 0 1 0\n"), NetworkErrc::InvalidLimit);
  EXPECT_EQ(code_of("bus 1\nbus 2\nline a 1 2 1\n"), NetworkErrc::MissingRoot);
  EXPECT_EQ(code_of("bus 0\nbus 0\n"), NetworkErrc::DuplicateBus);

  try {
    build_network(parse_case_text("bus 0\nbus 1\nline feeder 0 7 1\n"));
  } catch (const NetworkError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(LineFlows, ChainRecursion) {
  Network n = chain3();
  auto flows = n.line_flows(std::map<BusId, double>{{BusId{1}, 1.0}, {BusId{2}, 2.0}});
  EXPECT_DOUBLE_EQ(flows[*n.line_index("b")], 2.0);
  EXPECT_DOUBLE_EQ(flows[*n.line_index("a")], 3.0);
}

TEST(LineFlows, ZeroInjections) {
  Network n = chain3();
  for (double f : n.line_flows(std::vector<double>(3, 0.0))) EXPECT_EQ(f, 0.0);
  for (double f : n.line_flows(std::map<BusId, double>{})) EXPECT_EQ(f, 0.0);
}

TEST(LineFlows, StarMatchesSubtreeOracle) {
  Network n = star(3);
  std::vector<double> inj{0.0, 2.0, -1.0, 0.5};
  auto flows = n.line_flows(inj);
  auto expect = oracle::subtree_sum_flows(n.to_case(), inj);
  ASSERT_EQ(flows.size(), expect.size());
  for (std::size_t k = 0; k < flows.size(); ++k) EXPECT_DOUBLE_EQ(flows[k], expect[k]);
  EXPECT_DOUBLE_EQ(flows[*n.line_index("l1")], 2.0);
  EXPECT_DOUBLE_EQ(flows[*n.line_index("l2")], -1.0);
  EXPECT_DOUBLE_EQ(flows[*n.line_index("l3")], 0.5);
  EXPECT_DOUBLE_EQ(n.feeder_flow(flows), 1.5);
}

TEST(LineFlows, RandomTreesMatchOracleAndConserve) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto cf = oracle::random_tree(rng, 2 + trial % 25);
    Network n = build_network(cf);
    std::vector<double> by_id(cf.buses.size(), 0.0);
    for (std::size_t b = 1; b < by_id.size(); ++b) by_id[b] = u(rng);
    std::map<BusId, double> inj;
    double total = 0.0;
    for (std::size_t b = 1; b < by_id.size(); ++b) {
      inj[BusId{static_cast<int>(b)}] = by_id[b];
      total += by_id[b];
    }
    auto flows = n.line_flows(inj);
    auto expect = oracle::subtree_sum_flows(cf, by_id);
    for (std::size_t k = 0; k < cf.lines.size(); ++k) {
      auto idx = *n.line_index(cf.lines[k].id);
      EXPECT_NEAR(flows[idx], expect[k], 1e-12 * std::max(1.0, std::abs(expect[k])));
    }
    EXPECT_NEAR(n.feeder_flow(flows), total, 1e-12 * std::max(1.0, std::abs(total)));
  }
}

TEST(Ptdf, ChainAndStar) {
  Network c = chain3();
  Eigen::MatrixXd h = c.ptdf().matrix();
  ASSERT_EQ(h.rows(), 2);
  ASSERT_EQ(h.cols(), 2);
  auto la = *c.line_index("a");
  auto lb = *c.line_index("b");
  auto k1 = c.require_index(BusId{1}) - 1;
  auto k2 = c.require_index(BusId{2}) - 1;
  EXPECT_EQ(h(la, k1), 1.0);
  EXPECT_EQ(h(la, k2), 1.0);
  EXPECT_EQ(h(lb, k1), 0.0);
  EXPECT_EQ(h(lb, k2), 1.0);

  Network s = star(2);
  EXPECT_TRUE(s.ptdf().matrix().isApprox(Eigen::MatrixXd::Identity(2, 2)) ||
              (s.ptdf().matrix().array().abs().colwise().sum() == 1.0).all());
  EXPECT_EQ(s.ptdf().matrix().sum(), 2.0);
  EXPECT_EQ(s.ptdf().at(0, 0), 0.0);
}

TEST(Ptdf, RandomTreeAgreesWithRecursionAndIsLinear) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Network n = build_network(oracle::random_tree(rng, 8));
  PtdfMatrix h = n.ptdf();
  for (Eigen::Index col = 0; col < h.matrix().cols(); ++col) EXPECT_GE(h.matrix().col(col).sum(), 1.0);
  for (std::size_t b = 1; b < n.bus_count(); ++b) {
    if (*n.parent(b) == 0) EXPECT_EQ(h.matrix().col(static_cast<Eigen::Index>(b - 1)).sum(), 1.0);
  }
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(n.bus_count()), y(n.bus_count()), z(n.bus_count());
    double a = u(rng), b = u(rng);
    for (std::size_t i = 1; i < x.size(); ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
      z[i] = a * x[i] + b * y[i];
    }
    auto fx = h.apply(x), fy = h.apply(y), fz = h.apply(z);
    auto rx = n.line_flows(x);
    for (std::size_t l = 0; l < fx.size(); ++l) {
      EXPECT_NEAR(fx[l], rx[l], 1e-12 * std::max(1.0, std::abs(rx[l])));
      EXPECT_NEAR(fz[l], a * fx[l] + b * fy[l], 1e-12 * std::max(1.0, std::abs(fz[l])));
    }
  }
}

TEST(Grid, ResetAndAdditiveStep) {
  Grid g(chain3());
  g.reset();
  EXPECT_EQ(g.state().t, -1);
  for (double f : g.state().flows) EXPECT_EQ(f, 0.0);
  std::vector<GridAction> acts{{"x", BusId{2}, 1.0}, {"y", BusId{2}, 0.5}};
  const auto& s = g.step(acts);
  EXPECT_EQ(s.t, 0);
  EXPECT_DOUBLE_EQ(s.injections[g.network().require_index(BusId{2})], 1.5);
  EXPECT_TRUE(s.feasible);
}

TEST(Grid, OverLimitIsRecordedInfeasible) {
  Network base = chain3();
  Grid probe(base);
  probe.reset();
  std::vector<GridAction> acts{{"x", BusId{2}, 4.0}};
  double prior = probe.step(acts).flows[*base.line_index("b")];
  // Limit at prior / 1.01 puts the same action at 1.01x the limit.
  Grid g(base.with_line_limit(*base.line_index("b"), prior / 1.01));
  g.reset();
  const auto& s = g.step(acts);
  EXPECT_FALSE(s.feasible);
  EXPECT_DOUBLE_EQ(s.flows[*base.line_index("b")], 4.0);
  EXPECT_EQ(s.t, 0);
}

TEST(Grid, UnknownBusLeavesStateUntouched) {
  Grid g(chain3());
  g.reset();
  std::vector<GridAction> ok{{"x", BusId{1}, 1.0}};
  g.step(ok);
  std::vector<GridAction> bad{{"x", BusId{1}, 2.0}, {"y", BusId{42}, 1.0}};
  try {
    g.step(bad);
    FAIL();
  } catch (const NetworkError& e) {
    EXPECT_EQ(e.code(), NetworkErrc::UnknownBus);
  }
  EXPECT_EQ(g.state().t, 0);
  EXPECT_DOUBLE_EQ(g.state().injections[1], 1.0);
}

TEST(Grid, DeterministicSequences) {
  std::mt19937_64 rng(3);
  Network n = build_network(oracle::random_tree(rng, 12));
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::vector<GridAction>> seq(5);
  for (auto& step : seq)
    for (int k = 0; k < 6; ++k) step.push_back({"a", BusId{1 + k}, u(rng)});
  Grid a(n), b(n);
  a.reset();
  b.reset();
  for (const auto& step : seq) {
    a.step(step);
    b.step(step);
    EXPECT_EQ(a.state().flows, b.state().flows);
    EXPECT_EQ(a.state().feasible, b.state().feasible);
  }
}
