#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "radmarket/dlmp.hpp"
#include "radmarket/text.hpp"

using namespace radmarket;

namespace {

Network two_bus() { return build_network(parse_case_text("bus 0\nbus 1\nline a 0 1 100\n")); }

Network chain3(double limit_12) {
  std::ostringstream s;
  s << "bus 0\nbus 1\nbus 2\nline a 0 1 100\nline b 1 2 " << limit_12 << "\n";
  return build_network(parse_case_text(s.str()));
}

}  // namespace

TEST(Scopf, ForcedImport) {
  ScopfInput in;
  in.lmp_source = 4.0;
  in.drs.push_back({"load", BusId{1}, 5.0, {}});
  auto r = solve_dlmp(two_bus(), in);
  EXPECT_NEAR(r.p_source, 5.0, 1e-12);
  EXPECT_NEAR(r.objective, 20.0, 1e-12);
  EXPECT_NEAR(r.dlmp[1], 4.0, 1e-12);
  EXPECT_NEAR(r.lambda, 4.0, 1e-12);
}

TEST(Scopf, CheapLocalGenerationDisplacesImport) {
  ScopfInput in;
  in.lmp_source = 4.0;
  in.drs.push_back({"load", BusId{1}, 5.0, {}});
  in.gens.push_back({"g", BusId{1}, 0.0, 5.0, {{5.0, 2.0}}});
  auto prog = build_scopf(two_bus(), in);
  auto sol = solve_lp(prog.problem);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.x(static_cast<Eigen::Index>(prog.layout.p_source)), 0.0, 1e-12);
  EXPECT_NEAR(sol.x(static_cast<Eigen::Index>(prog.layout.s_source)), 0.0, 1e-12);
  auto r = solve_dlmp(two_bus(), in);
  EXPECT_NEAR(r.gen_output[0], 5.0, 1e-12);
  EXPECT_NEAR(r.objective, 10.0, 1e-12);
}

TEST(Scopf, CheapDemandResponseCurtails) {
  ScopfInput in;
  in.lmp_source = 4.0;
  in.drs.push_back({"load", BusId{1}, 5.0, {{3.0, 1.0}, {4.0, 2.0}}});
  auto r = solve_dlmp(two_bus(), in);
  EXPECT_NEAR(r.dr_load[0], 0.0, 1e-12);
  EXPECT_NEAR(r.objective, 3.0 + 2.0 * 2.0, 1e-12);
}

TEST(Scopf, ExportEarnsNothing) {
  ScopfInput in;
  in.lmp_source = 4.0;
  in.gens.push_back({"g", BusId{1}, 3.0, 5.0, {{5.0, 1.0}}});
  auto r = solve_dlmp(two_bus(), in);
  EXPECT_NEAR(r.p_source, -3.0, 1e-12);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
}

TEST(Scopf, UncongestedPricesAreUniform) {
  ScopfInput in;
  in.lmp_source = 5.0;
  in.drs.push_back({"l1", BusId{1}, 10.0, {{2.0, 8.0}}});
  in.drs.push_back({"l2", BusId{2}, 10.0, {{2.0, 9.0}}});
  auto r = solve_dlmp(chain3(1000.0), in);
  for (double p : r.dlmp) EXPECT_NEAR(p, 5.0, 1e-12);
  for (double m : r.mu_plus) EXPECT_EQ(m, 0.0);
  EXPECT_TRUE(r.binding_lines.empty());
}

TEST(Scopf, CongestionSeparatesPrices) {
  ScopfInput in;
  in.lmp_source = 5.0;
  in.drs.push_back({"l1", BusId{1}, 10.0, {}});
  in.drs.push_back({"l2", BusId{2}, 10.0, {{6.0, 15.0}}});
  Network net = chain3(6.0);
  auto r = solve_dlmp(net, in);
  auto b1 = net.require_index(BusId{1}), b2 = net.require_index(BusId{2});
  EXPECT_NEAR(r.dlmp[b1], r.lambda, 1e-12);
  EXPECT_NEAR(r.dlmp[b2], 15.0, 1e-9);
  EXPECT_GT(r.dlmp[b2], r.dlmp[b1]);
  EXPECT_EQ(r.binding_lines, std::vector<std::string>{"b"});
  EXPECT_NEAR(r.dr_load[1], 6.0, 1e-9);

  // Tightening a limit never lowers cost.
  auto tighter = solve_dlmp(chain3(5.0), in);
  EXPECT_GE(tighter.objective, r.objective - 1e-9);
}

TEST(Scopf, DecompositionAndFiniteDifference) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto cf = oracle::random_tree(rng, 7, 3.0, 25.0);
    Network net = build_network(cf);
    ScopfInput in;
    in.lmp_source = 3.0 + 3.0 * u(rng);
    for (int b = 1; b < 7; ++b) {
      DrOffer d{"d" + std::to_string(b), BusId{b}, 2.0 + 6.0 * u(rng), {}};
      double p = 4.0 + 4.0 * u(rng);
      d.blocks.push_back({1.0 + u(rng), p});
      d.blocks.push_back({1.0 + u(rng), p + 3.0 * u(rng)});
      in.drs.push_back(d);
      if (u(rng) < 0.3) in.gens.push_back({"g" + std::to_string(b), BusId{b}, 0.0, 3.0, {{1.5, 5.0 * u(rng) + 2.0}, {1.5, 9.0}}});
    }
    DlmpResult r;
    try {
      r = solve_dlmp(net, in);
    } catch (const DlmpError& e) {
      EXPECT_EQ(e.code(), DlmpErrc::InfeasibleBaseline);
      continue;
    }
    PtdfMatrix h = net.ptdf();
    for (std::size_t b = 1; b < net.bus_count(); ++b) {
      double expect = r.lambda;
      for (std::size_t l = 0; l < net.line_count(); ++l) expect += h.at(l, b) * (r.mu_plus[l] - r.mu_minus[l]);
      EXPECT_NEAR(r.dlmp[b], expect, 1e-8);
    }
    EXPECT_NEAR(r.dlmp[0], r.lambda, 1e-12);
    double net_load = 0.0;
    for (std::size_t b = 0; b < net.bus_count(); ++b) net_load += r.p_d[b] - r.p_g[b];
    EXPECT_NEAR(r.p_source, net_load, 1e-8);

    for (std::size_t i = 0; i < in.drs.size(); ++i) {
      if (r.dr_load[i] <= 1e-9) continue;
      const double eps = 1e-4 * in.drs[i].baseline;
      ScopfInput up = in, dn = in;
      up.drs[i].baseline += eps;
      dn.drs[i].baseline -= eps;
      double fu, fd;
      try {
        fu = solve_dlmp(net, up).objective;
        fd = solve_dlmp(net, dn).objective;
      } catch (const DlmpError&) {
        continue;
      }
      const double fwd = (fu - r.objective) / eps, bwd = (r.objective - fd) / eps;
      // A kink between the two sides means the derivative is not defined here.
      if (std::abs(fwd - bwd) > 1e-6 * std::max(1.0, std::abs(fwd))) continue;
      const double central = (fu - fd) / (2.0 * eps);
      const double dl = r.dlmp[net.require_index(in.drs[i].bus)];
      EXPECT_NEAR(central, dl, 1e-4 * std::max(1.0, std::abs(dl)));
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Scopf, Errors) {
  ScopfInput in;
  in.lmp_source = 4.0;
  in.gens.push_back({"g", BusId{1}, 0.0, 5.0, {{3.0, 4.0}, {2.0, 3.0}}});
  try {
    build_scopf(two_bus(), in);
    FAIL();
  } catch (const DlmpError& e) {
    EXPECT_EQ(e.code(), DlmpErrc::NonConvexCost);
  }
  in.gens[0].blocks = {{3.0, 4.0}};
  try {
    build_scopf(two_bus(), in);
    FAIL();
  } catch (const DlmpError& e) {
    EXPECT_EQ(e.code(), DlmpErrc::InvalidOffer);
  }
  in.gens.clear();
  in.drs.push_back({"far", BusId{9}, 1.0, {}});
  EXPECT_THROW(build_scopf(two_bus(), in), DlmpError);

  ScopfInput heavy;
  heavy.lmp_source = 4.0;
  heavy.drs.push_back({"l", BusId{2}, 10.0, {{2.0, 5.0}}});
  try {
    solve_dlmp(chain3(6.0), heavy);
    FAIL();
  } catch (const DlmpError& e) {
    EXPECT_EQ(e.code(), DlmpErrc::InfeasibleBaseline);
    EXPECT_EQ(e.lines(), std::vector<std::string>{"b"});
  }
}

TEST(OffersFile, ParseAndRoundTrip) {
  auto in = parse_offers_text("source 4.5\ngen 1 0 5 2,3 3,4.5\ndr 2 10 1,6 2,8\ndr 1 3\n");
  EXPECT_EQ(in.lmp_source, 4.5);
  ASSERT_EQ(in.gens.size(), 1u);
  ASSERT_EQ(in.drs.size(), 2u);
  EXPECT_EQ(in.gens[0].blocks.size(), 2u);
  EXPECT_TRUE(in.drs[1].blocks.empty());
  std::ostringstream out;
  write_offers(out, in);
  auto back = parse_offers_text(out.str());
  EXPECT_EQ(back.drs[0].blocks[1].price, 8.0);
  EXPECT_EQ(back.gens[0].pmax, 5.0);
  EXPECT_THROW(parse_offers_text("gen 1 0 5 2;3\n"), text::ParseError);
  EXPECT_THROW(parse_offers_text("load 1 3\n"), text::ParseError);
}

TEST(DlmpCsv, RoundTrip) {
  ScopfInput in;
  in.lmp_source = 5.0;
  in.drs.push_back({"l1", BusId{1}, 10.0, {}});
  in.drs.push_back({"l2", BusId{2}, 10.0, {{6.0, 15.0}}});
  Network net = chain3(6.0);
  auto r = solve_dlmp(net, in);
  std::ostringstream out;
  write_dlmp_csv(out, net, r);
  std::istringstream back(out.str());
  auto rows = read_dlmp_csv(back);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(rows[b].bus, net.bus_id(b));
    EXPECT_EQ(rows[b].dlmp, r.dlmp[b]);
    EXPECT_EQ(rows[b].p_d, r.p_d[b]);
  }
}
