#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "viakernel/comparison.hpp"
#include "viakernel/wolbachia.hpp"

using namespace viakernel;

namespace {

ControlledSystem exchange() {
  ControlledSystem s;
  s.name = "exchange";
  s.n = 2;
  s.m = 1;
  s.f = [](VecView x, VecView, std::span<double> dx) {
    dx[0] = -x[0] + x[1];
    dx[1] = x[0] - x[1];
  };
  s.controls = ControlSet::box({0}, {1});
  s.state_domain = nullptr;
  return s;
}

ControlledSystem decay() {
  ControlledSystem s;
  s.n = 1;
  s.m = 1;
  s.f = [](VecView x, VecView, std::span<double> dx) { dx[0] = -x[0]; };
  s.controls = ControlSet::box({0}, {1});
  s.state_domain = nullptr;
  return s;
}

ControlPath bang_bang(std::mt19937_64& rng, double hi, std::size_t n, double spacing) {
  std::bernoulli_distribution coin(0.5);
  ControlPath p{spacing, {}};
  for (std::size_t k = 0; k < n; ++k) p.values.push_back({coin(rng) ? hi : 0.0});
  return p;
}

}  // namespace

TEST_CASE("metzler pair stays ordered", "[comparison]") {
  const auto sys = exchange();
  const auto r = compare_flows(sys, sys, ConvexCone::orthant({1, 1}), Vec{0, 0}, Vec{1, 0},
                               ControlPath::constant({0}, 0.5, 4), 0.01, 2.0);
  CHECK(r.passed());
  CHECK(r.checked_times == 201);
  CHECK(r.max_defect == 0.0);
}

TEST_CASE("scalar decay stays ordered", "[comparison]") {
  const auto r = compare_flows(decay(), decay(), ConvexCone::orthant({1}), Vec{0}, Vec{1},
                               ControlPath::constant({0}, 1.0, 3), 0.01, 0.0);
  CHECK(r.passed());
  CHECK(r.checked_times == 301);
}

TEST_CASE("unordered initial states are rejected", "[comparison]") {
  CHECK_THROWS_AS(compare_flows(decay(), decay(), ConvexCone::orthant({1}), Vec{1}, Vec{0},
                                ControlPath::constant({0}, 1.0, 1), 0.1, 0.0),
                  std::invalid_argument);
}

TEST_CASE("wolbachia: controlled flow below the u_sharp flow", "[comparison][wolbachia]") {
  const auto p = default_preset();
  const auto cs = build_case_study(p, default_thresholds(p));
  std::mt19937_64 rng(5);
  const Vec x0{10, 20, 5, 8};
  for (int trial = 0; trial < 5; ++trial) {
    const auto u = bang_bang(rng, p.u_sharp, 20, 0.5);
    const auto r = compare_controlled(cs.system, cs.cone, cs.reduction, x0, x0, u, 0.05, 0.0);
    CHECK(r.passed());
    // same statement through the uncontrolled pair g = f(., u(t)), h = f♯
    const auto sharp = reduced_dynamics(cs.system, cs.reduction);
    const auto r2 = compare_flows(cs.system, sharp, cs.cone, x0, x0, u, 0.05, 0.0);
    CHECK(r2.passed());
    CHECK(r2.max_defect == Catch::Approx(r.max_defect).margin(1e-12));
  }
}

TEST_CASE("identity reduction from equal states gives identical flows", "[comparison]") {
  const auto p = default_preset();
  const auto cs = build_case_study(p, default_thresholds(p));
  std::mt19937_64 rng(8);
  const auto u = bang_bang(rng, p.u_sharp, 10, 0.5);
  const auto r = compare_controlled(cs.system, cs.cone, Reduction::identity(), Vec{3, 4, 5, 6},
                                    Vec{3, 4, 5, 6}, u, 0.05, 0.0);
  CHECK(r.max_defect == 0.0);
  CHECK(r.passed());
}

TEST_CASE("wrong cone is caught (negative control)", "[comparison][wolbachia]") {
  const auto p = default_preset();
  const auto cs = build_case_study(p, default_thresholds(p));
  const auto wrong = ConvexCone::orthant({1, 1, 1, 1});
  // Lower U for the second state is ⪯ for the true cone but not for R⁴₊.
  const Vec x0{20, 40, 1, 1};
  const Vec y0{20, 40, 1, 1};
  const auto u = ControlPath::constant({0.0}, 1.0, 10);
  const auto r = compare_controlled(cs.system, wrong, cs.reduction, x0, y0, u, 0.05, 0.0);
  CHECK_FALSE(r.passed());
  CHECK(r.max_defect > 1e-3);
  std::ostringstream os;
  r.write_text(os);
  CHECK(os.str().find("verdict = FAIL") != std::string::npos);
}

TEST_CASE("defect under cone widening", "[comparison]") {
  // K1 = R²₊ ⊆ K2 = {x2 >= 0}: same dual generator family minus one.
  const auto k1 = ConvexCone::orthant({1, 1});
  const auto k2 = ConvexCone::polyhedral({{0, 1}}, {{1, 0}, {-1, 0}, {0, 1}});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    const Vec v{d(rng), d(rng)};
    REQUIRE(k2.defect(v) <= k1.defect(v));
  }
}

TEST_CASE("halving dt keeps the comparison passing", "[comparison]") {
  const auto sys = exchange();
  const auto k = ConvexCone::orthant({1, 1});
  const auto path = ControlPath::constant({0}, 0.5, 4);
  const auto a = compare_flows(sys, sys, k, Vec{0, 0}, Vec{1, 0.5}, path, 0.05, 0.0);
  const auto b = compare_flows(sys, sys, k, Vec{0, 0}, Vec{1, 0.5}, path, 0.025, 0.0);
  CHECK(a.passed());
  CHECK(b.max_defect <= a.max_defect + b.traj_tol);
}

TEST_CASE("epsilon diagnostic", "[comparison]") {
  SECTION("scalar decay: gap is linear in eps") {
    const auto diag = epsilon_diagnostic(decay(), ConvexCone::orthant({1}), Vec{1},
                                         {0.1, 0.01, 0.001}, Vec{1},
                                         ControlPath::constant({0}, 1.0, 1), 1e-3, 0.0);
    REQUIRE(diag.sup_gap.size() == 3);
    CHECK(diag.gaps_nonincreasing);
    // x_ε(t) - x(t) = ε e^{-t} + ε (1 - e^{-t}) = ε
    for (std::size_t i = 0; i < 3; ++i) CHECK(diag.sup_gap[i] == Catch::Approx(diag.eps[i]).epsilon(1e-6));
    for (bool s : diag.strictly_ordered) CHECK(s);
  }
  SECTION("eps = 0 reproduces the base trajectory") {
    const auto diag = epsilon_diagnostic(decay(), ConvexCone::orthant({1}), Vec{1}, {0.0}, Vec{2},
                                         ControlPath::constant({0}, 1.0, 1), 0.01, 0.0);
    CHECK(diag.sup_gap[0] == 0.0);
    CHECK_FALSE(diag.strictly_ordered[0]);
  }
  SECTION("wolbachia: perturbed flows are strictly above") {
    const auto p = default_preset();
    const auto cs = build_case_study(p, default_thresholds(p));
    const auto sharp = reduced_dynamics(cs.system, cs.reduction);
    const auto diag = epsilon_diagnostic(sharp, cs.cone, Vec{-1, -1, 1, 1}, {1e-1, 1e-2},
                                         Vec{10, 20, 5, 8}, ControlPath::constant({p.u_sharp}, 0.5, 4),
                                         0.05, 0.0);
    CHECK(diag.strictly_ordered[0]);
    CHECK(diag.strictly_ordered[1]);
    CHECK(diag.gaps_nonincreasing);
  }
  SECTION("v outside the interior is rejected") {
    CHECK_THROWS_AS(epsilon_diagnostic(decay(), ConvexCone::orthant({1}), Vec{-1}, {0.1}, Vec{1},
                                       ControlPath::constant({0}, 1.0, 1), 0.1, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(epsilon_diagnostic(decay(), ConvexCone::orthant({1}), Vec{1}, {0.01, 0.1},
                                       Vec{1}, ControlPath::constant({0}, 1.0, 1), 0.1, 0.0),
                    std::invalid_argument);
  }
}
