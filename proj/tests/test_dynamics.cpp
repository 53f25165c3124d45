#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "viakernel/dynamics.hpp"
#include "viakernel/wolbachia.hpp"

using namespace viakernel;

namespace {

ControlledSystem linear2(Matrix A) {
  ControlledSystem s;
  s.name = "linear";
  s.n = 2;
  s.m = 1;
  s.f = [A](VecView x, VecView, std::span<double> dx) {
    const Vec y = A.apply(x);
    dx[0] = y[0];
    dx[1] = y[1];
  };
  s.controls = ControlSet::box({-1}, {1});
  s.state_domain = nullptr;
  return s;
}

ControlledSystem from_fn(std::size_t n, DynamicsFn f) {
  ControlledSystem s;
  s.n = n;
  s.m = 1;
  s.f = std::move(f);
  s.controls = ControlSet::box({0}, {1});
  s.state_domain = nullptr;
  return s;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

SamplingPlan unit_plan(std::size_t n, std::size_t count = 500) {
  return SamplingPlan{Box{Vec(n, 0.1), Vec(n, 2.0)}, Box{}, count, 42};
}

}  // namespace

TEST_CASE("jacobian of a linear map", "[dynamics]") {
  const auto A = mat2(-1, 1, 1, -1);
  const auto sys = linear2(A);
  const Matrix J = jacobian_fd(sys, Vec{0.3, -0.7}, Vec{0.0});
  CHECK(J.max_abs_diff(A) <= 1e-8);
}

TEST_CASE("jacobian of a polynomial", "[dynamics]") {
  const auto sys = from_fn(2, [](VecView x, VecView, std::span<double> dx) {
    dx[0] = x[1] * x[1];
    dx[1] = 0.0;
  });
  const Matrix J = jacobian_fd(sys, Vec{0, 1}, Vec{0.0});
  CHECK(J.max_abs_diff(mat2(0, 2, 0, 0)) <= 1e-6);
}

TEST_CASE("jacobian error is second order", "[dynamics]") {
  const auto sys = from_fn(2, [](VecView x, VecView, std::span<double> dx) {
    dx[0] = x[0] * x[0] * x[1] + std::pow(x[1], 3);
    dx[1] = std::pow(x[0], 4);
  });
  const Vec x{0.7, 1.3};
  Matrix exact(2, 2);
  exact(0, 0) = 2 * x[0] * x[1];
  exact(0, 1) = x[0] * x[0] + 3 * x[1] * x[1];
  exact(1, 0) = 4 * std::pow(x[0], 3);
  exact(1, 1) = 0;
  const double e1 = jacobian_fd(sys, x, Vec{0.0}, 1e-3).max_abs_diff(exact);
  const double e2 = jacobian_fd(sys, x, Vec{0.0}, 1e-4).max_abs_diff(exact);
  CHECK(e1 < 1e-5);
  CHECK(e2 < e1 / 50.0);
}

TEST_CASE("jacobian reports the failing coordinate", "[dynamics]") {
  auto sys = from_fn(2, [](VecView x, VecView, std::span<double> dx) {
    if (x[1] > 1.0) throw std::runtime_error("out of model range");
    dx[0] = x[0];
    dx[1] = x[1];
  });
  try {
    jacobian_fd(sys, Vec{0.5, 1.0}, Vec{0.0}, 1e-3);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.coordinate() == 1);
  }
  CHECK_THROWS_AS(jacobian_fd(sys, Vec{0.5, 0.5}, Vec{0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("jacobian is one-sided at the domain edge", "[dynamics]") {
  const auto sys = wolbachia_system(default_preset());
  const Matrix J = jacobian_fd(sys, Vec{0.0, 3.0, 0.0, 2.0}, Vec{1.0});
  CHECK(std::isfinite(J(0, 0)));
}

TEST_CASE("wolbachia jacobian signs at an interior point", "[dynamics][wolbachia]") {
  const auto p = default_preset();
  const auto sys = wolbachia_system(p);
  const Matrix J = jacobian_fd(sys, Vec{3.0, 7.0, 5.0, 9.0}, Vec{0.5});
  // (a) L_U row
  CHECK(J(0, 1) >= 0);
  CHECK(J(0, 2) <= 0);
  CHECK(J(0, 3) <= 0);
  // (b) A_U row
  CHECK(J(1, 0) >= 0);
  CHECK(J(1, 2) <= 0);
  CHECK(J(1, 3) <= 0);
  // (c) L_W row
  CHECK(J(2, 3) >= 0);
  CHECK(J(2, 0) <= 0);
  CHECK(J(2, 1) <= 0);
  // (d) A_W row
  CHECK(J(3, 2) >= 0);
  CHECK(J(3, 0) <= 0);
  CHECK(J(3, 1) <= 0);
}

TEST_CASE("orthant quasimonotonicity", "[dynamics]") {
  SECTION("metzler matrix is cooperative") {
    const auto r = check_orthant_quasimonotone(linear2(mat2(-2, 0.5, 0.3, -1)),
                                               ConvexCone::orthant({1, 1}), unit_plan(2));
    CHECK(r.passed());
    CHECK(r.checked == 500);
  }
  SECTION("negative off-diagonal fails with witness") {
    const auto sys = from_fn(2, [](VecView x, VecView, std::span<double> dx) {
      dx[0] = -x[1];
      dx[1] = 0.0;
    });
    const auto r = check_orthant_quasimonotone(sys, ConvexCone::orthant({1, 1}), unit_plan(2));
    CHECK_FALSE(r.passed());
    REQUIRE(r.worst);
    CHECK(r.worst->i == 0);
    CHECK(r.worst->j == 1);
    CHECK(r.worst->value == Catch::Approx(-1.0));
  }
  SECTION("wolbachia with its cone") {
    const auto sys = wolbachia_system(default_preset());
    SamplingPlan plan{Box{Vec(4, 0.0), {30, 60, 20, 40}}, Box{}, 10000, 1};
    CHECK(check_orthant_quasimonotone(sys, ConvexCone::orthant({-1, -1, 1, 1}), plan).passed());
    CHECK_FALSE(check_orthant_quasimonotone(sys, ConvexCone::orthant({1, 1, 1, 1}), plan).passed());
  }
  SECTION("rejects non-orthant cones") {
    const auto wedge = ConvexCone::polyhedral({{0, 1}, {1, -1}}, {{1, 0}, {1, 1}});
    CHECK_THROWS_AS(check_orthant_quasimonotone(linear2(mat2(0, 0, 0, 0)), wedge, unit_plan(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("general quasimonotonicity", "[dynamics]") {
  const auto pos = ConvexCone::orthant({1, 1});
  SECTION("constant field passes for any cone") {
    const auto sys = from_fn(2, [](VecView, VecView, std::span<double> dx) {
      dx[0] = 3.0;
      dx[1] = -1.0;
    });
    CHECK(check_general_quasimonotone(sys, pos, unit_plan(2)).passed());
    const auto wedge = ConvexCone::polyhedral({{0, 1}, {1, -1}}, {{1, 0}, {1, 1}});
    CHECK(check_general_quasimonotone(sys, wedge, unit_plan(2)).passed());
  }
  SECTION("negative coupling fails on the face of y = e1") {
    const auto sys = from_fn(2, [](VecView x, VecView, std::span<double> dx) {
      dx[0] = -x[1];
      dx[1] = 0.0;
    });
    const auto r = check_general_quasimonotone(sys, pos, unit_plan(2));
    CHECK_FALSE(r.passed());
    REQUIRE(r.worst);
    CHECK(r.worst->i == 0);
  }
  SECTION("linear map on a wedge: A K-quasimonotone iff face conditions hold") {
    // K = cone((1,0),(1,1)). A = I keeps every face: passes.
    const auto wedge = ConvexCone::polyhedral({{0, 1}, {1, -1}}, {{1, 0}, {1, 1}});
    CHECK(check_general_quasimonotone(linear2(mat2(1, 0, 0, 1)), wedge, unit_plan(2)).passed());
    // y = (0,1), face direction (1,0): <A(1,0), y> = A(1,0) must be >= 0.
    CHECK_FALSE(
        check_general_quasimonotone(linear2(mat2(0, 0, -1, 0)), wedge, unit_plan(2)).passed());
  }
  SECTION("cone dimension mismatch is an error") {
    const auto sys = linear2(mat2(0, 0, 0, 0));
    CHECK_THROWS_AS(check_general_quasimonotone(sys, ConvexCone::orthant({1, 1, 1}), unit_plan(2)),
                    std::invalid_argument);
  }
}

TEST_CASE("reduction check", "[dynamics]") {
  const auto p = default_preset();
  const auto sys = wolbachia_system(p);
  const auto k = ConvexCone::orthant({-1, -1, 1, 1});
  SamplingPlan plan{Box{Vec(4, 0.0), {30, 60, 20, 40}}, Box{}, 2000, 5};
  CHECK(check_reduction(sys, k, Reduction::constant({p.u_sharp}), plan).passed());
  CHECK(check_reduction(sys, k, Reduction::identity(), plan).passed());
  const auto zero = check_reduction(sys, k, Reduction::constant({0.0}), plan);
  CHECK_FALSE(zero.passed());
  CHECK(zero.failed == zero.checked);  // u > 0 almost surely
  CHECK_THROWS_AS(check_reduction(sys, k, Reduction::constant({p.u_sharp + 1}), plan),
                  std::domain_error);
}

TEST_CASE("checks are deterministic across thread counts", "[dynamics]") {
  const auto sys = wolbachia_system(default_preset());
  SamplingPlan plan{Box{Vec(4, 0.0), {30, 60, 20, 40}}, Box{}, 3000, 9};
  CheckOptions one, four;
  four.threads = 4;
  const auto k = ConvexCone::orthant({1, 1, 1, 1});
  const auto a = check_orthant_quasimonotone(sys, k, plan, one);
  const auto b = check_orthant_quasimonotone(sys, k, plan, four);
  CHECK(a.failed == b.failed);
  REQUIRE(a.worst);
  REQUIRE(b.worst);
  CHECK(a.worst->sample == b.worst->sample);
  CHECK(a.worst->value == b.worst->value);
}

TEST_CASE("lipschitz estimate is finite", "[dynamics]") {
  const auto sys = linear2(mat2(-1, 2, 0, -1));
  const double L = estimate_lipschitz(sys, unit_plan(2, 200));
  CHECK(L > 0.5);
  CHECK(L <= 2.5);
}

TEST_CASE("control sets", "[dynamics]") {
  const auto box = ControlSet::box({0}, {2});
  CHECK(box.contains(Vec{1.0}));
  CHECK_FALSE(box.contains(Vec{2.5}));
  const auto fin = ControlSet::finite({{0}, {1}});
  CHECK(fin.contains(Vec{1.0}));
  CHECK_FALSE(fin.contains(Vec{0.5}));
  CHECK_THROWS_AS(ControlSet::finite({}), std::invalid_argument);
}
