#include <doctest.h>

#include "frechet.hpp"
#include "oracles.hpp"
#include "sim.hpp"

using namespace parampc;

namespace {

frechet::ParametricQpCost msd_cost(int truncation = 1, double q_scale = 1000.0,
                                   double r_scale = 1e-4) {
  const ParametricModel model = build_msd(MsdParams{});
  const int horizon = 4;
  const CondensedSystem cond = condense_model(model, horizon);
  CostWeights w;
  w.q_scale = q_scale;
  w.r_scale = r_scale;
  return frechet::build_parametric_cost(cond, stacked_state_weight(model, w, horizon),
                                        stacked_input_weight(model, w, horizon), truncation);
}

Matrix exact_hessian(const ParametricModel& model, double theta, int horizon,
                     const CostWeights& w) {
  const CondensedSystem cond = condense_exact(model.eval_a(theta), model.b, model.e, horizon);
  const Matrix q_bar = stacked_state_weight(model, w, horizon);
  const Matrix r_bar = stacked_input_weight(model, w, horizon);
  return 2.0 * (cond.s_u.transpose() * q_bar * cond.s_u + r_bar);
}

}  // namespace

TEST_CASE("zero delta zeroes the expansion terms") {
  ParametricModel model = build_msd(MsdParams{});
  model.a = ParametricMatrix(model.a.base, {Matrix::Zero(2, 2)});
  const CondensedSystem cond = condense_model(model, 4);
  CostWeights w;
  const auto cost = frechet::build_parametric_cost(
      cond, stacked_state_weight(model, w, 4), stacked_input_weight(model, w, 4), 2);
  CHECK(cost.dh.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(cost.dh2.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((cost.h_of(0.7) - cost.h0).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("second-order truncation reassembles the first-order matrices exactly") {
  const ParametricModel model = build_msd(MsdParams{});
  const int horizon = 4;
  const CondensedSystem cond = condense_model(model, horizon);
  CostWeights w;
  w.q_scale = 1000.0;
  w.r_scale = 1e-4;
  const Matrix q_bar = stacked_state_weight(model, w, horizon);
  const Matrix r_bar = stacked_input_weight(model, w, horizon);
  const auto cost = frechet::build_parametric_cost(cond, q_bar, r_bar, 2);

  for (double theta : {0.0, 0.3, 1.0}) {
    const Matrix s_u = cond.s_u + theta * cond.delta_s_u[0];
    const Matrix direct = 2.0 * (s_u.transpose() * q_bar * s_u + r_bar);
    CHECK((cost.h_of(theta) - direct).lpNorm<Eigen::Infinity>() <
          1e-12 * direct.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("expansion is exact for the msd at horizon 4") {
  // delta_a is nilpotent and delta_a * b = 0, so powers up to 3 are affine
  // in theta and the truncated cost has no remainder at all.
  const ParametricModel model = build_msd(MsdParams{});
  CostWeights w;
  w.q_scale = 1000.0;
  w.r_scale = 1e-4;
  const auto cost = msd_cost(2);
  for (double theta : {0.3, 1.0}) {
    const Matrix exact = exact_hessian(model, theta, 4, w);
    CHECK((cost.h_of(theta) - exact).norm() / exact.norm() < 1e-14);
  }
}

TEST_CASE("hessian expansion error shrinks quadratically on the hex") {
  const ParametricModel model = build_hex(HexParams{});
  CostWeights w;
  w.q_scale = 100.0;
  w.r_scale = 1e-3;
  const int horizon = 4;
  const CondensedSystem cond = condense_model(model, horizon);
  const auto cost = frechet::build_parametric_cost(
      cond, stacked_state_weight(model, w, horizon), stacked_input_weight(model, w, horizon),
      2);
  auto rel_err = [&](double theta) {
    const Matrix exact = exact_hessian(model, theta, horizon, w);
    return (cost.h_of(theta) - exact).norm() / exact.norm();
  };
  const double e1 = rel_err(0.3);
  const double e2 = rel_err(0.15);
  CHECK(e1 < 0.05);
  CHECK(e1 / e2 > 3.0);  // second-order remainder in the matrices themselves
  CHECK(e1 / e2 < 5.0);
}

TEST_CASE("approx_inverse") {
  SUBCASE("theta zero recovers the exact inverse") {
    std::mt19937_64 rng(51);
    Matrix base = oracles::random_matrix(rng, 5, 5);
    Matrix h0 = base.transpose() * base + Matrix::Identity(5, 5);
    const auto inv = frechet::approx_inverse(h0, oracles::random_matrix(rng, 5, 5), 0.0);
    CHECK((h0 * inv.m - Matrix::Identity(5, 5)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(inv.growth == 0.0);
    CHECK(inv.reliable);
  }
  SUBCASE("scalar expansion value") {
    Matrix h0(1, 1), dh(1, 1);
    h0 << 2.0;
    dh << 1.0;
    const auto inv = frechet::approx_inverse(h0, dh, 0.1);
    CHECK(inv.m(0, 0) == doctest::Approx(0.475).epsilon(1e-14));
    CHECK(std::abs(inv.m(0, 0) - 1.0 / 2.1) == doctest::Approx(1.19e-3).epsilon(0.01));
  }
  SUBCASE("error scales quadratically in theta") {
    std::mt19937_64 rng(52);
    Matrix base = oracles::random_matrix(rng, 6, 6);
    Matrix h0 = base.transpose() * base + 2.0 * Matrix::Identity(6, 6);
    Matrix dh = oracles::random_matrix(rng, 6, 6);
    dh = 0.5 * (dh + dh.transpose());
    auto err = [&](double theta) {
      const Matrix exact = (h0 + theta * dh).inverse();
      return (frechet::approx_inverse(h0, dh, theta).m - exact).norm();
    };
    const double e1 = err(0.2), e2 = err(0.1), e3 = err(0.05);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.25));
  }
  SUBCASE("neumann bound holds") {
    std::mt19937_64 rng(53);
    Matrix base = oracles::random_matrix(rng, 5, 5);
    Matrix h0 = base.transpose() * base + 2.0 * Matrix::Identity(5, 5);
    Matrix dh = oracles::random_matrix(rng, 5, 5);
    dh = 0.5 * (dh + dh.transpose());
    for (double theta : {0.05, 0.1, 0.2}) {
      const auto inv = frechet::approx_inverse(h0, dh, theta);
      if (inv.growth >= 1.0) continue;
      const Matrix exact = (h0 + theta * dh).inverse();
      const double h0inv_norm =
          Eigen::JacobiSVD<Matrix>(Matrix(h0.inverse())).singularValues()(0);
      const double bound = inv.growth * inv.growth * h0inv_norm / (1.0 - inv.growth);
      const double err = Eigen::JacobiSVD<Matrix>(Matrix(inv.m - exact)).singularValues()(0);
      CHECK(err <= bound * (1.0 + 1e-9));
    }
  }
  SUBCASE("singular h0 throws") {
    CHECK_THROWS(frechet::approx_inverse(Matrix::Zero(2, 2), Matrix::Zero(2, 2), 0.1));
  }
}

TEST_CASE("explicit unconstrained optimizer") {
  const auto cost = msd_cost(1);
  const ParametricModel model = build_msd(MsdParams{});
  const Vector x_ref = Vector::Zero(4 * 2);
  const Vector d(0);

  SUBCASE("theta zero gives the nominal newton step") {
    Vector x0(2);
    x0 << 0.002, 0.0;
    const Vector u = frechet::explicit_optimizer_unconstrained(cost, x0, 0.0, x_ref, d);
    const Vector w = cost.stack_w(x0, x_ref, d);
    const Vector expected = -cost.h0.llt().solve(cost.f0_map * w);
    CHECK((u - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("matches the constrained solve when nothing is active") {
    // The solver evaluates -M(theta) f(theta), which carries a second-order
    // cross term; agreement at 1e-8 holds in the joint small-(theta, x0)
    // regime where that term is negligible.
    Vector x0(2);
    x0 << 1e-9, 0.0;
    for (double theta : {0.1, 0.3}) {
      const Vector u = frechet::explicit_optimizer_unconstrained(cost, x0, theta, x_ref, d);
      frechet::ControllerState state;
      const auto sol = frechet::solve_method2(cost, model, x0, theta, Matrix::Zero(4, 1),
                                              state, frechet::Variant::inverse_approx);
      CHECK((u - sol.u_seq).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
  SUBCASE("first-order expansion against brute force in theta") {
    Vector x0(2);
    x0 << 0.001, 0.0;
    auto exact_u = [&](double theta) {
      const Matrix h = cost.h0 + theta * cost.dh;
      const Vector f = cost.f_of(theta, cost.stack_w(x0, x_ref, d));
      return Vector(-h.llt().solve(f));
    };
    auto err = [&](double theta) {
      const Vector approx =
          frechet::explicit_optimizer_unconstrained(cost, x0, theta, x_ref, d);
      return (approx - exact_u(theta)).lpNorm<Eigen::Infinity>();
    };
    CHECK(err(0.0) < 1e-15);
    const double e1 = err(0.2), e2 = err(0.1);
    CHECK(e1 / e2 > 3.0);
    CHECK(e1 / e2 < 5.0);
  }
}

TEST_CASE("both variants reduce to the nominal solve at theta = 0") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto cost = msd_cost(1);
  sim::ControllerOptions copts;
  copts.horizon = 4;
  copts.weights.q_scale = 1000.0;
  copts.weights.r_scale = 1e-4;
  auto exact = sim::make_exact_controller(model, Vector::Zero(1), copts);

  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 8; ++trial) {
    Vector x0(2);
    x0 << 0.1 * oracles::random_vector(rng, 1)(0), 0.5 * oracles::random_vector(rng, 1)(0);
    Matrix ref(4, 1);
    ref.setConstant(0.05 * oracles::random_vector(rng, 1)(0));
    const Vector u_exact = exact->step(x0, ref).u;

    frechet::ControllerState s1, s2;
    const auto direct =
        frechet::solve_method2(cost, model, x0, 0.0, ref, s1, frechet::Variant::direct);
    const auto inv = frechet::solve_method2(cost, model, x0, 0.0, ref, s2,
                                            frechet::Variant::inverse_approx);
    CHECK((direct.u0 - u_exact).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((inv.u0 - u_exact).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("direct variant error shrinks quadratically in theta") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto cost = msd_cost(1);
  sim::ControllerOptions copts;
  copts.horizon = 4;
  copts.weights.q_scale = 1000.0;
  copts.weights.r_scale = 1e-4;

  Vector x0(2);
  x0 << 0.001, 0.0;  // unconstrained regime
  const Matrix ref = Matrix::Zero(4, 1);
  auto err = [&](double theta) {
    Vector th(1);
    th << theta;
    auto exact = sim::make_exact_controller(model, th, copts);
    const Vector u_exact = exact->step(x0, ref).u;
    frechet::ControllerState state;
    const auto sol =
        frechet::solve_method2(cost, model, x0, theta, ref, state, frechet::Variant::direct);
    return (sol.u0 - u_exact).lpNorm<Eigen::Infinity>();
  };
  const double e1 = err(0.4), e2 = err(0.2), e3 = err(0.1);
  CHECK(e1 / e2 > 3.0);
  CHECK(e2 / e3 > 3.0);
}

TEST_CASE("fallback replays the previous input") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto cost = msd_cost(1);
  const Matrix ref = Matrix::Zero(4, 1);
  Vector x0(2);
  x0 << 0.05, 0.0;

  for (auto variant : {frechet::Variant::direct, frechet::Variant::inverse_approx}) {
    frechet::ControllerState state;
    const auto first = frechet::solve_method2(cost, model, x0, 0.5, ref, state, variant);
    CHECK_FALSE(first.used_fallback);
    CHECK(state.fallback_count == 0);

    frechet::Method2Options opts;
    opts.inject_infeasible = true;
    Vector x1(2);
    x1 << 0.04, -0.01;
    const auto second = frechet::solve_method2(cost, model, x1, 0.5, ref, state, variant, opts);
    CHECK(second.used_fallback);
    CHECK(state.fallback_count == 1);
    CHECK((second.u0 - first.u0).lpNorm<Eigen::Infinity>() == 0.0);  // exact replay
  }
}

TEST_CASE("failure with no previous solution is fatal") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto cost = msd_cost(1);
  frechet::ControllerState state;
  frechet::Method2Options opts;
  opts.inject_infeasible = true;
  Vector x0(2);
  x0 << 0.05, 0.0;
  CHECK_THROWS_AS(frechet::solve_method2(cost, model, x0, 0.5, Matrix::Zero(4, 1), state,
                                         frechet::Variant::direct, opts),
                  std::runtime_error);
}

TEST_CASE("constant term expansion matches direct evaluation at theta 0") {
  const ParametricModel model = build_hex(HexParams{});
  const int horizon = 4;
  const CondensedSystem cond = condense_model(model, horizon);
  CostWeights w;
  w.q_scale = 100.0;
  w.r_scale = 1e-3;
  const Matrix q_bar = stacked_state_weight(model, w, horizon);
  const auto cost = frechet::build_parametric_cost(cond, q_bar,
                                                   stacked_input_weight(model, w, horizon), 2);
  Vector x0(2);
  x0 << 60.0, 30.0;
  Matrix ref(horizon, 1);
  ref.setConstant(40.0);
  const Vector x_ref = stacked_reference(model, ref);
  const Vector w_vec = cost.stack_w(x0, x_ref, model.d_const);
  const Vector t = cond.s_x * x0 + cond.s_d * model.d_const - x_ref;
  CHECK(cost.c_of(0.0, w_vec) == doctest::Approx(t.dot(q_bar * t)).epsilon(1e-12));
}
