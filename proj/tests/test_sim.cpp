#include <doctest.h>

#include "csv_io.hpp"
#include "oracles.hpp"
#include "sim.hpp"

#include <cstdio>
#include <fstream>

using namespace parampc;

namespace {

sim::ControllerOptions msd_options() {
  sim::ControllerOptions o;
  o.horizon = 4;
  o.weights.q_scale = 1000.0;
  o.weights.r_scale = 1e-4;
  return o;
}

sim::ControllerOptions hex_options() {
  sim::ControllerOptions o;
  o.horizon = 4;
  o.weights.q_scale = 100.0;
  o.weights.r_scale = 1e-3;
  return o;
}

}  // namespace

TEST_CASE("reference profile lookup and preview") {
  const auto ref = sim::ReferenceProfile::steps({{0.0, 1.0}, {2.0, -1.0}, {4.0, 3.0}});
  ref.validate(1);
  CHECK(ref.value_at(0.0)(0) == 1.0);
  CHECK(ref.value_at(1.99)(0) == 1.0);
  CHECK(ref.value_at(2.0)(0) == -1.0);
  CHECK(ref.value_at(100.0)(0) == 3.0);

  // Preview covers steps k+1 .. k+N.
  const Matrix w = ref.window(/*step=*/0, /*horizon=*/3, /*ts=*/1.0);
  CHECK(w(0, 0) == 1.0);   // t = 1
  CHECK(w(1, 0) == -1.0);  // t = 2
  CHECK(w(2, 0) == -1.0);  // t = 3
  const Matrix w2 = ref.window(/*step=*/1, /*horizon=*/3, /*ts=*/1.0);
  CHECK(w2(0, 0) == -1.0);  // t = 2
  CHECK(w2(2, 0) == 3.0);   // t = 4

  SUBCASE("validation errors") {
    auto bad = sim::ReferenceProfile::steps({{1.0, 0.0}});
    CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);
    auto unordered = sim::ReferenceProfile::steps({{0.0, 0.0}, {2.0, 1.0}, {2.0, 2.0}});
    CHECK_THROWS_AS(unordered.validate(1), std::invalid_argument);
  }
}

TEST_CASE("equilibrium stays at the origin for every controller") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto ref = sim::ReferenceProfile::steps({{0.0, 0.0}});
  const Vector x0 = Vector::Zero(2);
  Vector theta(1);
  theta << 0.5;

  const auto opts = msd_options();
  std::vector<std::unique_ptr<sim::Controller>> controllers;
  controllers.push_back(sim::make_exact_controller(model, theta, opts));
  controllers.push_back(sim::make_mccormick_controller(model, theta, opts));
  controllers.push_back(
      sim::make_expansion_controller(model, 0.5, opts, frechet::Variant::direct));
  controllers.push_back(
      sim::make_expansion_controller(model, 0.5, opts, frechet::Variant::inverse_approx));

  for (auto& c : controllers) {
    const auto trace = sim::run_closed_loop(model, *c, theta, x0, ref, 40);
    CHECK(trace.states.lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK(trace.inputs.lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK(trace.fallback_steps.empty());
  }
}

TEST_CASE("run_closed_loop validates its inputs") {
  const ParametricModel model = build_msd(MsdParams{});
  const auto ref = sim::ReferenceProfile::steps({{0.0, 0.0}});
  Vector theta(1);
  theta << 0.5;
  auto c = sim::make_exact_controller(model, theta, msd_options());

  Vector outside(2);
  outside << 0.5, 0.0;  // outside the displacement box
  CHECK_THROWS_AS(sim::run_closed_loop(model, *c, theta, outside, ref, 10),
                  std::invalid_argument);
  Vector bad_theta(1);
  bad_theta << 1.5;
  CHECK_THROWS_AS(sim::run_closed_loop(model, *c, bad_theta, Vector::Zero(2), ref, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(sim::run_closed_loop(model, *c, theta, Vector::Zero(2), ref, 0),
                  std::invalid_argument);
}

TEST_CASE("exact controller tracks an achievable msd step at theta = 1") {
  const ParametricModel model = build_msd(MsdParams{});
  Vector theta(1);
  theta << 1.0;
  auto c = sim::make_exact_controller(model, theta, msd_options());
  const auto ref = sim::ReferenceProfile::steps({{0.0, 0.008}});
  Vector x0(2);
  x0 << 0.008, 0.0;
  const auto trace = sim::run_closed_loop(model, *c, theta, x0, ref, 400);

  // No steady-state-error guarantee (no integral action); convergence to a
  // neighborhood of the reference is expected.
  CHECK(trace.outputs.lpNorm<Eigen::Infinity>() < 0.05);
  const int tail = 100;
  double mean_err = 0.0;
  for (int k = trace.length() - tail; k < trace.length(); ++k) {
    mean_err += std::abs(trace.outputs(k, 0) - trace.references(k, 0));
  }
  mean_err /= tail;
  CHECK(mean_err < 1e-3);
  // Inputs respect the box throughout.
  CHECK(trace.inputs.maxCoeff() <= 5.0 + 1e-7);
  CHECK(trace.inputs.minCoeff() >= -5.0 - 1e-7);
}

TEST_CASE("hex saturates below an unreachable reference") {
  const ParametricModel model = build_hex(HexParams{});
  Vector theta(1);
  theta << 1.0;
  auto c = sim::make_exact_controller(model, theta, hex_options());
  // Commanded drop to 40 degC is below the theta=1 achievable floor (~40.9).
  const auto ref = sim::ReferenceProfile::steps({{0.0, 43.0}, {400.0, 40.0}});
  Vector x0(2);
  x0 << 60.0, 30.0;
  const auto trace = sim::run_closed_loop(model, *c, theta, x0, ref, 120);

  // After the step the plant rides its input floor and stays above the target.
  double min_after = 1e9;
  for (int k = 0; k < trace.length(); ++k) {
    if (trace.times(k) >= 600.0) min_after = std::min(min_after, trace.outputs(k, 0));
  }
  CHECK(min_after > 40.5);
  CHECK(min_after < 42.0);
}

TEST_CASE("metrics") {
  sim::SimulationTrace a;
  a.times = Vector::LinSpaced(4, 0, 3);
  a.states = Matrix::Zero(4, 1);
  a.inputs = Matrix::Zero(4, 1);
  a.outputs = Matrix::Zero(4, 1);
  a.outputs << 0, 1, 2, 3;
  a.references = Matrix::Zero(4, 1);

  SUBCASE("identical traces give zero error") {
    const auto m = sim::compute_metrics(a, a);
    CHECK(m.rmse == 0.0);
    CHECK(m.maxae == 0.0);
    CHECK(m.nrmse == 0.0);
  }
  SUBCASE("constant offset") {
    sim::SimulationTrace b = a;
    b.outputs.array() += 0.5;
    const auto m = sim::compute_metrics(b, a);
    CHECK(m.rmse == doctest::Approx(0.5));
    CHECK(m.maxae == doctest::Approx(0.5));
    CHECK(m.nrmse == doctest::Approx(0.5 / 3.0));
    CHECK(m.maxae >= m.rmse);
  }
  SUBCASE("flat baseline is rejected") {
    sim::SimulationTrace flat = a;
    flat.outputs.setZero();
    CHECK_THROWS_AS(sim::compute_metrics(a, flat), std::invalid_argument);
  }
  SUBCASE("length mismatch is rejected") {
    sim::SimulationTrace shorter = a;
    shorter.times = Vector::Zero(3);
    shorter.states = Matrix::Zero(3, 1);
    shorter.inputs = Matrix::Zero(3, 1);
    shorter.outputs = Matrix::Zero(3, 1);
    shorter.references = Matrix::Zero(3, 1);
    CHECK_THROWS_AS(sim::compute_metrics(shorter, a), std::invalid_argument);
  }
}

TEST_CASE("total variation") {
  sim::SimulationTrace t;
  t.times = Vector::Zero(4);
  t.states = Matrix::Zero(4, 1);
  t.outputs = Matrix::Zero(4, 1);
  t.references = Matrix::Zero(4, 1);
  t.inputs = Matrix::Zero(4, 1);
  t.inputs << 0, 1, -1, 0;
  CHECK(sim::total_variation(t) == doctest::Approx(4.0));
}

TEST_CASE("fallback events land in the trace") {
  const ParametricModel model = build_msd(MsdParams{});
  sim::ControllerOptions opts = msd_options();
  opts.inject_infeasible_step = 5;
  auto c = sim::make_expansion_controller(model, 0.5, opts, frechet::Variant::direct);
  Vector theta(1);
  theta << 0.5;
  Vector x0(2);
  x0 << 0.05, 0.0;
  const auto ref = sim::ReferenceProfile::steps({{0.0, 0.02}});
  const auto trace = sim::run_closed_loop(model, *c, theta, x0, ref, 20);

  REQUIRE(trace.fallback_steps.size() == 1);
  CHECK(trace.fallback_steps[0] == 5);
  CHECK(c->fallback_count() == 1);
  // The fallback step replays the previous input exactly.
  CHECK(trace.inputs(5, 0) == trace.inputs(4, 0));
}

TEST_CASE("trace csv layout") {
  const ParametricModel model = build_msd(MsdParams{});
  Vector theta(1);
  theta << 0.0;
  auto c = sim::make_exact_controller(model, theta, msd_options());
  const auto ref = sim::ReferenceProfile::steps({{0.0, 0.01}});
  Vector x0(2);
  x0 << 0.01, 0.0;
  const auto trace = sim::run_closed_loop(model, *c, theta, x0, ref, 5);

  const std::string path = "/tmp/parampc_test_trace.csv";
  csvio::save_trace_csv(trace, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2,u1,y1,r1,fallback");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 5);
  std::remove(path.c_str());
}
