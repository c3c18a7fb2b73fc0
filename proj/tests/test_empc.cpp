#include <doctest.h>

#include "condense.hpp"
#include "cost.hpp"
#include "empc.hpp"
#include "model.hpp"
#include "oracles.hpp"

using namespace parampc;

namespace {

// min 1/2 u^2 - x u  s.t. -1 <= u <= 1, parameter x in [-3, 3].
// Hand KKT analysis: u = -1 for x <= -1, u = x in between, u = 1 for x >= 1.
empc::MpQp clipped_integrator() {
  empc::MpQp p;
  p.h = Matrix::Identity(1, 1);
  p.f_map = Matrix::Constant(1, 1, -1.0);
  p.f0 = Vector::Zero(1);
  p.g = Matrix(2, 1);
  p.g << 1.0, -1.0;
  p.b = Vector::Ones(2);
  p.e_mat = Matrix::Zero(2, 1);
  p.param_box = {{-3.0, 3.0}};
  return p;
}

// Nominal condensed MPC for the msd at theta = 0 with input-box rows only,
// parameterized by the initial state.
empc::MpQp msd_nominal_mpqp(int horizon) {
  const ParametricModel model = build_msd(MsdParams{});
  const CondensedSystem cond = condense_model(model, horizon);
  CostWeights w;
  w.q_scale = 1000.0;
  w.r_scale = 1e-4;
  const Matrix q_bar = stacked_state_weight(model, w, horizon);
  const Matrix r_bar = stacked_input_weight(model, w, horizon);

  empc::MpQp p;
  p.h = 2.0 * (cond.s_u.transpose() * q_bar * cond.s_u + r_bar);
  p.f_map = 2.0 * cond.s_u.transpose() * q_bar * cond.s_x;
  p.f0 = Vector::Zero(horizon);
  Matrix g;
  Vector rhs;
  input_box_rows(model, horizon, &g, &rhs);
  p.g = g;
  p.b = rhs;
  p.e_mat = Matrix::Zero(g.rows(), 2);
  p.param_box = model.state_box;
  return p;
}

double splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<double>((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
}

}  // namespace

TEST_CASE("chebyshev center of a box") {
  Matrix a(4, 2);
  a << 1, 0, -1, 0, 0, 1, 0, -1;
  Vector b(4);
  b << 2, 0, 1, 1;  // x in [0,2], y in [-1,1]
  const auto res = empc::chebyshev_center(a, b, Vector::Zero(2));
  REQUIRE(res.ok);
  CHECK(res.center(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.radius == doctest::Approx(1.0).epsilon(1e-4));

  // Empty polyhedron reports a negative radius.
  Vector b_empty(4);
  b_empty << -1.0, -0.5, 1, 1;  // x <= -1 and x >= 0.5
  const auto empty = empc::chebyshev_center(a, b_empty, Vector::Zero(2));
  REQUIRE(empty.ok);
  CHECK(empty.radius < 0.0);
}

TEST_CASE("unconstrained mpqp yields a single region covering the box") {
  empc::MpQp p;
  std::mt19937_64 rng(61);
  Matrix base = oracles::random_matrix(rng, 3, 3);
  p.h = base.transpose() * base + Matrix::Identity(3, 3);
  p.f_map = oracles::random_matrix(rng, 3, 2);
  p.f0 = oracles::random_vector(rng, 3);
  p.g = Matrix(0, 3);
  p.b = Vector(0);
  p.e_mat = Matrix(0, 2);
  p.param_box = {{-1.0, 1.0}, {-2.0, 2.0}};

  const empc::PwaLaw law = empc::enumerate_regions(p);
  REQUIRE(law.regions.size() == 1);
  CHECK(law.complete);
  const Matrix expected_gain = -p.h.llt().solve(p.f_map);
  CHECK((law.regions[0].gain - expected_gain).lpNorm<Eigen::Infinity>() < 1e-10);

  const auto cov = empc::coverage_report(law, 200, 42);
  CHECK(cov.hit_fraction == 1.0);
}

TEST_CASE("clipped integrator has exactly three regions") {
  const empc::MpQp p = clipped_integrator();
  const empc::PwaLaw law = empc::enumerate_regions(p);
  REQUIRE(law.regions.size() == 3);
  CHECK(law.complete);

  // Saturated low, interior, saturated high.
  for (int s = 0; s < 1000; ++s) {
    const double x = -3.0 + 6.0 * (s / 999.0);
    Vector xi(1);
    xi << x;
    const auto loc = empc::point_locate(law, xi);
    REQUIRE(loc.region_index >= 0);
    const double expected = std::min(1.0, std::max(-1.0, x));
    CHECK(loc.z(0) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("msd nominal law matches the online solver") {
  const int horizon = 4;
  const empc::MpQp p = msd_nominal_mpqp(horizon);
  const empc::PwaLaw law = empc::enumerate_regions(p);
  CHECK(law.complete);
  CHECK(law.regions.size() >= 3);

  std::uint64_t state = 99;
  int located = 0;
  for (int s = 0; s < 1000; ++s) {
    Vector xi(2);
    xi << -0.1 + 0.2 * splitmix(state), -0.5 + 1.0 * splitmix(state);
    const auto loc = empc::point_locate(law, xi);
    const qp::QpSolution online = qp::solve(p.at(xi));
    REQUIRE(online.status == qp::Status::optimal);
    if (loc.region_index >= 0) {
      ++located;
      CHECK((loc.z - online.z).lpNorm<Eigen::Infinity>() < 1e-6);
    }
  }
  CHECK(located >= 990);  // input-box-only problem is feasible everywhere

  const auto cov = empc::coverage_report(law, 1000, 42);
  CHECK(cov.miss_fraction <= 0.01);
  CHECK(cov.infeasible_fraction == 0.0);
}

TEST_CASE("pwa law is continuous along segments crossing facets") {
  const empc::MpQp p = msd_nominal_mpqp(4);
  const empc::PwaLaw law = empc::enumerate_regions(p);

  double gain_bound = 0.0;
  for (const auto& reg : law.regions) {
    gain_bound = std::max(gain_bound, reg.gain.lpNorm<Eigen::Infinity>());
  }

  std::uint64_t state = 123;
  const double step = 1e-3;
  for (int seg = 0; seg < 40; ++seg) {
    Vector a(2), b(2);
    a << -0.1 + 0.2 * splitmix(state), -0.5 + 1.0 * splitmix(state);
    b << -0.1 + 0.2 * splitmix(state), -0.5 + 1.0 * splitmix(state);
    Vector prev_z;
    int prev_region = -1;
    for (double t = 0.0; t <= 1.0; t += step) {
      const Vector xi = a + t * (b - a);
      const auto loc = empc::point_locate(law, xi);
      if (loc.region_index < 0) {
        prev_region = -1;
        continue;
      }
      if (prev_region >= 0 && prev_region != loc.region_index) {
        // Crossing a facet: the two affine laws must agree up to the step.
        const double dist = step * (b - a).norm();
        CHECK((loc.z - prev_z).lpNorm<Eigen::Infinity>() <=
              2.0 * gain_bound * dist + 1e-6);
      }
      prev_z = loc.z;
      prev_region = loc.region_index;
    }
  }
}

TEST_CASE("infeasible half of the box is classified") {
  // u >= 1 and u <= x: feasible only when x >= 1, i.e. half of [-1, 3].
  empc::MpQp p;
  p.h = Matrix::Identity(1, 1);
  p.f_map = Matrix::Zero(1, 1);
  p.f0 = Vector::Zero(1);
  p.g = Matrix(2, 1);
  p.g << -1.0, 1.0;
  p.b = Vector(2);
  p.b << -1.0, 0.0;
  p.e_mat = Matrix(2, 1);
  p.e_mat << 0.0, 1.0;
  p.param_box = {{-1.0, 3.0}};

  const empc::PwaLaw law = empc::enumerate_regions(p);
  CHECK(!law.regions.empty());
  const auto cov = empc::coverage_report(law, 4000, 42);
  CHECK(cov.infeasible_fraction == doctest::Approx(0.5).epsilon(0.06));
  CHECK(cov.hit_fraction == doctest::Approx(0.5).epsilon(0.06));
  CHECK(cov.miss_fraction < 0.01);
}

TEST_CASE("enumeration is deterministic") {
  const empc::MpQp p = msd_nominal_mpqp(4);
  const empc::PwaLaw a = empc::enumerate_regions(p);
  const empc::PwaLaw b = empc::enumerate_regions(p);
  REQUIRE(a.regions.size() == b.regions.size());
  for (size_t i = 0; i < a.regions.size(); ++i) {
    CHECK(a.regions[i].active_set == b.regions[i].active_set);
    CHECK((a.regions[i].gain - b.regions[i].gain).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK(a.unexplored_volume_estimate == b.unexplored_volume_estimate);
}

TEST_CASE("regions have consistent active sets at interior samples") {
  const empc::MpQp p = msd_nominal_mpqp(4);
  const empc::PwaLaw law = empc::enumerate_regions(p);
  std::uint64_t state = 5;

  for (const auto& reg : law.regions) {
    REQUIRE(reg.chebyshev_radius > 1e-9);
    for (int s = 0; s < 20; ++s) {
      // Sample within the inscribed ball.
      Vector dir(reg.chebyshev_center.size());
      for (int j = 0; j < dir.size(); ++j) dir(j) = 2.0 * splitmix(state) - 1.0;
      if (dir.norm() > 0) dir *= (splitmix(state) * reg.chebyshev_radius * 0.9) / dir.norm();
      const Vector xi = reg.chebyshev_center + dir;
      REQUIRE(reg.contains(xi, 1e-12));

      const qp::QpSolution online = qp::solve(p.at(xi));
      REQUIRE(online.status == qp::Status::optimal);
      CHECK((reg.evaluate(xi) - online.z).lpNorm<Eigen::Infinity>() < 1e-7);
    }
  }
}

TEST_CASE("region cap yields a partial law with the flag cleared") {
  const empc::MpQp p = msd_nominal_mpqp(4);
  empc::EnumerationOptions opts;
  opts.region_cap = 2;
  opts.coverage_samples = 0;
  const empc::PwaLaw law = empc::enumerate_regions(p, opts);
  CHECK(law.regions.size() <= 2);
  CHECK(!law.complete);
}
