#include <doctest.h>

#include "json_io.hpp"
#include "model.hpp"
#include "oracles.hpp"

using namespace parampc;

TEST_CASE("eval at zero returns the base matrix") {
  std::mt19937_64 rng(7);
  const Matrix base = oracles::random_matrix(rng, 3, 3);
  const ParametricMatrix pm(base, {oracles::random_matrix(rng, 3, 3)});
  CHECK((pm.eval(0.0) - base).norm() == doctest::Approx(0.0));
}

TEST_CASE("affine evaluation, single delta") {
  Matrix delta(2, 2);
  delta << 0, 1, 0, 0;
  const ParametricMatrix pm(Matrix::Identity(2, 2), {delta});
  const Matrix a = pm.eval(0.5);
  CHECK(a(0, 0) == 1.0);
  CHECK(a(0, 1) == 0.5);
  CHECK(a(1, 0) == 0.0);
  CHECK(a(1, 1) == 1.0);
}

TEST_CASE("eval rejects mismatched theta size") {
  const ParametricMatrix pm(Matrix::Identity(2, 2), {Matrix::Zero(2, 2)});
  Vector theta(2);
  theta << 0.1, 0.2;
  CHECK_THROWS_AS(pm.eval(theta), std::invalid_argument);
}

TEST_CASE("affinity in theta") {
  std::mt19937_64 rng(11);
  ParametricMatrix pm(oracles::random_matrix(rng, 3, 3),
                      {oracles::random_matrix(rng, 3, 3), oracles::random_matrix(rng, 3, 3)});
  for (int trial = 0; trial < 20; ++trial) {
    const Vector t1 = oracles::random_vector(rng, 2);
    const Vector t2 = oracles::random_vector(rng, 2);
    const double lam = 0.5 * (oracles::random_vector(rng, 1)(0) + 1.0);
    const Matrix lhs = pm.eval(Vector(lam * t1 + (1 - lam) * t2));
    const Matrix rhs = lam * pm.eval(t1) + (1 - lam) * pm.eval(t2);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("decompose_from_endpoints") {
  SUBCASE("degenerate interval gives zero delta") {
    std::mt19937_64 rng(3);
    const Matrix m = oracles::random_matrix(rng, 2, 2);
    const ParametricMatrix pm = decompose_from_endpoints(m, m);
    CHECK(pm.deltas[0].norm() == doctest::Approx(0.0));
  }
  SUBCASE("scalar interpolation") {
    Matrix lo(1, 1), hi(1, 1);
    lo << 2.0;
    hi << 5.0;
    const ParametricMatrix pm = decompose_from_endpoints(lo, hi);
    CHECK(pm.base(0, 0) == 2.0);
    CHECK(pm.deltas[0](0, 0) == 3.0);
    CHECK(pm.eval(1.0 / 3.0)(0, 0) == doctest::Approx(3.0));
    CHECK(pm.eval(0.0)(0, 0) == 2.0);
    CHECK(pm.eval(1.0)(0, 0) == 5.0);
  }
  SUBCASE("shape mismatch throws") {
    CHECK_THROWS_AS(decompose_from_endpoints(Matrix::Zero(2, 2), Matrix::Zero(3, 3)),
                    std::invalid_argument);
  }
}

TEST_CASE("discretize_euler") {
  SUBCASE("scalar formula") {
    Matrix a(1, 1);
    a << -1.0;
    const auto disc = discretize_euler(ParametricMatrix(a, {Matrix::Zero(1, 1)}),
                                       Matrix::Zero(1, 1), Matrix(1, 0), 0.1);
    CHECK(disc.a.base(0, 0) == doctest::Approx(0.9));
  }
  SUBCASE("ts to zero limit") {
    std::mt19937_64 rng(5);
    const Matrix a_c = oracles::random_matrix(rng, 2, 2);
    const Matrix b_c = oracles::random_matrix(rng, 2, 1);
    const double ts = 1e-9;
    const auto disc = discretize_euler(ParametricMatrix(a_c, {a_c}), b_c, Matrix(2, 0), ts);
    CHECK((disc.a.base - Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(disc.b.lpNorm<Eigen::Infinity>() < 1e-8);
  }
  SUBCASE("euler consistency for random theta") {
    std::mt19937_64 rng(9);
    const ParametricMatrix a_c(oracles::random_matrix(rng, 3, 3),
                               {oracles::random_matrix(rng, 3, 3)});
    const double ts = 0.05;
    const auto disc = discretize_euler(a_c, Matrix::Zero(3, 1), Matrix(3, 0), ts);
    for (double theta : {0.0, 0.3, 1.0, -0.2}) {
      const Matrix expected = Matrix::Identity(3, 3) + ts * a_c.eval(theta);
      CHECK((disc.a.eval(theta) - expected).lpNorm<Eigen::Infinity>() < 1e-14);
    }
  }
  SUBCASE("nonpositive ts throws") {
    CHECK_THROWS_AS(discretize_euler(ParametricMatrix(Matrix::Zero(1, 1), {Matrix::Zero(1, 1)}),
                                     Matrix::Zero(1, 1), Matrix(1, 0), 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("hex case study") {
  const HexParams p;
  const ParametricModel model = build_hex(p);

  // alpha = U*A/(C_r*V): 0.002 at the small area, 0.005 at the large one.
  const Matrix a0 = model.eval_a(0.0);
  const Matrix a1 = model.eval_a(1.0);
  CHECK(a0(0, 0) == doctest::Approx(1.0 + 10.0 * (-2.5 / 1000.0 - 0.002)).epsilon(1e-14));
  CHECK(a0(0, 0) == doctest::Approx(0.955).epsilon(1e-14));
  CHECK(a0(0, 1) == doctest::Approx(10.0 * 0.002).epsilon(1e-14));
  CHECK(a1(0, 1) == doctest::Approx(10.0 * 0.005).epsilon(1e-14));
  CHECK(a1(1, 1) == doctest::Approx(1.0 + 10.0 * (-2.0 / 1000.0 - 0.005)).epsilon(1e-14));

  CHECK(model.b(0, 0) == doctest::Approx(10.0 * 0.0025).epsilon(1e-14));
  CHECK(model.b(1, 0) == 0.0);
  CHECK(model.e(0, 0) == 0.0);
  CHECK(model.e(1, 0) == doctest::Approx(10.0 * 0.002).epsilon(1e-14));
  CHECK(model.d_const(0) == 25.0);

  CHECK(model.c(0, 0) == 0.0);
  CHECK(model.c(0, 1) == 1.0);
  CHECK(model.state_box[0].lo == 45.0);
  CHECK(model.state_box[1].hi == 45.0);
  CHECK(model.input_box[0].lo == 60.0);

  SUBCASE("invariant violations are rejected") {
    HexParams bad = p;
    bad.area_min = bad.area_max;
    CHECK_THROWS_AS(build_hex(bad), std::invalid_argument);
  }
}

TEST_CASE("msd case study") {
  const MsdParams p;
  const ParametricModel model = build_msd(p);

  const Matrix a0 = model.eval_a(0.0);
  CHECK(a0(0, 0) == 1.0);
  CHECK(a0(0, 1) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(a0(1, 0) == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK(a0(1, 1) == doctest::Approx(1.0 - 0.015545).epsilon(1e-12));

  const Matrix a_max = model.eval_a(1.0);
  CHECK(a_max(1, 0) == doctest::Approx(-10.0).epsilon(1e-14));

  CHECK(model.b(0, 0) == 0.0);
  CHECK(model.b(1, 0) == doctest::Approx(0.018585).epsilon(1e-12));

  // Exactly one nonzero delta entry, at row 2, column 1.
  const Matrix& delta = model.a.deltas[0];
  int nonzeros = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (delta(i, j) != 0.0) ++nonzeros;
    }
  }
  CHECK(nonzeros == 1);
  CHECK(delta(1, 0) == doctest::Approx(-7.5).epsilon(1e-14));

  CHECK(model.e.cols() == 0);
  CHECK(model.c(0, 0) == 1.0);

  SUBCASE("invariant violations are rejected") {
    MsdParams bad = p;
    bad.mass = -1.0;
    CHECK_THROWS_AS(build_msd(bad), std::invalid_argument);
    MsdParams bad2 = p;
    bad2.stiffness_min = bad2.stiffness_max;
    CHECK_THROWS_AS(build_msd(bad2), std::invalid_argument);
  }
}

TEST_CASE("model json round trip") {
  const ParametricModel hex = build_hex(HexParams{});
  const ParametricModel parsed = jsonio::model_from_json(jsonio::model_to_json(hex));
  CHECK((parsed.a.base - hex.a.base).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parsed.a.deltas[0] - hex.a.deltas[0]).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parsed.b - hex.b).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parsed.e - hex.e).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(parsed.d_const(0) == hex.d_const(0));
  CHECK(parsed.ts == hex.ts);
  CHECK(parsed.state_box[1].lo == hex.state_box[1].lo);

  const ParametricModel msd = build_msd(MsdParams{});
  const ParametricModel parsed2 = jsonio::model_from_json(jsonio::model_to_json(msd));
  CHECK(parsed2.e.cols() == 0);
  CHECK((parsed2.a.base - msd.a.base).lpNorm<Eigen::Infinity>() == 0.0);

  CHECK_THROWS_AS(jsonio::model_from_json("{not json"), std::invalid_argument);
  CHECK_THROWS_AS(jsonio::model_from_json("{\"ts\": 1.0}"), std::invalid_argument);
}
