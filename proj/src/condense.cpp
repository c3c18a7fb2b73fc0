#include "condense.hpp"

#include <stdexcept>

namespace parampc {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// powers[j] = a^j for j = 0..p_max
std::vector<Matrix> matrix_powers(const Matrix& a, int p_max) {
  std::vector<Matrix> powers;
  powers.reserve(p_max + 1);
  powers.push_back(Matrix::Identity(a.rows(), a.cols()));
  for (int j = 1; j <= p_max; ++j) powers.push_back(powers.back() * a);
  return powers;
}

Matrix frechet_from_powers(const std::vector<Matrix>& powers, const Matrix& delta_a, int p) {
  const auto n = delta_a.rows();
  Matrix out = Matrix::Zero(n, n);
  for (int r = 0; r < p; ++r) out += powers[r] * delta_a * powers[p - 1 - r];
  return out;
}

}  // namespace

Matrix frechet_power(const Matrix& a_tilde, const Matrix& delta_a, int p) {
  require(a_tilde.rows() == a_tilde.cols(), "frechet_power: a_tilde must be square");
  require(delta_a.rows() == a_tilde.rows() && delta_a.cols() == a_tilde.cols(),
          "frechet_power: delta_a shape must match a_tilde");
  require(p >= 0, "frechet_power: power must be nonnegative");
  return frechet_from_powers(matrix_powers(a_tilde, p > 0 ? p - 1 : 0), delta_a, p);
}

CondensedSystem condense_exact(const Matrix& a, const Matrix& b, const Matrix& e, int horizon) {
  require(horizon >= 1, "condense_exact: horizon must be >= 1");
  require(a.rows() == a.cols(), "condense_exact: A must be square");
  require(b.rows() == a.rows(), "condense_exact: B rows must match A");
  require(e.rows() == a.rows() || e.size() == 0, "condense_exact: E rows must match A");

  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  const int r = static_cast<int>(e.cols());
  const int big_n = horizon;

  CondensedSystem cs;
  cs.horizon = big_n;
  cs.n = n;
  cs.m = m;
  cs.r = r;
  cs.s_x = Matrix::Zero(big_n * n, n);
  cs.s_u = Matrix::Zero(big_n * n, big_n * m);
  cs.s_d = Matrix::Zero(big_n * n, r);

  const auto powers = matrix_powers(a, big_n);
  for (int k = 1; k <= big_n; ++k) {
    cs.s_x.block((k - 1) * n, 0, n, n) = powers[k];
    for (int i = 0; i <= k - 1; ++i) {
      cs.s_u.block((k - 1) * n, i * m, n, m) = powers[k - 1 - i] * b;
    }
    if (r > 0) {
      Matrix acc = Matrix::Zero(n, r);
      for (int i = 0; i <= k - 1; ++i) acc += powers[i] * e;
      cs.s_d.block((k - 1) * n, 0, n, r) = acc;
    }
  }
  return cs;
}

SensitivityBlocks condense_sensitivity(const Matrix& a_tilde, const Matrix& delta_a,
                                       const Matrix& b, const Matrix& e, int horizon,
                                       bool paper_indexing) {
  require(horizon >= 1, "condense_sensitivity: horizon must be >= 1");
  require(a_tilde.rows() == a_tilde.cols(), "condense_sensitivity: A must be square");
  require(delta_a.rows() == a_tilde.rows() && delta_a.cols() == a_tilde.cols(),
          "condense_sensitivity: delta_a shape must match a_tilde");
  require(b.rows() == a_tilde.rows(), "condense_sensitivity: B rows must match A");
  require(e.rows() == a_tilde.rows() || e.size() == 0,
          "condense_sensitivity: E rows must match A");

  const int n = static_cast<int>(a_tilde.rows());
  const int m = static_cast<int>(b.cols());
  const int r = static_cast<int>(e.cols());
  const int big_n = horizon;

  const auto powers = matrix_powers(a_tilde, big_n);
  std::vector<Matrix> lf;  // lf[p] = derivative of a^p along delta_a
  lf.reserve(big_n + 1);
  for (int p = 0; p <= big_n; ++p) lf.push_back(frechet_from_powers(powers, delta_a, p));

  SensitivityBlocks out;
  out.delta_s_x = Matrix::Zero(big_n * n, n);
  out.delta_s_u = Matrix::Zero(big_n * n, big_n * m);
  out.delta_s_d = Matrix::Zero(big_n * n, r);

  for (int k = 1; k <= big_n; ++k) {
    if (paper_indexing) {
      if (k >= 2) out.delta_s_x.block((k - 1) * n, 0, n, n) = lf[k - 1];
    } else {
      out.delta_s_x.block((k - 1) * n, 0, n, n) = lf[k];
    }
    for (int i = 0; i <= k - 1; ++i) {
      out.delta_s_u.block((k - 1) * n, i * m, n, m) = lf[k - 1 - i] * b;
    }
    if (r > 0) {
      Matrix acc = Matrix::Zero(n, r);
      for (int i = 0; i <= k - 1; ++i) acc += lf[i] * e;
      out.delta_s_d.block((k - 1) * n, 0, n, r) = acc;
    }
  }
  return out;
}

CondensedSystem condense_model(const ParametricModel& model, int horizon, bool paper_indexing) {
  CondensedSystem cs = condense_exact(model.a.base, model.b, model.e, horizon);
  cs.delta_s_x.reserve(model.n_theta());
  cs.delta_s_u.reserve(model.n_theta());
  cs.delta_s_d.reserve(model.n_theta());
  for (const auto& delta : model.a.deltas) {
    SensitivityBlocks blocks =
        condense_sensitivity(model.a.base, delta, model.b, model.e, horizon, paper_indexing);
    cs.delta_s_x.push_back(std::move(blocks.delta_s_x));
    cs.delta_s_u.push_back(std::move(blocks.delta_s_u));
    cs.delta_s_d.push_back(std::move(blocks.delta_s_d));
  }
  return cs;
}

}  // namespace parampc
