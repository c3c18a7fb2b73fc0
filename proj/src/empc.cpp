#include "empc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

namespace parampc {
namespace empc {

namespace {

constexpr double kContainTol = 1e-9;

double uniform01(std::uint64_t& state) {
  // splitmix64 step; portable and deterministic
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

Vector sample_box(const Box& box, std::uint64_t& state) {
  Vector out(box.size());
  for (size_t j = 0; j < box.size(); ++j) {
    out(j) = box[j].lo + uniform01(state) * box[j].width();
  }
  return out;
}

Vector box_center(const Box& box) {
  Vector out(box.size());
  for (size_t j = 0; j < box.size(); ++j) out(j) = box[j].center();
  return out;
}

// Rows bounding the box itself, appended to every region.
void box_rows(const Box& box, Matrix* a, Vector* b) {
  const int d = static_cast<int>(box.size());
  *a = Matrix::Zero(2 * d, d);
  *b = Vector::Zero(2 * d);
  for (int j = 0; j < d; ++j) {
    (*a)(2 * j, j) = 1.0;
    (*b)(2 * j) = box[j].hi;
    (*a)(2 * j + 1, j) = -1.0;
    (*b)(2 * j + 1) = -box[j].lo;
  }
}

double interval_max_of_row(const Eigen::RowVectorXd& a, const Box& box) {
  double out = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    out += a(j) >= 0 ? a(j) * box[static_cast<size_t>(j)].hi
                     : a(j) * box[static_cast<size_t>(j)].lo;
  }
  return out;
}

// Orthonormal basis of the hyperplane {x : a x = 0}.
Matrix null_space_of_row(const Eigen::RowVectorXd& a) {
  const int d = static_cast<int>(a.size());
  Eigen::HouseholderQR<Matrix> qr(a.transpose());
  const Matrix q = qr.householderQ();
  return q.rightCols(d - 1);
}

}  // namespace

qp::DenseQp MpQp::at(const Vector& xi) const {
  if (xi.size() != nxi()) throw std::invalid_argument("MpQp::at: parameter size mismatch");
  return qp::DenseQp::make(h, f_map * xi + f0, g, b + e_mat * xi);
}

bool CriticalRegion::contains(const Vector& xi, double tol) const {
  for (int i = 0; i < region_a.rows(); ++i) {
    if (region_a.row(i).dot(xi) > region_b(i) + tol) return false;
  }
  return true;
}

ChebyshevResult chebyshev_center(const Matrix& a, const Vector& b, const Vector& interior_hint) {
  const int d = static_cast<int>(a.cols());
  const int nr = static_cast<int>(a.rows());
  ChebyshevResult out;
  if (nr == 0) return out;

  // Regularized LP in (center, radius): maximize the radius subject to
  // a_i'c + |a_i| rho <= b_i. Radius may go negative for empty polyhedra.
  Matrix g(nr, d + 1);
  Vector norms(nr);
  for (int i = 0; i < nr; ++i) {
    norms(i) = a.row(i).norm();
    g.row(i).head(d) = a.row(i);
    g(i, d) = norms(i);
  }
  Matrix h = 1e-6 * Matrix::Identity(d + 1, d + 1);
  Vector f = Vector::Zero(d + 1);
  f(d) = -1.0;

  Vector start(d + 1);
  start.head(d) = interior_hint;
  double rho0 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nr; ++i) {
    if (norms(i) < 1e-14) continue;
    rho0 = std::min(rho0, (b(i) - a.row(i).dot(interior_hint)) / norms(i));
  }
  if (!std::isfinite(rho0)) return out;
  start(d) = rho0 - 1.0;

  qp::DenseQp dense;
  dense.h = std::move(h);
  dense.f = std::move(f);
  dense.g = std::move(g);
  dense.rhs = b;
  qp::QpSolution sol = qp::solve(dense, start);
  if (sol.status != qp::Status::optimal) return out;
  out.center = sol.z.head(d);
  out.radius = sol.z(d);
  out.ok = true;
  return out;
}

namespace {

struct DerivedRegion {
  CriticalRegion region;
  bool ok = false;
  bool degenerate = false;
};

DerivedRegion derive_region(const MpQp& prob, const Eigen::LLT<Matrix>& h_llt,
                            const std::vector<int>& active, const EnumerationOptions& opts) {
  DerivedRegion out;
  const int nz = prob.nz();
  const int nxi = prob.nxi();
  const int na = static_cast<int>(active.size());

  Matrix lambda_m;  // na x nxi
  Vector lambda_c;  // na
  Matrix gw(na, nz);
  if (na > 0) {
    Matrix ew(na, nxi);
    Vector bw(na);
    for (int i = 0; i < na; ++i) {
      gw.row(i) = prob.g.row(active[i]);
      ew.row(i) = prob.e_mat.row(active[i]);
      bw(i) = prob.b(active[i]);
    }
    const Matrix hinv_gwt = h_llt.solve(gw.transpose());
    const Matrix schur = gw * hinv_gwt;
    Eigen::LDLT<Matrix> schur_ldlt(schur);
    // Reject rank-deficient active sets (weakly-active duplicates land here).
    const Vector diag = schur_ldlt.vectorD();
    if (schur_ldlt.info() != Eigen::Success ||
        diag.minCoeff() < 1e-12 * std::max(1.0, diag.maxCoeff())) {
      out.degenerate = true;
      return out;
    }
    lambda_m = schur_ldlt.solve(-(ew + gw * h_llt.solve(prob.f_map)));
    lambda_c = schur_ldlt.solve(-(bw + gw * h_llt.solve(prob.f0)));
  }

  CriticalRegion& reg = out.region;
  reg.active_set = active;
  if (na > 0) {
    reg.gain = -h_llt.solve(prob.f_map + gw.transpose() * lambda_m);
    reg.offset = -h_llt.solve(prob.f0 + gw.transpose() * lambda_c);
  } else {
    reg.gain = -h_llt.solve(prob.f_map);
    reg.offset = -h_llt.solve(prob.f0);
  }

  // Candidate rows: primal feasibility of inactive rows, dual feasibility of
  // the active multipliers, then the parameter box.
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0, ai = 0; i < prob.nc(); ++i) {
    if (ai < na && active[ai] == i) {
      ++ai;
      continue;
    }
    Eigen::RowVectorXd row = prob.g.row(i) * reg.gain - prob.e_mat.row(i);
    rows.push_back(row);
    rhs.push_back(prob.b(i) - prob.g.row(i).dot(reg.offset));
  }
  for (int i = 0; i < na; ++i) {
    rows.push_back(-lambda_m.row(i));
    rhs.push_back(lambda_c(i));
  }

  Matrix box_a;
  Vector box_b;
  box_rows(prob.param_box, &box_a, &box_b);

  // Normalize, drop near-zero rows, and drop rows redundant over the box.
  std::vector<Eigen::RowVectorXd> kept;
  std::vector<double> kept_rhs;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double nrm = rows[i].norm();
    if (nrm < 1e-12) {
      if (rhs[i] < -1e-9) return out;  // 0 <= negative: empty region
      continue;
    }
    Eigen::RowVectorXd row = rows[i] / nrm;
    const double r = rhs[i] / nrm;
    if (interval_max_of_row(row, prob.param_box) <= r - 1e-12) continue;  // redundant
    kept.push_back(row);
    kept_rhs.push_back(r);
  }

  const int total = static_cast<int>(kept.size()) + static_cast<int>(box_a.rows());
  reg.region_a = Matrix::Zero(total, nxi);
  reg.region_b = Vector::Zero(total);
  for (size_t i = 0; i < kept.size(); ++i) {
    reg.region_a.row(static_cast<int>(i)) = kept[i];
    reg.region_b(static_cast<int>(i)) = kept_rhs[i];
  }
  reg.region_a.bottomRows(box_a.rows()) = box_a;
  reg.region_b.tail(box_b.size()) = box_b;

  const ChebyshevResult cheb =
      chebyshev_center(reg.region_a, reg.region_b, box_center(prob.param_box));
  if (!cheb.ok || cheb.radius <= opts.min_chebyshev_radius) return out;
  reg.chebyshev_center = cheb.center;
  reg.chebyshev_radius = cheb.radius;
  out.ok = true;
  return out;
}

// Active set from a solved QP with weakly-active rows dropped.
std::vector<int> strict_active_set(const qp::QpSolution& sol, double weak_tol) {
  std::vector<int> out;
  for (int idx : sol.active_set) {
    if (sol.multipliers(idx) > weak_tol) out.push_back(idx);
  }
  return out;
}

// Interior point of facet `facet_row` of the region, or empty when the row
// does not support a full-dimensional facet.
bool facet_interior_point(const CriticalRegion& reg, int facet_row, double min_radius,
                          Vector* point) {
  const Eigen::RowVectorXd a = reg.region_a.row(facet_row);
  const double bval = reg.region_b(facet_row);
  const int d = static_cast<int>(a.size());
  if (d == 1) {
    // Zero-dimensional facet: the single boundary point.
    *point = Vector::Constant(1, bval / a(0));
    for (int i = 0; i < reg.region_a.rows(); ++i) {
      if (i == facet_row) continue;
      if (reg.region_a.row(i).dot(*point) > reg.region_b(i) + 1e-9) return false;
    }
    return true;
  }

  const Vector p0 = a.transpose() * (bval / a.squaredNorm());
  const Matrix z = null_space_of_row(a);

  const int nr = static_cast<int>(reg.region_a.rows());
  Matrix a_y(nr - 1, d - 1);
  Vector b_y(nr - 1);
  int r = 0;
  for (int i = 0; i < nr; ++i) {
    if (i == facet_row) continue;
    a_y.row(r) = reg.region_a.row(i) * z;
    b_y(r) = reg.region_b(i) - reg.region_a.row(i).dot(p0);
    ++r;
  }
  const ChebyshevResult cheb = chebyshev_center(a_y, b_y, Vector::Zero(d - 1));
  if (!cheb.ok || cheb.radius <= min_radius) return false;
  *point = p0 + z * cheb.center;
  return true;
}

}  // namespace

PwaLaw enumerate_regions(const MpQp& problem, const EnumerationOptions& opts) {
  if (problem.param_box.empty()) {
    throw std::invalid_argument("enumerate_regions: parameter box required");
  }
  for (const auto& iv : problem.param_box) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw std::invalid_argument("enumerate_regions: parameter box must be bounded");
    }
  }

  PwaLaw law;
  law.problem = problem;
  law.parameter_box = problem.param_box;

  Eigen::LLT<Matrix> h_llt(problem.h);
  if (h_llt.info() != Eigen::Success) {
    throw std::runtime_error("enumerate_regions: Hessian must be positive definite");
  }

  // Seed points: box center, then the corners.
  std::vector<Vector> seeds;
  seeds.push_back(box_center(problem.param_box));
  const int d = problem.nxi();
  if (d <= 16) {
    for (int mask = 0; mask < (1 << d); ++mask) {
      Vector corner(d);
      for (int j = 0; j < d; ++j) {
        corner(j) = (mask >> j) & 1 ? problem.param_box[j].hi : problem.param_box[j].lo;
      }
      seeds.push_back(std::move(corner));
    }
  }

  std::set<std::vector<int>> visited;
  std::deque<Vector> frontier;
  for (const auto& s : seeds) frontier.push_back(s);

  while (!frontier.empty()) {
    if (static_cast<int>(law.regions.size()) >= opts.region_cap) {
      law.complete = false;
      break;
    }
    const Vector xi = frontier.front();
    frontier.pop_front();

    qp::QpSolution sol;
    try {
      sol = qp::solve(problem.at(xi), Vector::Zero(problem.nz()));
    } catch (const std::exception&) {
      continue;
    }
    if (sol.status != qp::Status::optimal) continue;

    const std::vector<int> active = strict_active_set(sol, opts.weak_multiplier_tol);
    if (!visited.insert(active).second) continue;

    DerivedRegion derived = derive_region(problem, h_llt, active, opts);
    if (derived.degenerate) {
      ++law.skipped_degenerate;
      continue;
    }
    if (!derived.ok) continue;

    const CriticalRegion& reg = derived.region;
    for (int i = 0; i < reg.region_a.rows(); ++i) {
      Vector facet_point;
      if (!facet_interior_point(reg, i, opts.min_chebyshev_radius, &facet_point)) continue;
      const Vector step = reg.region_a.row(i).transpose() * opts.facet_step;
      Vector beyond = facet_point + step;
      bool in_box = true;
      for (int j = 0; j < d; ++j) {
        if (!problem.param_box[j].contains(beyond(j), 0.0)) {
          in_box = false;
          break;
        }
      }
      if (in_box) frontier.push_back(std::move(beyond));
    }
    law.regions.push_back(std::move(derived.region));
  }

  if (opts.coverage_samples > 0) {
    law.unexplored_volume_estimate =
        coverage_report(law, opts.coverage_samples, opts.seed).miss_fraction;
  }
  return law;
}

LocateResult point_locate(const PwaLaw& law, const Vector& xi) {
  LocateResult out;
  for (size_t i = 0; i < law.regions.size(); ++i) {
    if (law.regions[i].contains(xi, kContainTol)) {
      out.region_index = static_cast<int>(i);
      out.z = law.regions[i].evaluate(xi);
      return out;
    }
  }
  return out;
}

CoverageReport coverage_report(const PwaLaw& law, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("coverage_report: samples must be >= 1");
  std::uint64_t state = seed;
  int hits = 0, infeasible = 0, misses = 0;
  for (int s = 0; s < samples; ++s) {
    const Vector xi = sample_box(law.parameter_box, state);
    if (point_locate(law, xi).region_index >= 0) {
      ++hits;
      continue;
    }
    qp::QpSolution sol;
    bool solved = true;
    try {
      sol = qp::solve(law.problem.at(xi), Vector::Zero(law.problem.nz()));
    } catch (const std::exception&) {
      solved = false;
    }
    if (solved && sol.status == qp::Status::infeasible) {
      ++infeasible;
    } else {
      ++misses;
    }
  }
  CoverageReport report;
  report.hit_fraction = static_cast<double>(hits) / samples;
  report.infeasible_fraction = static_cast<double>(infeasible) / samples;
  report.miss_fraction = static_cast<double>(misses) / samples;
  return report;
}

}  // namespace empc
}  // namespace parampc
