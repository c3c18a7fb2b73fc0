#pragma once

#include <cstdint>

#include "qp.hpp"

namespace parampc {
namespace empc {

/// mpQP  min 1/2 z'Hz + (f_map xi + f0)'z  s.t.  Gz <= b + E xi
/// over a bounded parameter box. H is theta-independent by construction.
struct MpQp {
  Matrix h;
  Matrix f_map;  // nz x nxi
  Vector f0;     // nz
  Matrix g;      // nc x nz
  Vector b;      // nc
  Matrix e_mat;  // nc x nxi
  Box param_box;

  int nz() const { return static_cast<int>(h.rows()); }
  int nxi() const { return static_cast<int>(f_map.cols()); }
  int nc() const { return static_cast<int>(g.rows()); }

  qp::DenseQp at(const Vector& xi) const;
};

/// Polyhedron {xi : region_a xi <= region_b} on which one active set stays
/// optimal, with the affine optimizer z = gain xi + offset.
struct CriticalRegion {
  std::vector<int> active_set;  // sorted
  Matrix gain;
  Vector offset;
  Matrix region_a;
  Vector region_b;
  Vector chebyshev_center;
  double chebyshev_radius = 0.0;

  bool contains(const Vector& xi, double tol = 1e-9) const;
  Vector evaluate(const Vector& xi) const { return gain * xi + offset; }
};

struct PwaLaw {
  MpQp problem;
  std::vector<CriticalRegion> regions;
  Box parameter_box;
  double unexplored_volume_estimate = 0.0;
  bool complete = true;          // false when the region cap was hit
  int skipped_degenerate = 0;    // singular-KKT active sets dropped
};

struct EnumerationOptions {
  int region_cap = 5000;
  double facet_step = 1e-6;
  double weak_multiplier_tol = 1e-9;
  double min_chebyshev_radius = 1e-9;
  int coverage_samples = 500;  // fills unexplored_volume_estimate
  std::uint64_t seed = 42;
};

/// Breadth-first adjacency walk: seed at the box center, then step across
/// every facet of every discovered region and solve the QP on the far side.
PwaLaw enumerate_regions(const MpQp& problem, const EnumerationOptions& opts = {});

struct LocateResult {
  int region_index = -1;  // -1: no region contains xi
  Vector z;
};

/// Linear scan with first-hit (lowest index) tie-break on shared facets.
LocateResult point_locate(const PwaLaw& law, const Vector& xi);

struct CoverageReport {
  double hit_fraction = 0.0;
  double infeasible_fraction = 0.0;
  double miss_fraction = 0.0;
};

CoverageReport coverage_report(const PwaLaw& law, int samples, std::uint64_t seed);

struct ChebyshevResult {
  Vector center;
  double radius = -1.0;  // < 0: empty (or lower-dimensional) polyhedron
  bool ok = false;
};

/// Largest inscribed ball of {x : a x <= b}; the polyhedron must be bounded.
ChebyshevResult chebyshev_center(const Matrix& a, const Vector& b, const Vector& interior_hint);

}  // namespace empc
}  // namespace parampc
