#pragma once

#include <string>
#include <vector>

#include "sim.hpp"

namespace parampc {
namespace csvio {

/// %.17g, locale-independent; identical inputs give identical text.
std::string format_double(double v);

/// Header: t,x1..xn,u1..um,y1..yq,r1..rq,fallback
void save_trace_csv(const sim::SimulationTrace& trace, const std::string& path);

struct MetricsRow {
  std::string case_name;
  std::string method;
  double theta = 0.0;
  double rmse = 0.0;
  double maxae = 0.0;
  double nrmse = 0.0;
  int regions = 0;
  double tv_u = 0.0;
};

/// Header: case,method,theta,rmse,maxae,nrmse,regions,tv_u
void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

void save_matrix_csv(const Matrix& m, const std::string& path);

/// Writes to a temporary file in the same directory, then renames.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace csvio
}  // namespace parampc
