#include "csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace parampc {
namespace csvio {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("rename failed: " + path);
  }
}

void save_trace_csv(const sim::SimulationTrace& trace, const std::string& path) {
  std::ostringstream out;
  out << "t";
  for (int j = 0; j < trace.states.cols(); ++j) out << ",x" << j + 1;
  for (int j = 0; j < trace.inputs.cols(); ++j) out << ",u" << j + 1;
  for (int j = 0; j < trace.outputs.cols(); ++j) out << ",y" << j + 1;
  for (int j = 0; j < trace.references.cols(); ++j) out << ",r" << j + 1;
  out << ",fallback\n";

  std::vector<char> fallback(trace.length(), 0);
  for (int k : trace.fallback_steps) {
    if (k >= 0 && k < trace.length()) fallback[k] = 1;
  }
  for (int k = 0; k < trace.length(); ++k) {
    out << format_double(trace.times(k));
    for (int j = 0; j < trace.states.cols(); ++j) out << ',' << format_double(trace.states(k, j));
    for (int j = 0; j < trace.inputs.cols(); ++j) out << ',' << format_double(trace.inputs(k, j));
    for (int j = 0; j < trace.outputs.cols(); ++j) out << ',' << format_double(trace.outputs(k, j));
    for (int j = 0; j < trace.references.cols(); ++j) {
      out << ',' << format_double(trace.references(k, j));
    }
    out << ',' << int(fallback[k]) << '\n';
  }
  write_file_atomic(path, out.str());
}

void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "case,method,theta,rmse,maxae,nrmse,regions,tv_u\n";
  for (const auto& r : rows) {
    out << r.case_name << ',' << r.method << ',' << format_double(r.theta) << ','
        << format_double(r.rmse) << ',' << format_double(r.maxae) << ','
        << format_double(r.nrmse) << ',' << r.regions << ',' << format_double(r.tv_u) << '\n';
  }
  write_file_atomic(path, out.str());
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ostringstream out;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace csvio
}  // namespace parampc
