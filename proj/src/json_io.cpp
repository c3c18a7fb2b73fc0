#include "json_io.hpp"

#include <json.hpp>

#include <stdexcept>

namespace parampc {
namespace jsonio {

namespace {

using nlohmann::json;

Matrix parse_matrix(const json& j, const std::string& key) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.empty()) {
    throw std::invalid_argument("model json: '" + key + "' must be a nonempty 2-d array");
  }
  const size_t rows = arr.size();
  const size_t cols = arr[0].size();
  Matrix out(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (!arr[i].is_array() || arr[i].size() != cols) {
      throw std::invalid_argument("model json: ragged rows in '" + key + "'");
    }
    for (size_t k = 0; k < cols; ++k) out(i, k) = arr[i][k].get<double>();
  }
  return out;
}

Box parse_box(const json& j, const std::string& key) {
  const auto& arr = j.at(key);
  Box out;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2) {
      throw std::invalid_argument("model json: '" + key + "' entries must be [lo, hi]");
    }
    out.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json box_to_json(const Box& box) {
  json out = json::array();
  for (const auto& iv : box) out.push_back(json::array({iv.lo, iv.hi}));
  return out;
}

}  // namespace

ParametricModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("model json: parse error: ") + e.what());
  }

  try {
    ParametricModel model;
    const Matrix base = parse_matrix(j, "a_base");
    const auto& deltas_json = j.at("a_deltas");
    std::vector<Matrix> deltas;
    for (size_t p = 0; p < deltas_json.size(); ++p) {
      json wrapper;
      wrapper["m"] = deltas_json[p];
      deltas.push_back(parse_matrix(wrapper, "m"));
    }
    model.a = ParametricMatrix(base, std::move(deltas));
    model.b = parse_matrix(j, "b");
    model.c = parse_matrix(j, "c");
    model.d = j.contains("d") ? parse_matrix(j, "d")
                              : Matrix::Zero(model.c.rows(), model.b.cols());
    model.e = j.contains("e") ? parse_matrix(j, "e") : Matrix(model.a.dim(), 0);
    if (j.contains("d_const")) {
      const auto& dc = j.at("d_const");
      model.d_const = Vector(dc.size());
      for (size_t i = 0; i < dc.size(); ++i) model.d_const(i) = dc[i].get<double>();
    } else {
      model.d_const = Vector::Zero(model.e.cols());
    }
    model.ts = j.at("ts").get<double>();
    model.theta_box = parse_box(j, "theta_box");
    model.state_box = parse_box(j, "state_box");
    model.input_box = parse_box(j, "input_box");
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model json: ") + e.what());
  }
}

std::string model_to_json(const ParametricModel& model) {
  json j;
  j["ts"] = model.ts;
  j["a_base"] = matrix_to_json(model.a.base);
  json deltas = json::array();
  for (const auto& d : model.a.deltas) deltas.push_back(matrix_to_json(d));
  j["a_deltas"] = std::move(deltas);
  j["b"] = matrix_to_json(model.b);
  j["c"] = matrix_to_json(model.c);
  j["d"] = matrix_to_json(model.d);
  if (model.e.cols() > 0) {
    j["e"] = matrix_to_json(model.e);
    j["d_const"] = vector_to_json(model.d_const);
  }
  j["theta_box"] = box_to_json(model.theta_box);
  j["state_box"] = box_to_json(model.state_box);
  j["input_box"] = box_to_json(model.input_box);
  return j.dump(2);
}

std::string law_to_json(const empc::PwaLaw& law) {
  json j;
  j["parameter_box"] = box_to_json(law.parameter_box);
  j["complete"] = law.complete;
  j["unexplored_volume_estimate"] = law.unexplored_volume_estimate;
  j["skipped_degenerate"] = law.skipped_degenerate;
  json regions = json::array();
  for (const auto& reg : law.regions) {
    json r;
    r["active_set"] = reg.active_set;
    r["gain"] = matrix_to_json(reg.gain);
    r["offset"] = vector_to_json(reg.offset);
    r["region_a"] = matrix_to_json(reg.region_a);
    r["region_b"] = vector_to_json(reg.region_b);
    r["chebyshev_center"] = vector_to_json(reg.chebyshev_center);
    r["chebyshev_radius"] = reg.chebyshev_radius;
    regions.push_back(std::move(r));
  }
  j["regions"] = std::move(regions);
  return j.dump(2);
}

}  // namespace jsonio
}  // namespace parampc
