#pragma once

#include <string>

#include "empc.hpp"
#include "model.hpp"

namespace parampc {
namespace jsonio {

/// Parses a model document. Required keys: ts, a_base, a_deltas, b, c,
/// theta_box, state_box, input_box; optional: d, e, d_const.
/// Throws std::invalid_argument on schema violations.
ParametricModel model_from_json(const std::string& text);

std::string model_to_json(const ParametricModel& model);

/// Region-law document: parameter_box, completeness flags and one entry per
/// region with active_set, gain, offset, region_a, region_b.
std::string law_to_json(const empc::PwaLaw& law);

}  // namespace jsonio
}  // namespace parampc
