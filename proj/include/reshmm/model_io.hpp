#pragma once

#include <string>

#include "reshmm/types.hpp"

namespace reshmm {

// Model file schema (format_version 1):
// {M, d_max, A: row-major (M+1) x M, states: [{lambda, beta:[b0,b1],
//  psi:[[..],[..]]}], sigma2, format_version: 1}
// Round-trips are value-exact for all finite parameters.
std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);

void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

}  // namespace reshmm
