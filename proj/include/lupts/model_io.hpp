#pragma once

#include <string>

#include <json.hpp>

#include "lupts/estimators.hpp"
#include "lupts/replearn.hpp"

namespace lupts {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

// {"rows", "cols", "data" (row-major)}
Json matrix_to_json(const Matrix& a);
Matrix matrix_from_json(const Json& j);

Json to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const Json& j);

Json to_json(const Kernel& kernel);  // custom kernels throw Unsupported
Kernel kernel_from_json(const Json& j);

Json to_json(const Mlp& mlp);
Mlp mlp_from_json(const Json& j);

// Each document carries "format_version" and "type".
Json to_json(const LinearPredictor& model);
Json to_json(const KernelPredictor& model);
Json to_json(const RepModel& model);

LinearPredictor linear_predictor_from_json(const Json& j);
KernelPredictor kernel_predictor_from_json(const Json& j);
RepModel rep_model_from_json(const Json& j);

// Type tag of a saved document: "linear", "kernel" or "rep".
std::string model_type(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace lupts
