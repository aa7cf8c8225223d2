#include "lupts/model_io.hpp"

#include <fstream>

#include "lupts/errors.hpp"

namespace lupts {

Json matrix_to_json(const Matrix& a) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) data.push_back(a(i, j));
  return Json{{"rows", a.rows()}, {"cols", a.cols()}, {"data", data}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw InvalidInput("model: matrix payload does not match its shape");
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) a(i, c) = data[static_cast<std::size_t>(i * cols + c)];
  return a;
}

namespace {

Json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const Json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void check_header(const Json& j, const char* type) {
  if (j.value("format_version", 0) != kModelFormatVersion)
    throw InvalidInput("model: unsupported format_version");
  if (j.value("type", std::string{}) != type)
    throw InvalidInput(std::string("model: expected a '") + type + "' document");
}

}  // namespace

Json to_json(const FeatureMap& map) {
  Json j{{"kind", to_string(map.kind())}, {"input_dim", map.input_dim()}, {"output_dim", map.output_dim()}};
  switch (map.kind()) {
    case MapKind::identity:
    case MapKind::square_sign_inverse:
      break;
    case MapKind::rff:
      j["gamma"] = map.bandwidth();
      j["projection"] = matrix_to_json(map.projection());
      j["offsets"] = vector_to_json(map.offsets());
      break;
    case MapKind::rrf:
      j["gamma"] = map.bandwidth();
      j["projection"] = matrix_to_json(map.projection());
      break;
    case MapKind::linear_transform:
      j["transform"] = matrix_to_json(map.projection());
      j["base"] = map.base() ? to_json(*map.base()) : Json(nullptr);
      break;
  }
  return j;
}

FeatureMap feature_map_from_json(const Json& j) {
  const MapKind kind = map_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case MapKind::identity:
      return FeatureMap::identity(j.at("input_dim").get<int>());
    case MapKind::square_sign_inverse:
      return FeatureMap::square_sign_inverse(j.at("output_dim").get<int>());
    case MapKind::rff:
      return FeatureMap::rff_from_parts(matrix_from_json(j.at("projection")), vector_from_json(j.at("offsets")),
                                        j.at("gamma").get<double>());
    case MapKind::rrf:
      return FeatureMap::rrf_from_parts(matrix_from_json(j.at("projection")), j.at("gamma").get<double>());
    case MapKind::linear_transform: {
      Matrix b = matrix_from_json(j.at("transform"));
      if (j.at("base").is_null()) return FeatureMap::linear(std::move(b));
      return FeatureMap::linear_transform(feature_map_from_json(j.at("base")), std::move(b));
    }
  }
  throw InvalidInput("model: unknown feature map");
}

Json to_json(const Kernel& kernel) {
  switch (kernel.kind) {
    case Kernel::Kind::linear:
      return Json{{"kind", "linear"}};
    case Kernel::Kind::gaussian:
      return Json{{"kind", "gaussian"}, {"gamma", kernel.gamma}};
    case Kernel::Kind::feature_map:
      return Json{{"kind", "feature_map"}, {"map", to_json(*kernel.map)}};
    case Kernel::Kind::custom:
      break;
  }
  throw Unsupported("model: custom kernels cannot be serialized");
}

Kernel kernel_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return Kernel::linear();
  if (kind == "gaussian") return Kernel::gaussian(j.at("gamma").get<double>());
  if (kind == "feature_map") return Kernel::from_map(feature_map_from_json(j.at("map")));
  throw InvalidInput("model: unknown kernel '" + kind + "'");
}

Json to_json(const Mlp& mlp) {
  Json layers = Json::array();
  for (int l = 0; l < mlp.layers(); ++l)
    layers.push_back({{"weights", matrix_to_json(mlp.weights[l])}, {"biases", matrix_to_json(mlp.biases[l])}});
  return Json{{"widths", mlp.widths()}, {"leak", mlp.leak()}, {"layers", layers}};
}

Mlp mlp_from_json(const Json& j) {
  Mlp mlp(j.at("widths").get<std::vector<int>>(), 0, j.at("leak").get<double>());
  const auto& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != mlp.layers()) throw InvalidInput("model: layer count mismatch");
  for (int l = 0; l < mlp.layers(); ++l) {
    Matrix w = matrix_from_json(layers[l].at("weights"));
    Matrix b = matrix_from_json(layers[l].at("biases"));
    if (w.rows() != mlp.weights[l].rows() || w.cols() != mlp.weights[l].cols() || b.cols() != w.cols() ||
        b.rows() != 1)
      throw InvalidInput("model: layer shape mismatch");
    mlp.weights[l] = std::move(w);
    mlp.biases[l] = std::move(b);
  }
  return mlp;
}

Json to_json(const LinearPredictor& model) {
  Json transitions = Json::array();
  for (const auto& a : model.transitions) transitions.push_back(matrix_to_json(a));
  return Json{{"format_version", kModelFormatVersion},
              {"type", "linear"},
              {"map", to_json(model.map)},
              {"weights", matrix_to_json(model.weights)},
              {"transitions", transitions},
              {"outcome_head", matrix_to_json(model.outcome_head)},
              {"transition_spectral_norms", model.transition_spectral_norms}};
}

LinearPredictor linear_predictor_from_json(const Json& j) {
  check_header(j, "linear");
  LinearPredictor m;
  m.map = feature_map_from_json(j.at("map"));
  m.weights = matrix_from_json(j.at("weights"));
  if (m.weights.rows() != m.map.output_dim()) throw InvalidInput("model: weights do not match the feature map");
  for (const auto& a : j.value("transitions", Json::array())) m.transitions.push_back(matrix_from_json(a));
  if (j.contains("outcome_head")) m.outcome_head = matrix_from_json(j.at("outcome_head"));
  m.transition_spectral_norms = j.value("transition_spectral_norms", std::vector<double>{});
  return m;
}

Json to_json(const KernelPredictor& model) {
  return Json{{"format_version", kModelFormatVersion},
              {"type", "kernel"},
              {"kernel", to_json(model.kernel)},
              {"support", matrix_to_json(model.support)},
              {"dual", matrix_to_json(model.dual)}};
}

KernelPredictor kernel_predictor_from_json(const Json& j) {
  check_header(j, "kernel");
  KernelPredictor m;
  m.kernel = kernel_from_json(j.at("kernel"));
  m.support = matrix_from_json(j.at("support"));
  m.dual = matrix_from_json(j.at("dual"));
  if (m.dual.rows() != m.support.rows()) throw InvalidInput("model: dual does not match the support");
  return m;
}

Json to_json(const RepModel& model) {
  Json transitions = Json::array();
  for (const auto& a : model.transitions) transitions.push_back(matrix_to_json(a));
  Json heads = Json::array();
  for (const auto& h : model.heads) heads.push_back(matrix_to_json(h));
  return Json{{"format_version", kModelFormatVersion},
              {"type", "rep"},
              {"objective", to_string(model.objective)},
              {"lambda", model.lambda},
              {"horizon", model.horizon},
              {"encoder", to_json(model.encoder)},
              {"transitions", transitions},
              {"heads", heads}};
}

RepModel rep_model_from_json(const Json& j) {
  check_header(j, "rep");
  RepModel m;
  m.objective = objective_from_string(j.at("objective").get<std::string>());
  m.lambda = j.at("lambda").get<double>();
  m.horizon = j.at("horizon").get<int>();
  m.encoder = mlp_from_json(j.at("encoder"));
  for (const auto& a : j.at("transitions")) m.transitions.push_back(matrix_from_json(a));
  for (const auto& h : j.at("heads")) m.heads.push_back(matrix_from_json(h));
  return m;
}

std::string model_type(const Json& j) {
  if (!j.is_object() || !j.contains("type")) throw InvalidInput("model: document has no type");
  return j.at("type").get<std::string>();
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidConfig("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace lupts
