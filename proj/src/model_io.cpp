#include "affr/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "affr/errors.hpp"

namespace affr {

namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("model file: missing '") + key + "'");
  const json& v = j.at(key);
  const auto rows = v.at("rows").get<Eigen::Index>();
  const auto cols = v.at("cols").get<Eigen::Index>();
  const auto data = v.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw IoError(std::string("model file: '") + key + "' has the wrong number of entries");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<size_t>(r * cols + c)];
  return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("model file: missing '") + key + "'");
  const auto data = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json grid_json(const Grid& g) { return {{"points", vector_json(g.points)}, {"weights", vector_json(g.weights)}}; }

Grid grid_from(const json& j) {
  if (!j.contains("grid")) throw IoError("model file: missing 'grid'");
  Grid g;
  g.points = vector_from(j.at("grid"), "points");
  g.weights = vector_from(j.at("grid"), "weights");
  if (g.points.size() != g.weights.size() || g.points.size() < 2) throw IoError("model file: malformed grid");
  return g;
}

json basis_spectrum(const FpcaBasis& b) {
  return {{"eigenvalues", vector_json(b.eigenvalues)}, {"pev", vector_json(b.pev)}, {"rank", b.rank}};
}

FpcaBasis basis_from(const json& j, const Grid& grid, const char* functions_key, const Vector& mean) {
  FpcaBasis b;
  b.grid = grid;
  b.eigenfunctions = matrix_from(j, functions_key);
  b.mean_curve = mean;
  if (b.eigenfunctions.cols() != grid.size() && b.eigenfunctions.rows() > 0)
    throw IoError(std::string("model file: '") + functions_key + "' does not match the grid");
  b.eigenfunctions.conservativeResize(b.eigenfunctions.rows(), grid.size());
  return b;
}

}  // namespace

std::string to_json_text(const AffrModel& model) {
  if (model.kernel.mask.kind == DomainMask::Kind::interval)
    throw InvalidArgument("model file: interval masks cannot be serialized");
  json j;
  j["version"] = kModelFormatVersion;
  j["variant"] = "affr";
  j["kernel"] = {{"family", to_string(model.kernel.family)},
                 {"delta", model.kernel.delta},
                 {"mask", to_string(model.kernel.mask)}};
  j["lambda"] = model.lambda;
  j["grid"] = grid_json(model.grid());
  j["alpha"] = matrix_json(model.alpha);
  j["eigenfunctions"] = matrix_json(model.basis.eigenfunctions);
  j["spectrum"] = basis_spectrum(model.basis);
  j["y_mean"] = vector_json(model.y_mean);
  j["x_train"] = matrix_json(model.x_train.values);
  return j.dump(1) + "\n";
}

std::string to_json_text(const LinearFofModel& model) {
  json j;
  j["version"] = kModelFormatVersion;
  j["variant"] = model.variant == LinearVariant::lmr ? "lmr" : "lmf";
  j["grid"] = grid_json(model.grid());
  j["x_mean"] = vector_json(model.x_mean);
  j["y_mean"] = vector_json(model.y_mean);
  j["x_eigenfunctions"] = matrix_json(model.x_basis.eigenfunctions);
  j["y_eigenfunctions"] = matrix_json(model.variant == LinearVariant::lmr ? model.y_basis.eigenfunctions : Matrix());
  j["coefficients"] = matrix_json(model.coefficients);
  return j.dump(1) + "\n";
}

AnyModel model_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
  try {
    if (j.value("version", 0) != kModelFormatVersion) throw IoError("model file: unsupported version");
    const std::string variant = j.at("variant").get<std::string>();
    const Grid grid = grid_from(j);
    if (variant == "affr") {
      AffrModel m;
      const json& k = j.at("kernel");
      m.kernel = KernelSpec(parse_kernel_family(k.at("family").get<std::string>()), k.at("delta").get<double>(),
                            parse_mask(k.at("mask").get<std::string>()));
      m.lambda = j.at("lambda").get<double>();
      m.alpha = matrix_from(j, "alpha");
      m.y_mean = vector_from(j, "y_mean");
      m.x_train = FunctionalSample(grid, matrix_from(j, "x_train"));
      m.basis = basis_from(j, grid, "eigenfunctions", m.y_mean);
      if (j.contains("spectrum")) {
        m.basis.eigenvalues = vector_from(j.at("spectrum"), "eigenvalues");
        m.basis.pev = vector_from(j.at("spectrum"), "pev");
        m.basis.rank = j.at("spectrum").value("rank", Eigen::Index{0});
      }
      if (m.alpha.rows() != m.x_train.n() || m.alpha.cols() != m.basis.components() ||
          m.y_mean.size() != grid.size())
        throw IoError("model file: inconsistent dimensions");
      return m;
    }
    if (variant == "lmr" || variant == "lmf") {
      LinearFofModel m;
      m.variant = variant == "lmr" ? LinearVariant::lmr : LinearVariant::lmf;
      m.x_mean = vector_from(j, "x_mean");
      m.y_mean = vector_from(j, "y_mean");
      m.x_basis = basis_from(j, grid, "x_eigenfunctions", m.x_mean);
      if (m.variant == LinearVariant::lmr) m.y_basis = basis_from(j, grid, "y_eigenfunctions", m.y_mean);
      m.coefficients = matrix_from(j, "coefficients");
      return m;
    }
    throw IoError("model file: unknown variant '" + variant + "'");
  } catch (const json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
}

void save_model(const AnyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << std::visit([](const auto& m) { return to_json_text(m); }, model);
  if (!out) throw IoError("write failed for '" + path + "'");
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json_text(ss.str());
}

FunctionalSample predict(const AnyModel& model, const FunctionalSample& x_new) {
  if (const auto* m = std::get_if<AffrModel>(&model)) return predict_curves(*m, x_new);
  return predict_linear(std::get<LinearFofModel>(model), x_new);
}

}  // namespace affr
