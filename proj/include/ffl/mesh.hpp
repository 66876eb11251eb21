#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ffl/tensor.hpp"

namespace ffl {

using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FaceMatrix = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Connectivity shared by every mesh of one dataset.
struct Topology {
  std::string id;
  Index vertex_count = 0;
  FaceMatrix faces;
};

using TopologyPtr = std::shared_ptr<const Topology>;

struct Mesh {
  VertexMatrix vertices;  // V x 3
  TopologyPtr topology;

  Index vertex_count() const { return vertices.rows(); }

  // x0 y0 z0 x1 y1 z1 ...
  Eigen::VectorXd flatten() const {
    return Eigen::Map<const Eigen::VectorXd>(vertices.data(), vertices.size());
  }

  static Mesh from_flat(const Eigen::Ref<const Eigen::VectorXd>& flat, TopologyPtr topology) {
    if (flat.size() % 3 != 0) throw DimensionError("flattened mesh length is not a multiple of 3");
    Mesh m;
    m.vertices = Eigen::Map<const VertexMatrix>(flat.data(), flat.size() / 3, 3);
    m.topology = std::move(topology);
    return m;
  }
};

// Throws DatasetError when a face index is out of range, a coordinate is not
// finite, or the vertex count disagrees with the topology.
void validate(const Mesh& mesh);

// Per-expression intensities: 0 absent, 1 canonical, above 1 extrapolated.
struct ExpressionCode {
  Eigen::VectorXd weights;

  ExpressionCode() = default;
  explicit ExpressionCode(Eigen::VectorXd w) : weights(std::move(w)) {}

  static ExpressionCode one_hot(Index n, Index k, double level = 1.0);
  static ExpressionCode neutral(Index n) { return ExpressionCode(Eigen::VectorXd::Zero(n)); }

  Index size() const { return weights.size(); }
  bool is_one_hot() const;
  // Index of the largest weight.
  int dominant() const;

  friend bool operator==(const ExpressionCode& a, const ExpressionCode& b) {
    return a.weights.size() == b.weights.size() && a.weights == b.weights;
  }
};

struct FaceSample {
  Mesh mesh;
  int identity = 0;
  ExpressionCode expression;
};

// Global centroid and RMS scale; normalized = (v - centroid) / scale.
struct Normalization {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  double scale = 1.0;

  VertexMatrix apply(const VertexMatrix& v) const;
  VertexMatrix invert(const VertexMatrix& v) const;
  // Flattened (3V x n) forms.
  Eigen::MatrixXd apply_flat(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert_flat(const Eigen::MatrixXd& x) const;
};

nlohmann::json normalization_to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

struct Dataset {
  TopologyPtr topology;
  int n_id = 0;
  int n_exp = 0;
  std::string units = "mm";
  std::vector<std::string> expression_names;
  std::vector<FaceSample> samples;
  // Present once the vertices have been normalized.
  std::optional<Normalization> normalization;

  Index vertex_count() const { return topology ? topology->vertex_count : 0; }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Flattened vertices stacked column-wise (3V x n) for the given indices,
  // or for every sample when indices is empty.
  Eigen::MatrixXd stacked(std::span<const std::size_t> indices = {}) const;
  std::vector<int> identity_labels(std::span<const std::size_t> indices = {}) const;
  std::vector<int> expression_labels(std::span<const std::size_t> indices = {}) const;
};

struct ManifestEntry {
  std::filesystem::path path;  // absolute, or relative to the manifest
  int identity = 0;
  Eigen::VectorXd expression;
};

struct DatasetManifest {
  int version = 1;
  int n_id = 0;
  int n_exp = 0;
  std::string units = "mm";
  std::string topology_id;
  std::vector<std::string> expression_names;
  std::optional<Normalization> normalization;
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> samples;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes mesh files under dir/meshes and dir/manifest.json. Coordinates use
// the shortest exact decimal form, so loading returns bit-identical vertices.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Text mesh: "v x y z" lines then "f i j k" lines with 1-based indices.
// significant_digits = nullopt writes the shortest exact representation.
void export_mesh(const Mesh& mesh, const std::filesystem::path& path,
                 std::optional<int> significant_digits = 9);
std::string mesh_to_obj(const Mesh& mesh, std::optional<int> significant_digits = 9);
Mesh import_mesh(const std::filesystem::path& path);
Mesh parse_obj(const std::string& text);

std::pair<Dataset, Normalization> normalize(const Dataset& dataset);
Dataset denormalize(const Dataset& dataset, const Normalization& record);

}  // namespace ffl
