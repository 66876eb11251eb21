#pragma once

// Evaluation: mean vertex distance, diversity and specificity of generated
// sets, cluster statistics of embeddings and a 2-d PCA projection.
//
// Mesh sets are flattened column matrices (3V x n) in one coordinate frame.

#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffl/gan.hpp"
#include "ffl/mesh.hpp"
#include "ffl/sae.hpp"

namespace ffl {

// (1/V) sum_v |a_v - b_v|_2. Throws DimensionError on a vertex-count or
// topology mismatch.
double mean_vertex_distance(const Mesh& a, const Mesh& b);
double mean_vertex_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

Eigen::MatrixXd stack_meshes(std::span<const Mesh> meshes);

// Mean distance over n_pairs random pairs of distinct columns, summed in draw
// order. Pairs may repeat across draws.
double raw_diversity(const Eigen::MatrixXd& set, std::size_t n_pairs, Rng& rng);
// Mean distance over all i < j pairs, summed in (i, j) lexicographic order.
double raw_diversity_exhaustive(const Eigen::MatrixXd& set);

// raw_diversity / training_diversity.
double diversity(const Eigen::MatrixXd& set, std::size_t n_pairs, double training_diversity, Rng& rng);
double diversity_exhaustive(const Eigen::MatrixXd& set, double training_diversity);

enum class ControlMode { vary_id_fix_exp, vary_exp_fix_id };

struct ControlledPair {
  LatentCode a;
  LatentCode b;
};

struct ControlledDiversity {
  double value = 0.0;     // generated / training
  double generated = 0.0;
  double training = 0.0;
  std::vector<ControlledPair> pairs;
};

struct ControlledConfig {
  ControlMode mode = ControlMode::vary_id_fix_exp;
  std::size_t n_pairs = 1000;
  std::uint64_t seed = 0;
  double level = 1.0;       // expression intensity of both codes in a pair
  bool keep_pairs = false;  // record the codes of every pair
};

// Generated pairs share z_noise and either z_exp (DIV-ID) or z_id (DIV-EXP)
// and differ in the other factor, both drawn from distinct classes.
// training is the same statistic on training pairs with equal expression and
// different identity (DIV-ID) or the reverse (DIV-EXP).
ControlledDiversity diversity_controlled(const ShapeGAN& gan, const SAEModel& sae, const Dataset& training,
                                         const ControlledConfig& config);

// Mean over random training pairs that share one factor and differ in the other.
double controlled_training_diversity(const Dataset& training, ControlMode mode, std::size_t n_pairs, Rng& rng);

enum class SpecificityMode { nearest, mean_over_training };

// Over the first n generated columns (all when n is 0 or larger than the set):
// nearest takes each sample's closest training mesh, mean_over_training the
// mean over all training meshes.
double specificity(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& training, std::size_t n,
                   SpecificityMode mode);

struct ClusterStats {
  std::vector<int> labels;                // distinct labels, ascending
  Eigen::MatrixXd centroid_distances;     // between label centroids
  std::vector<double> intra;              // per label: mean distance to own centroid
  std::vector<double> nearest_other;      // per label: distance to the closest other centroid
  double mean_intra = 0.0;
  double mean_nearest_other = 0.0;
  double separability = 0.0;              // mean_nearest_other / mean_intra, capped
  double probe_accuracy = 0.0;            // linear probe on a seeded half split
  double nearest_centroid_accuracy = 0.0;
};

inline constexpr double kSeparabilityCap = 1e6;

// embeddings is d x n. Every label needs at least two samples.
ClusterStats cluster_stats(const Eigen::MatrixXd& embeddings, std::span<const int> labels, std::uint64_t seed = 0);

struct PCAProjection {
  Eigen::MatrixXd coordinates;   // 2 x n
  Eigen::VectorXd eigenvalues;   // covariance eigenvalues, descending
  Eigen::MatrixXd components;    // d x 2
  Eigen::VectorXd mean;
  double total_variance = 0.0;
};

// Each component's largest-magnitude loading is made positive.
PCAProjection pca_project_2d(const Eigen::MatrixXd& embeddings);

// CSV rows sample_id,label,x,y.
void write_pca_csv(const PCAProjection& pca, std::span<const int> labels, const std::filesystem::path& path);

struct ReconstructionReport {
  std::size_t count = 0;
  double mean = 0.0;     // per-sample mean vertex distance, mean over samples
  double median = 0.0;
  double mean_vertex_l1 = 0.0;  // per-vertex |dx| + |dy| + |dz|, mean over samples and vertices
};

// Distances between the samples and decode(encode(x)); multiplied by unit_scale.
ReconstructionReport reconstruction_report(const SAEModel& sae, const Eigen::MatrixXd& x, double unit_scale = 1.0);

struct MetricReport {
  double div = 0.0;
  double div_id = 0.0;
  double div_exp = 0.0;
  double sp = 0.0;                // SpecificityMode::nearest, original units
  double sp_mean_over_training = 0.0;
  std::string sp_units = "normalized";
  std::size_t n_pairs = 0;
  std::size_t n_specificity = 0;
  std::size_t n_generated = 0;
  double level = 1.0;
  std::uint64_t seed = 0;
  std::string id_mode;
  double training_diversity = 0.0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

struct MetricConfig {
  std::size_t n_generated = 1000;
  std::size_t n_pairs = 10000;
  std::size_t n_specificity = 1000;
  std::size_t n_controlled_pairs = 1000;
  double level = 1.0;
  std::uint64_t seed = 0;
};

// Generated meshes come from batch_generate with random classes at the given
// level. Training is the (normalized) dataset the models were trained on.
MetricReport evaluate(const SAEModel& sae, const ShapeGAN& gan, const Dataset& training, const MetricConfig& config);

}  // namespace ffl
