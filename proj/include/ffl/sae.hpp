#pragma once

// Supervised auto-encoder: two parameter-disjoint encoders map a flattened
// mesh to an identity embedding and an expression embedding, a single
// decoder reconstructs the mesh from their concatenation, and bias-free
// linear heads classify each embedding. Trained on
//
//   L = |x - D(mu_id, mu_exp)|_1 + CE(W_id mu_id, y_id) + CE(W_exp mu_exp, y_exp)
//
// with the L1 term averaged over coordinates and every term averaged over
// the batch. The unsupervised baseline drops both CE terms.

#include <filesystem>
#include <vector>

#include "ffl/checkpoint.hpp"
#include "ffl/mesh.hpp"
#include "ffl/tensor.hpp"

namespace ffl {

struct SAEArchitecture {
  Index vertex_count = 0;
  int n_id = 0;
  int n_exp = 0;
  Index id_dim = 100;
  Index exp_dim = 30;
  std::vector<Index> encoder_hidden{1024, 512};
  std::vector<Index> decoder_hidden{512, 1024};

  Index input_dim() const { return 3 * vertex_count; }
  Index embedding_dim() const { return id_dim + exp_dim; }
};

struct SAEModel {
  SAEArchitecture arch;
  DenseNet<double> encoder_id;
  DenseNet<double> encoder_exp;
  DenseNet<double> decoder;
  DenseNet<double> head_id;   // id_dim -> n_id, no bias
  DenseNet<double> head_exp;  // exp_dim -> n_exp, no bias
};

// Zero-valued parameters.
SAEModel make_sae(const SAEArchitecture& arch);
void initialize(SAEModel& model, Rng& rng);

struct EmbeddingPair {
  Eigen::VectorXd mu_id;
  Eigen::VectorXd mu_exp;

  Eigen::VectorXd concatenated() const {
    Eigen::VectorXd v(mu_id.size() + mu_exp.size());
    v << mu_id, mu_exp;
    return v;
  }
  friend bool operator==(const EmbeddingPair& a, const EmbeddingPair& b) {
    return a.mu_id.size() == b.mu_id.size() && a.mu_exp.size() == b.mu_exp.size() && a.mu_id == b.mu_id &&
           a.mu_exp == b.mu_exp;
  }
};

// Column-batched embeddings.
struct EmbeddingBatch {
  Eigen::MatrixXd mu_id;   // id_dim x n
  Eigen::MatrixXd mu_exp;  // exp_dim x n

  Eigen::MatrixXd concatenated() const {
    Eigen::MatrixXd m(mu_id.rows() + mu_exp.rows(), mu_id.cols());
    m << mu_id, mu_exp;
    return m;
  }
  EmbeddingPair column(Index c) const { return {mu_id.col(c), mu_exp.col(c)}; }
};

struct SAEOutput {
  EmbeddingBatch embedding;
  Eigen::MatrixXd reconstruction;  // 3V x n
  Eigen::MatrixXd id_logits;       // n_id x n
  Eigen::MatrixXd exp_logits;      // n_exp x n
};

SAEOutput sae_forward(const SAEModel& model, const Eigen::MatrixXd& x);

EmbeddingBatch encode(const SAEModel& model, const Eigen::MatrixXd& x);
EmbeddingPair encode(const SAEModel& model, const Mesh& mesh);
// Flattened reconstruction (3V x n) of concatenated embeddings.
Eigen::MatrixXd decode(const SAEModel& model, const EmbeddingBatch& embedding);
Mesh decode(const SAEModel& model, const EmbeddingPair& embedding, TopologyPtr topology);

struct SAELossWeights {
  double reconstruction = 1.0;
  double identity = 1.0;
  double expression = 1.0;
};

struct SAELossTerms {
  double reconstruction = 0.0;
  double identity = 0.0;
  double expression = 0.0;
  double total = 0.0;
};

struct SAEGradient {
  NetGradient<double> encoder_id, encoder_exp, decoder, head_id, head_exp;
};

struct SAELoss {
  SAELossTerms terms;
  SAEGradient grad;
};

// x is 3V x n; expression_targets is n_exp x n with one-hot columns.
// Terms with zero weight are still evaluated but contribute no gradient.
SAELoss sae_loss(const SAEModel& model, const Eigen::MatrixXd& x, std::span<const int> identity_labels,
                 const Eigen::MatrixXd& expression_targets, const SAELossWeights& weights = {});
SAELoss sae_loss(const SAEModel& model, const FaceSample& sample, const SAELossWeights& weights = {});

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

// Per identity, a seeded shuffle of its samples puts round(fraction * count)
// of them (at least one when the identity has two or more) into heldout.
DataSplit split_by_identity(const Dataset& dataset, double heldout_fraction, std::uint64_t seed);

struct SAETrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 1e-4;
  // Cosine schedule from learning_rate down to learning_rate * final_lr_fraction
  // over the epochs; 1 keeps the rate constant.
  double final_lr_fraction = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  SAELossWeights weights;
  std::uint64_t seed = 1;
  double heldout_fraction = 0.2;
  bool supervised = true;

  void validate() const;
};

// Learning rate used during the given 1-based epoch.
double scheduled_rate(const SAETrainConfig& config, int epoch);

struct SAEEpochLog {
  int epoch = 0;
  SAELossTerms train;  // batch-size weighted mean over the epoch
};

struct SAETrainResult {
  SAEModel model;
  std::vector<SAEEpochLog> log;
  DataSplit split;
};

// initial, when given, must match the dataset's dimensions; otherwise a
// fresh model with the reference architecture is initialised from the seed.
SAETrainResult train_sae(const Dataset& dataset, const SAETrainConfig& config,
                         const SAEArchitecture* architecture = nullptr);
SAETrainResult train_unsupervised_ae(const Dataset& dataset, SAETrainConfig config,
                                     const SAEArchitecture* architecture = nullptr);

struct HeadAccuracy {
  double identity = 0.0;
  double expression = 0.0;
};

HeadAccuracy head_accuracy(const SAEModel& model, const Dataset& dataset, std::span<const std::size_t> indices);

// Class predictions of the frozen heads for flattened meshes.
std::vector<int> classify_identity(const SAEModel& model, const Eigen::MatrixXd& x);
std::vector<int> classify_expression(const SAEModel& model, const Eigen::MatrixXd& x);

Checkpoint to_checkpoint(const SAEModel& model, const std::string& kind = "sae");
SAEModel sae_from_checkpoint(const Checkpoint& ckpt);
void save_sae(const SAEModel& model, const std::filesystem::path& path, const std::string& kind = "sae");
SAEModel load_sae(const std::filesystem::path& path);

}  // namespace ffl
