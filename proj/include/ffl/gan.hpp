#pragma once

// Conditional GAN over the SAE embedding space. G_id maps (z_id, z_noise) to
// an identity embedding, G_exp maps (z_id, z_exp, z_noise) to an expression
// embedding, and one discriminator trunk on the concatenated embedding feeds
// three heads: real/fake, identity class and expression class.
//
// With L_s, L_id and L_exp the log-likelihoods of the correct source and
// class labels over a real and a fake batch, D minimises -(L_s + L_id + L_exp).
// The generators use the non-saturating source term: G_id minimises
// -log p(s=1 | fake) - log p(c_id | fake) and G_exp the same with the
// expression class.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ffl/checkpoint.hpp"
#include "ffl/mesh.hpp"
#include "ffl/sae.hpp"
#include "ffl/tensor.hpp"

namespace ffl {

// gaussian: each identity class owns a fixed N(0, I) code drawn at model
// creation, and fresh draws give novel identities. one_hot: z_id is the
// one-hot class vector.
enum class IdMode { gaussian, one_hot };

std::string to_string(IdMode mode);
IdMode id_mode_from_string(const std::string& s);

struct GANArchitecture {
  Index vertex_count = 0;  // of the SAE whose embeddings the GAN models; 0 if unknown
  int n_id = 0;
  int n_exp = 0;
  Index id_dim = 100;
  Index exp_dim = 30;
  IdMode id_mode = IdMode::gaussian;
  Index gaussian_z_id_dim = 20;
  Index z_noise_dim = 5;
  std::vector<Index> generator_hidden{512, 512, 1024};
  std::vector<Index> discriminator_hidden{1024, 512, 256};

  Index z_id_dim() const { return id_mode == IdMode::one_hot ? n_id : gaussian_z_id_dim; }
  Index z_exp_dim() const { return n_exp; }
};

struct ShapeGAN {
  GANArchitecture arch;
  DenseNet<double> g_id;      // z_id + z_noise -> id_dim
  DenseNet<double> g_exp;     // z_id + z_exp + z_noise -> exp_dim
  DenseNet<double> d_common;  // id_dim + exp_dim -> trunk, leaky-ReLU throughout
  DenseNet<double> d_source;  // trunk -> 1
  DenseNet<double> d_id;      // trunk -> n_id
  DenseNet<double> d_exp;     // trunk -> n_exp
  Eigen::MatrixXd identity_codes;  // z_id_dim x n_id, gaussian mode only
};

ShapeGAN make_gan(const GANArchitecture& arch);
// Random weights and, in gaussian mode, the per-identity code table.
void initialize(ShapeGAN& model, Rng& rng);

struct LatentCode {
  Eigen::VectorXd z_id;
  ExpressionCode z_exp;
  Eigen::VectorXd z_noise;

  friend bool operator==(const LatentCode& a, const LatentCode& b) {
    return a.z_id.size() == b.z_id.size() && a.z_noise.size() == b.z_noise.size() && a.z_id == b.z_id &&
           a.z_exp == b.z_exp && a.z_noise == b.z_noise;
  }
};

// Throws DimensionError when the code does not fit the model.
void check_code(const ShapeGAN& model, const LatentCode& code);

// Column-batched codes plus the conditioning labels used by the class terms.
struct CodeBatch {
  Eigen::MatrixXd z_id;     // z_id_dim x n
  Eigen::MatrixXd z_exp;    // n_exp x n
  Eigen::MatrixXd z_noise;  // z_noise_dim x n
  std::vector<int> id_labels;
  std::vector<int> exp_labels;

  Index size() const { return z_id.cols(); }
};

Eigen::MatrixXd g_id_forward(const ShapeGAN& model, const Eigen::MatrixXd& z_noise, const Eigen::MatrixXd& z_id);
Eigen::MatrixXd g_exp_forward(const ShapeGAN& model, const Eigen::MatrixXd& z_noise, const Eigen::MatrixXd& z_id,
                              const Eigen::MatrixXd& z_exp);

struct DiscriminatorOutput {
  Eigen::MatrixXd source;      // 1 x n logits, real = 1
  Eigen::MatrixXd id_logits;   // n_id x n
  Eigen::MatrixXd exp_logits;  // n_exp x n
};

DiscriminatorOutput d_forward(const ShapeGAN& model, const Eigen::MatrixXd& mu_id, const Eigen::MatrixXd& mu_exp);
DiscriminatorOutput d_forward(const ShapeGAN& model, const EmbeddingPair& mu);

struct RealBatch {
  Eigen::MatrixXd mu_id;
  Eigen::MatrixXd mu_exp;
  std::vector<int> id_labels;
  std::vector<int> exp_labels;

  Index size() const { return mu_id.cols(); }
};

// Log-likelihood objectives, each the sum of a real-batch mean and a
// fake-batch mean.
struct GANObjectives {
  double source = 0.0;
  double identity = 0.0;
  double expression = 0.0;
};

struct DiscriminatorGradient {
  NetGradient<double> common, source, id, exp;
};

struct GANLoss {
  GANObjectives objectives;
  double d_loss = 0.0;      // -(L_s + L_id + L_exp)
  double g_id_loss = 0.0;   // non-saturating source term minus fake L_id term
  double g_exp_loss = 0.0;  // non-saturating source term minus fake L_exp term
  DiscriminatorGradient d_grad;
  NetGradient<double> g_id_grad;
  NetGradient<double> g_exp_grad;
};

GANLoss gan_losses(const ShapeGAN& model, const RealBatch& real, const CodeBatch& codes);

struct GANTrainConfig {
  int steps = 3000;
  int batch_size = 64;
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int d_steps = 1;
  int log_every = 100;
  std::uint64_t seed = 2;
  IdMode id_mode = IdMode::gaussian;
  Index gaussian_z_id_dim = 20;
  Index z_noise_dim = 5;
  std::vector<Index> generator_hidden{512, 512, 1024};
  std::vector<Index> discriminator_hidden{1024, 512, 256};

  void validate() const;
};

struct GANLogEntry {
  int step = 0;
  double d_loss = 0.0;
  double g_id_loss = 0.0;
  double g_exp_loss = 0.0;
  double fake_id_accuracy = 0.0;   // D's identity head on the fake batch
  double fake_exp_accuracy = 0.0;  // D's expression head on the fake batch
};

struct GANTrainResult {
  ShapeGAN model;
  std::vector<GANLogEntry> log;
};

// Real embeddings are the frozen SAE's encodings of the given samples (all
// samples when indices is empty), labelled with their dataset labels.
GANTrainResult train_gan(const SAEModel& sae, const Dataset& dataset, const GANTrainConfig& config,
                         std::span<const std::size_t> indices = {});

// Identity part of a sampling request.
struct IdSpec {
  enum class Kind { fresh_gaussian, identity_class };
  Kind kind = Kind::fresh_gaussian;
  int identity = 0;

  static IdSpec fresh() { return {Kind::fresh_gaussian, 0}; }
  static IdSpec of_class(int k) { return {Kind::identity_class, k}; }
};

// z_noise ~ N(0, I); z_id per spec; z_exp = the given weights.
LatentCode sample_code(const ShapeGAN& model, const IdSpec& id, const ExpressionCode& exp, Rng& rng);
Eigen::VectorXd identity_code(const ShapeGAN& model, const IdSpec& id, Rng& rng);

Checkpoint to_checkpoint(const ShapeGAN& model);
ShapeGAN gan_from_checkpoint(const Checkpoint& ckpt);
void save_gan(const ShapeGAN& model, const std::filesystem::path& path);
ShapeGAN load_gan(const std::filesystem::path& path);

}  // namespace ffl
