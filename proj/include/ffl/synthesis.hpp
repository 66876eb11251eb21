#pragma once

// Generative operations on a trained (SAE, GAN) pair: decode latent codes to
// meshes, interpolate, scale and mix expression codes, and transfer
// expression style by feeding G_exp a different identity code than G_id.

#include <filesystem>
#include <optional>
#include <vector>

#include "ffl/gan.hpp"
#include "ffl/mesh.hpp"
#include "ffl/sae.hpp"

namespace ffl {

// Throws DimensionError naming both sides when the GAN's outputs do not fit
// the SAE decoder, or when the topology's vertex count differs from the SAE's.
void check_compatible(const SAEModel& sae, const ShapeGAN& gan);
void check_compatible(const SAEModel& sae, const ShapeGAN& gan, const Topology& topology);

// A code whose G_exp branch may see a different identity code.
struct StyledCode {
  LatentCode code;
  Eigen::VectorXd exp_z_id;  // identity code fed to G_exp
};

struct Generated {
  EmbeddingPair embedding;
  Mesh mesh;
};

struct GenerateOptions {
  // Maps the decoded mesh back to the dataset's original units.
  std::optional<Normalization> denormalize;
};

EmbeddingPair generate_embedding(const ShapeGAN& gan, const LatentCode& code);
EmbeddingPair generate_embedding(const ShapeGAN& gan, const StyledCode& code);

Generated generate(const SAEModel& sae, const ShapeGAN& gan, const LatentCode& code, TopologyPtr topology,
                   const GenerateOptions& options = {});
Generated generate(const SAEModel& sae, const ShapeGAN& gan, const StyledCode& code, TopologyPtr topology,
                   const GenerateOptions& options = {});

enum InterpolationTarget : unsigned {
  target_z_id = 1u,
  target_z_exp = 2u,
  target_z_noise = 4u,
  target_all = 7u,
};

enum class InterpolationSpace { code, embedding };

struct InterpolationPath {
  LatentCode a;
  LatentCode b;
  int steps = 2;
  unsigned targets = target_all;
  InterpolationSpace space = InterpolationSpace::code;
};

// Codes at t = i / (steps - 1). Untargeted components stay equal to a's, and
// the first and last codes are a and the targeted mix of b exactly.
std::vector<LatentCode> interpolate_codes(const InterpolationPath& path);

// In embedding space the endpoint embeddings are generated and mixed linearly
// instead of the codes.
std::vector<Generated> interpolate(const SAEModel& sae, const ShapeGAN& gan, const InterpolationPath& path,
                                   TopologyPtr topology, const GenerateOptions& options = {});

// z_exp becomes level * e_k. Throws on a negative level or a bad index.
LatentCode set_intensity(const LatentCode& code, int expression, double level);
// z_exp becomes the given weights, which need not sum to one.
LatentCode mix_expressions(const LatentCode& code, const ExpressionCode& weights);
StyledCode style_edit(const LatentCode& code, const Eigen::VectorXd& donor_z_id);

struct IdPolicy {
  enum class Kind { random_class, fixed_class, fresh_gaussian, shared_fresh } kind = Kind::random_class;
  int identity = 0;  // fixed_class only
};

struct ExpPolicy {
  enum class Kind { random_class, fixed_class, neutral } kind = Kind::random_class;
  int expression = 0;  // fixed_class only
  double level = 1.0;
};

struct BatchSpec {
  std::size_t count = 0;
  IdPolicy id;
  ExpPolicy exp;
  std::uint64_t seed = 0;
};

// Generated samples as a dataset plus the codes used. Class-conditioned
// samples keep their class labels; each fresh Gaussian identity gets its own
// label after the trained classes.
struct GeneratedBatch {
  Dataset dataset;
  std::vector<LatentCode> codes;
  EmbeddingBatch embeddings;
};

GeneratedBatch batch_generate(const SAEModel& sae, const ShapeGAN& gan, TopologyPtr topology, const BatchSpec& spec,
                              const GenerateOptions& options = {});

// Codes for batch_generate, in order. Exposed so callers can reproduce them.
std::vector<LatentCode> batch_codes(const ShapeGAN& gan, const BatchSpec& spec);

// Batched decode of codes, columns in code order.
EmbeddingBatch generate_embeddings(const ShapeGAN& gan, std::span<const LatentCode> codes);

nlohmann::json code_to_json(const LatentCode& code);
LatentCode code_from_json(const nlohmann::json& j);

}  // namespace ffl
