#pragma once

#include <cstdint>

#include "ffl/mesh.hpp"

namespace ffl {

// Factor-controlled stand-in for a registered face-scan corpus. Every sample
// of identity i with expression weights w is
//
//   template + B_id c_i + sum_e w_e * (X_e .* (1 + cross * s_i * F)) + noise
//
// where B_id is a rank-K identity basis, c_i and the style scalar s_i are
// fixed per identity, X_e are expression blendshapes and F is a per-vertex
// style field shared by all identities. All fields are smooth and seeded.
struct SyntheticSpec {
  Index vertex_count = 300;
  int n_id = 24;
  int n_exp = 6;
  int samples_per_cell = 10;
  int identity_rank = 8;
  double noise_sigma = 0.05;     // mm, per coordinate
  double cross_strength = 0.5;   // 0 disables identity-specific expression style
  double identity_scale = 8.0;   // mm, RMS per-vertex displacement of one basis field
  double expression_scale = 10.0; // mm, RMS per-vertex displacement of one blendshape
  double face_size = 80.0;       // mm, width of the template
  std::uint64_t seed = 7;

  void validate() const;
};

// Ground-truth factors behind a synthetic dataset.
struct SyntheticFactors {
  Eigen::VectorXd template_shape;        // 3V
  Eigen::MatrixXd identity_basis;        // 3V x K, unit RMS per column
  Eigen::MatrixXd identity_coefficients; // K x n_id
  Eigen::VectorXd style;                 // n_id, in [-1, 1]
  Eigen::VectorXd style_field;           // V, max |F| = 1
  Eigen::MatrixXd blendshapes;           // 3V x n_exp, unit RMS per column
  double cross_strength = 0.0;

  // Expression displacement of identity i for the given weights.
  Eigen::VectorXd expression_displacement(int identity, const Eigen::VectorXd& weights) const;
  // Noise-free vertices.
  Eigen::VectorXd clean_shape(int identity, const Eigen::VectorXd& weights) const;
};

struct SyntheticDataset {
  Dataset dataset;
  SyntheticFactors factors;
};

// Deterministic in the spec. Samples are ordered identity-major, then
// expression, then repetition; expression codes are one-hot.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Mean per-vertex Euclidean norm of the canonical (weight 1) expression
// displacement, averaged over all (identity, expression) cells.
double mean_expression_displacement(const SyntheticFactors& factors, int n_id, int n_exp);

// Regular grid connectivity for vertex_count points laid out row-major on a
// ceil(sqrt(V))-wide grid; quads split into two triangles.
TopologyPtr grid_topology(Index vertex_count);

}  // namespace ffl
