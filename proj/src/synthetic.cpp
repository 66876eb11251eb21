#include "ffl/synthetic.hpp"

#include <cmath>

namespace ffl {

void SyntheticSpec::validate() const {
  if (vertex_count < 3) throw std::invalid_argument("synthetic: vertex_count must be at least 3");
  if (n_id <= 0 || n_exp <= 0 || samples_per_cell <= 0 || identity_rank <= 0)
    throw std::invalid_argument("synthetic: counts must be positive");
  if (noise_sigma < 0 || cross_strength < 0 || identity_scale < 0 || expression_scale < 0)
    throw std::invalid_argument("synthetic: scales must be nonnegative");
  if (!(face_size > 0)) throw std::invalid_argument("synthetic: face_size must be positive");
}

namespace {

Index grid_width(Index v) {
  auto w = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(v))));
  return std::max<Index>(w, 2);
}

// Grid coordinates in [-1, 1] x [-1.25, 1.25].
Eigen::MatrixX2d grid_uv(Index v) {
  const Index w = grid_width(v);
  const Index rows = (v + w - 1) / w;
  Eigen::MatrixX2d uv(v, 2);
  for (Index i = 0; i < v; ++i) {
    const double col = static_cast<double>(i % w);
    const double row = static_cast<double>(i / w);
    uv(i, 0) = 2.0 * col / static_cast<double>(w - 1) - 1.0;
    uv(i, 1) = rows > 1 ? 1.25 * (2.0 * row / static_cast<double>(rows - 1) - 1.0) : 0.0;
  }
  return uv;
}

// Sum of Gaussian bumps with random centres and amplitudes; one independent
// field per output channel. Returns V x channels.
Eigen::MatrixXd smooth_field(const Eigen::MatrixX2d& uv, int channels, int bumps, double width, Rng& rng) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(uv.rows(), channels);
  for (int b = 0; b < bumps; ++b) {
    const double cu = rng.uniform(-1.0, 1.0);
    const double cv = rng.uniform(-1.25, 1.25);
    Eigen::VectorXd amp(channels);
    for (int c = 0; c < channels; ++c) amp(c) = rng.normal();
    for (Index i = 0; i < uv.rows(); ++i) {
      const double du = uv(i, 0) - cu;
      const double dv = uv(i, 1) - cv;
      const double g = std::exp(-(du * du + dv * dv) / (2.0 * width * width));
      f.row(i) += g * amp.transpose();
    }
  }
  return f;
}

// V x 3 field flattened and rescaled to unit RMS per-vertex norm.
Eigen::VectorXd unit_rms(const Eigen::MatrixXd& field) {
  const Index v = field.rows();
  Eigen::VectorXd flat(3 * v);
  for (Index i = 0; i < v; ++i)
    for (int k = 0; k < 3; ++k) flat(3 * i + k) = field(i, k);
  const double rms = std::sqrt(flat.squaredNorm() / static_cast<double>(v));
  if (rms > 0) flat /= rms;
  return flat;
}

}  // namespace

TopologyPtr grid_topology(Index vertex_count) {
  const Index w = grid_width(vertex_count);
  std::vector<std::uint32_t> faces;
  for (Index i = 0; i < vertex_count; ++i) {
    if (i % w == w - 1) continue;
    const Index a = i, b = i + 1, c = i + w, d = i + w + 1;
    if (d >= vertex_count) continue;
    for (Index idx : {a, c, b, b, c, d}) faces.push_back(static_cast<std::uint32_t>(idx));
  }
  auto topo = std::make_shared<Topology>();
  topo->id = "grid-" + std::to_string(vertex_count);
  topo->vertex_count = vertex_count;
  topo->faces = Eigen::Map<FaceMatrix>(faces.data(), static_cast<Index>(faces.size() / 3), 3);
  return topo;
}

Eigen::VectorXd SyntheticFactors::expression_displacement(int identity, const Eigen::VectorXd& weights) const {
  const Index v = style_field.size();
  Eigen::VectorXd modulation(3 * v);
  const double s = style(identity);
  for (Index i = 0; i < v; ++i) modulation.segment<3>(3 * i).setConstant(1.0 + cross_strength * s * style_field(i));
  Eigen::VectorXd disp = Eigen::VectorXd::Zero(3 * v);
  for (Index e = 0; e < weights.size(); ++e)
    if (weights(e) != 0.0) disp += weights(e) * blendshapes.col(e).cwiseProduct(modulation);
  return disp;
}

Eigen::VectorXd SyntheticFactors::clean_shape(int identity, const Eigen::VectorXd& weights) const {
  return template_shape + identity_basis * identity_coefficients.col(identity) +
         expression_displacement(identity, weights);
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index v = spec.vertex_count;
  Rng rng(spec.seed);
  Rng field_rng = rng.split();
  Rng factor_rng = rng.split();
  Rng noise_rng = rng.split();

  const Eigen::MatrixX2d uv = grid_uv(v);
  SyntheticFactors f;
  f.cross_strength = spec.cross_strength;

  // face-like dome with a nose ridge, millimetres
  const double half = spec.face_size / 2.0;
  f.template_shape.resize(3 * v);
  for (Index i = 0; i < v; ++i) {
    const double x = uv(i, 0), y = uv(i, 1);
    const double dome = 0.45 * std::exp(-(x * x + 0.6 * y * y) / 0.9);
    const double nose = 0.18 * std::exp(-(x * x) / 0.02 - (y - 0.1) * (y - 0.1) / 0.25);
    f.template_shape(3 * i + 0) = half * x;
    f.template_shape(3 * i + 1) = half * y;
    f.template_shape(3 * i + 2) = half * (dome + nose);
  }

  f.identity_basis.resize(3 * v, spec.identity_rank);
  for (int k = 0; k < spec.identity_rank; ++k)
    f.identity_basis.col(k) = unit_rms(smooth_field(uv, 3, 6, 0.55, field_rng));
  f.blendshapes.resize(3 * v, spec.n_exp);
  for (int e = 0; e < spec.n_exp; ++e)
    f.blendshapes.col(e) = unit_rms(smooth_field(uv, 3, 3, 0.35, field_rng));
  {
    Eigen::VectorXd field = smooth_field(uv, 1, 4, 0.5, field_rng).col(0);
    const double peak = field.cwiseAbs().maxCoeff();
    f.style_field = peak > 0 ? Eigen::VectorXd(field / peak) : field;
  }
  f.blendshapes *= spec.expression_scale;

  const double coeff_scale = spec.identity_scale / std::sqrt(static_cast<double>(spec.identity_rank));
  f.identity_coefficients.resize(spec.identity_rank, spec.n_id);
  f.style.resize(spec.n_id);
  for (int i = 0; i < spec.n_id; ++i) {
    for (int k = 0; k < spec.identity_rank; ++k) f.identity_coefficients(k, i) = coeff_scale * factor_rng.normal();
    f.style(i) = factor_rng.uniform(-1.0, 1.0);
  }

  SyntheticDataset out;
  Dataset& d = out.dataset;
  d.topology = grid_topology(v);
  d.n_id = spec.n_id;
  d.n_exp = spec.n_exp;
  d.units = "mm";
  for (int e = 0; e < spec.n_exp; ++e) d.expression_names.push_back("expression_" + std::to_string(e));
  d.samples.reserve(static_cast<std::size_t>(spec.n_id) * spec.n_exp * spec.samples_per_cell);
  for (int i = 0; i < spec.n_id; ++i) {
    for (int e = 0; e < spec.n_exp; ++e) {
      const ExpressionCode code = ExpressionCode::one_hot(spec.n_exp, e);
      const Eigen::VectorXd clean = f.clean_shape(i, code.weights);
      for (int r = 0; r < spec.samples_per_cell; ++r) {
        Eigen::VectorXd x = clean;
        if (spec.noise_sigma > 0)
          for (Index k = 0; k < x.size(); ++k) x(k) += spec.noise_sigma * noise_rng.normal();
        d.samples.push_back({Mesh::from_flat(x, d.topology), i, code});
      }
    }
  }
  out.factors = std::move(f);
  return out;
}

double mean_expression_displacement(const SyntheticFactors& factors, int n_id, int n_exp) {
  double total = 0.0;
  for (int i = 0; i < n_id; ++i) {
    for (int e = 0; e < n_exp; ++e) {
      const Eigen::VectorXd disp =
          factors.expression_displacement(i, ExpressionCode::one_hot(n_exp, e).weights);
      const Index v = disp.size() / 3;
      double per_vertex = 0.0;
      for (Index k = 0; k < v; ++k) per_vertex += disp.segment<3>(3 * k).norm();
      total += per_vertex / static_cast<double>(v);
    }
  }
  return total / (static_cast<double>(n_id) * n_exp);
}

}  // namespace ffl
