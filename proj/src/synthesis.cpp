#include "ffl/synthesis.hpp"

#include <cmath>
#include <algorithm>

namespace ffl {

void check_compatible(const SAEModel& sae, const ShapeGAN& gan) {
  const auto& s = sae.arch;
  const auto& g = gan.arch;
  if (s.id_dim != g.id_dim || s.exp_dim != g.exp_dim)
    throw DimensionError("SAE embedding dims (" + std::to_string(s.id_dim) + ", " + std::to_string(s.exp_dim) +
                         ") differ from GAN output dims (" + std::to_string(g.id_dim) + ", " +
                         std::to_string(g.exp_dim) + ")");
  if (s.n_id != g.n_id || s.n_exp != g.n_exp)
    throw DimensionError("SAE classes (n_id " + std::to_string(s.n_id) + ", n_exp " + std::to_string(s.n_exp) +
                         ") differ from GAN classes (n_id " + std::to_string(g.n_id) + ", n_exp " +
                         std::to_string(g.n_exp) + ")");
  if (g.vertex_count != 0 && g.vertex_count != s.vertex_count)
    throw DimensionError("GAN was trained against V = " + std::to_string(g.vertex_count) + ", SAE decodes V = " +
                         std::to_string(s.vertex_count));
}

void check_compatible(const SAEModel& sae, const ShapeGAN& gan, const Topology& topology) {
  check_compatible(sae, gan);
  if (topology.vertex_count != sae.arch.vertex_count)
    throw DimensionError("topology has V = " + std::to_string(topology.vertex_count) + ", SAE decodes V = " +
                         std::to_string(sae.arch.vertex_count));
}

EmbeddingPair generate_embedding(const ShapeGAN& gan, const LatentCode& code) {
  return generate_embedding(gan, StyledCode{code, code.z_id});
}

EmbeddingPair generate_embedding(const ShapeGAN& gan, const StyledCode& styled) {
  check_code(gan, styled.code);
  if (styled.exp_z_id.size() != gan.arch.z_id_dim())
    throw DimensionError("donor z_id has length " + std::to_string(styled.exp_z_id.size()) + ", model expects " +
                         std::to_string(gan.arch.z_id_dim()));
  const auto& c = styled.code;
  const Eigen::MatrixXd noise = c.z_noise;
  EmbeddingPair e;
  e.mu_id = g_id_forward(gan, noise, Eigen::MatrixXd(c.z_id)).col(0);
  e.mu_exp = g_exp_forward(gan, noise, Eigen::MatrixXd(styled.exp_z_id), Eigen::MatrixXd(c.z_exp.weights)).col(0);
  return e;
}

namespace {

Mesh decode_mesh(const SAEModel& sae, const EmbeddingPair& e, TopologyPtr topology, const GenerateOptions& options) {
  Mesh m = decode(sae, e, std::move(topology));
  if (options.denormalize) m.vertices = options.denormalize->invert(m.vertices);
  return m;
}

void check_topology(const SAEModel& sae, const ShapeGAN& gan, const TopologyPtr& topology) {
  if (!topology) throw std::invalid_argument("generation needs a topology");
  check_compatible(sae, gan, *topology);
}

}  // namespace

Generated generate(const SAEModel& sae, const ShapeGAN& gan, const LatentCode& code, TopologyPtr topology,
                   const GenerateOptions& options) {
  return generate(sae, gan, StyledCode{code, code.z_id}, std::move(topology), options);
}

Generated generate(const SAEModel& sae, const ShapeGAN& gan, const StyledCode& code, TopologyPtr topology,
                   const GenerateOptions& options) {
  check_topology(sae, gan, topology);
  Generated g;
  g.embedding = generate_embedding(gan, code);
  g.mesh = decode_mesh(sae, g.embedding, std::move(topology), options);
  return g;
}

namespace {

LatentCode targeted_end(const InterpolationPath& p) {
  LatentCode b = p.a;
  if (p.targets & target_z_id) b.z_id = p.b.z_id;
  if (p.targets & target_z_exp) b.z_exp = p.b.z_exp;
  if (p.targets & target_z_noise) b.z_noise = p.b.z_noise;
  return b;
}

void check_path(const InterpolationPath& p) {
  if (p.steps < 2) throw std::invalid_argument("interpolation needs at least 2 steps, got " + std::to_string(p.steps));
  if (p.targets == 0 || (p.targets & ~static_cast<unsigned>(target_all)) != 0)
    throw std::invalid_argument("interpolation targets must be a nonempty subset of z_id, z_exp, z_noise");
  if (p.a.z_id.size() != p.b.z_id.size() || p.a.z_exp.size() != p.b.z_exp.size() ||
      p.a.z_noise.size() != p.b.z_noise.size())
    throw DimensionError("interpolation endpoints have different code dims");
}

template <typename V>
V lerp(const V& a, const V& b, double t) {
  return (a + t * (b - a)).eval();
}

}  // namespace

std::vector<LatentCode> interpolate_codes(const InterpolationPath& path) {
  check_path(path);
  const LatentCode b = targeted_end(path);
  std::vector<LatentCode> out;
  out.reserve(static_cast<std::size_t>(path.steps));
  for (int i = 0; i < path.steps; ++i) {
    if (i == 0) {
      out.push_back(path.a);
      continue;
    }
    if (i == path.steps - 1) {
      out.push_back(b);
      continue;
    }
    const double t = static_cast<double>(i) / static_cast<double>(path.steps - 1);
    LatentCode c;
    c.z_id = lerp(path.a.z_id, b.z_id, t);
    c.z_exp = ExpressionCode(lerp(path.a.z_exp.weights, b.z_exp.weights, t));
    c.z_noise = lerp(path.a.z_noise, b.z_noise, t);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Generated> interpolate(const SAEModel& sae, const ShapeGAN& gan, const InterpolationPath& path,
                                   TopologyPtr topology, const GenerateOptions& options) {
  check_topology(sae, gan, topology);
  std::vector<Generated> out;
  if (path.space == InterpolationSpace::code) {
    for (const auto& c : interpolate_codes(path)) out.push_back(generate(sae, gan, c, topology, options));
    return out;
  }
  check_path(path);
  const Generated ga = generate(sae, gan, path.a, topology, options);
  const Generated gb = generate(sae, gan, targeted_end(path), topology, options);
  for (int i = 0; i < path.steps; ++i) {
    if (i == 0) {
      out.push_back(ga);
    } else if (i == path.steps - 1) {
      out.push_back(gb);
    } else {
      const double t = static_cast<double>(i) / static_cast<double>(path.steps - 1);
      Generated g;
      g.embedding = {lerp(ga.embedding.mu_id, gb.embedding.mu_id, t), lerp(ga.embedding.mu_exp, gb.embedding.mu_exp, t)};
      g.mesh = decode_mesh(sae, g.embedding, topology, options);
      out.push_back(std::move(g));
    }
  }
  return out;
}

LatentCode set_intensity(const LatentCode& code, int expression, double level) {
  if (!std::isfinite(level) || level < 0.0)
    throw std::invalid_argument("intensity level must be finite and nonnegative, got " + std::to_string(level));
  const Index n = code.z_exp.size();
  if (expression < 0 || expression >= n)
    throw std::out_of_range("expression index " + std::to_string(expression) + " outside [0, " + std::to_string(n) +
                            ")");
  LatentCode out = code;
  out.z_exp = ExpressionCode(Eigen::VectorXd::Zero(n));
  out.z_exp.weights(expression) = level;
  return out;
}

LatentCode mix_expressions(const LatentCode& code, const ExpressionCode& weights) {
  if (weights.size() != code.z_exp.size())
    throw DimensionError("mix weights have length " + std::to_string(weights.size()) + ", code has " +
                         std::to_string(code.z_exp.size()));
  if (!weights.weights.allFinite() || (weights.weights.array() < 0.0).any())
    throw std::invalid_argument("mix weights must be finite and nonnegative");
  LatentCode out = code;
  out.z_exp = weights;
  return out;
}

StyledCode style_edit(const LatentCode& code, const Eigen::VectorXd& donor_z_id) {
  if (donor_z_id.size() != code.z_id.size())
    throw DimensionError("donor z_id has length " + std::to_string(donor_z_id.size()) + ", code has " +
                         std::to_string(code.z_id.size()));
  return {code, donor_z_id};
}

namespace {

// Codes plus identity labels: class index for class-conditioned samples,
// one label per distinct fresh code after the trained classes otherwise.
std::vector<LatentCode> draw_codes(const ShapeGAN& gan, const BatchSpec& spec, std::vector<int>& labels) {
  if (spec.count == 0) throw std::invalid_argument("batch_generate: count must be positive");
  const auto& a = gan.arch;
  if (spec.exp.level < 0.0 || !std::isfinite(spec.exp.level))
    throw std::invalid_argument("batch_generate: expression level must be finite and nonnegative");
  if (spec.exp.kind == ExpPolicy::Kind::fixed_class && (spec.exp.expression < 0 || spec.exp.expression >= a.n_exp))
    throw std::out_of_range("batch_generate: expression class out of range");
  if (spec.id.kind == IdPolicy::Kind::fixed_class && (spec.id.identity < 0 || spec.id.identity >= a.n_id))
    throw std::out_of_range("batch_generate: identity class out of range");

  Rng rng(spec.seed);
  std::optional<Eigen::VectorXd> shared;
  if (spec.id.kind == IdPolicy::Kind::shared_fresh) shared = identity_code(gan, IdSpec::fresh(), rng);

  std::vector<LatentCode> codes;
  codes.reserve(spec.count);
  labels.clear();
  int novel = a.n_id;
  for (std::size_t i = 0; i < spec.count; ++i) {
    LatentCode c;
    int label = 0;
    switch (spec.id.kind) {
      case IdPolicy::Kind::random_class:
        label = static_cast<int>(rng.index(static_cast<std::uint64_t>(a.n_id)));
        c.z_id = identity_code(gan, IdSpec::of_class(label), rng);
        break;
      case IdPolicy::Kind::fixed_class:
        label = spec.id.identity;
        c.z_id = identity_code(gan, IdSpec::of_class(label), rng);
        break;
      case IdPolicy::Kind::fresh_gaussian:
        label = novel++;
        c.z_id = identity_code(gan, IdSpec::fresh(), rng);
        break;
      case IdPolicy::Kind::shared_fresh:
        label = a.n_id;
        c.z_id = *shared;
        break;
    }
    labels.push_back(label);
    switch (spec.exp.kind) {
      case ExpPolicy::Kind::random_class:
        c.z_exp = ExpressionCode::one_hot(a.n_exp, static_cast<Index>(rng.index(static_cast<std::uint64_t>(a.n_exp))),
                                          spec.exp.level);
        break;
      case ExpPolicy::Kind::fixed_class:
        c.z_exp = ExpressionCode::one_hot(a.n_exp, spec.exp.expression, spec.exp.level);
        break;
      case ExpPolicy::Kind::neutral:
        c.z_exp = ExpressionCode::neutral(a.n_exp);
        break;
    }
    c.z_noise.resize(a.z_noise_dim);
    for (Index r = 0; r < a.z_noise_dim; ++r) c.z_noise(r) = rng.normal();
    codes.push_back(std::move(c));
  }
  return codes;
}

}  // namespace

std::vector<LatentCode> batch_codes(const ShapeGAN& gan, const BatchSpec& spec) {
  std::vector<int> labels;
  return draw_codes(gan, spec, labels);
}

EmbeddingBatch generate_embeddings(const ShapeGAN& gan, std::span<const LatentCode> codes) {
  const auto& a = gan.arch;
  const auto n = static_cast<Index>(codes.size());
  Eigen::MatrixXd z_id(a.z_id_dim(), n), z_exp(a.z_exp_dim(), n), z_noise(a.z_noise_dim, n);
  for (Index c = 0; c < n; ++c) {
    const auto& code = codes[static_cast<std::size_t>(c)];
    check_code(gan, code);
    z_id.col(c) = code.z_id;
    z_exp.col(c) = code.z_exp.weights;
    z_noise.col(c) = code.z_noise;
  }
  return {g_id_forward(gan, z_noise, z_id), g_exp_forward(gan, z_noise, z_id, z_exp)};
}

GeneratedBatch batch_generate(const SAEModel& sae, const ShapeGAN& gan, TopologyPtr topology, const BatchSpec& spec,
                              const GenerateOptions& options) {
  check_topology(sae, gan, topology);
  GeneratedBatch out;
  std::vector<int> id_labels;
  out.codes = draw_codes(gan, spec, id_labels);
  const auto n = static_cast<Index>(out.codes.size());
  out.embeddings.mu_id.resize(gan.arch.id_dim, n);
  out.embeddings.mu_exp.resize(gan.arch.exp_dim, n);

  Dataset& d = out.dataset;
  d.topology = topology;
  d.n_id = std::max(gan.arch.n_id, *std::max_element(id_labels.begin(), id_labels.end()) + 1);
  d.n_exp = gan.arch.n_exp;
  d.samples.reserve(out.codes.size());

  constexpr Index chunk = 1024;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    const std::span<const LatentCode> part(out.codes.data() + start, static_cast<std::size_t>(len));
    const EmbeddingBatch e = generate_embeddings(gan, part);
    out.embeddings.mu_id.middleCols(start, len) = e.mu_id;
    out.embeddings.mu_exp.middleCols(start, len) = e.mu_exp;
    Eigen::MatrixXd x = decode(sae, e);
    if (options.denormalize) x = options.denormalize->invert_flat(x);
    for (Index c = 0; c < len; ++c) {
      const auto i = static_cast<std::size_t>(start + c);
      d.samples.push_back({Mesh::from_flat(x.col(c), topology), id_labels[i], out.codes[i].z_exp});
    }
  }
  if (options.denormalize) d.normalization.reset();
  return out;
}

nlohmann::json code_to_json(const LatentCode& code) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"z_id", vec(code.z_id)}, {"z_exp", vec(code.z_exp.weights)}, {"z_noise", vec(code.z_noise)}};
}

LatentCode code_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("code must be an object");
  for (const auto& [key, value] : j.items())
    if (key != "z_id" && key != "z_exp" && key != "z_noise") throw std::invalid_argument("unknown code field '" + key + "'");
  auto vec = [&](const char* name) {
    if (!j.contains(name)) throw std::invalid_argument(std::string("code is missing '") + name + "'");
    const auto& a = j.at(name);
    if (!a.is_array()) throw std::invalid_argument(std::string("code field '") + name + "' must be an array");
    Eigen::VectorXd v(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw std::invalid_argument(std::string("code field '") + name + "' must hold numbers");
      v(static_cast<Index>(i)) = a[i].get<double>();
    }
    return v;
  };
  LatentCode c;
  c.z_id = vec("z_id");
  c.z_exp = ExpressionCode(vec("z_exp"));
  c.z_noise = vec("z_noise");
  return c;
}

}  // namespace ffl
