#include "ffl/gan.hpp"

namespace ffl {

std::string to_string(IdMode mode) { return mode == IdMode::one_hot ? "one_hot" : "gaussian"; }

IdMode id_mode_from_string(const std::string& s) {
  if (s == "gaussian") return IdMode::gaussian;
  if (s == "one_hot" || s == "one-hot") return IdMode::one_hot;
  throw std::invalid_argument("unknown identity mode '" + s + "' (expected gaussian or one_hot)");
}

namespace {

std::vector<LayerSpec> trunk_specs(Index in, std::span<const Index> hidden) {
  std::vector<LayerSpec> specs;
  Index prev = in;
  for (Index w : hidden) {
    specs.push_back({prev, w, Activation::leaky_relu, true});
    prev = w;
  }
  return specs;
}

std::vector<LayerSpec> linear_head(Index in, Index out) { return {LayerSpec{in, out, Activation::identity, true}}; }

Eigen::MatrixXd stack(std::initializer_list<const Eigen::MatrixXd*> parts) {
  Index rows = 0;
  const Index cols = (*parts.begin())->cols();
  for (const auto* p : parts) {
    if (p->cols() != cols) throw DimensionError("generator inputs have different batch sizes");
    rows += p->rows();
  }
  Eigen::MatrixXd m(rows, cols);
  Index r = 0;
  for (const auto* p : parts) {
    m.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return m;
}

}  // namespace

ShapeGAN make_gan(const GANArchitecture& arch) {
  if (arch.n_id <= 0 || arch.n_exp <= 0 || arch.id_dim <= 0 || arch.exp_dim <= 0 || arch.z_noise_dim <= 0 ||
      arch.z_id_dim() <= 0)
    throw DimensionError("GAN architecture dimensions must be positive");
  if (arch.discriminator_hidden.empty()) throw DimensionError("discriminator needs at least one trunk layer");
  ShapeGAN g;
  g.arch = arch;
  g.g_id = DenseNet<double>(mlp_specs(arch.z_id_dim() + arch.z_noise_dim, arch.generator_hidden, arch.id_dim));
  g.g_exp = DenseNet<double>(
      mlp_specs(arch.z_id_dim() + arch.z_exp_dim() + arch.z_noise_dim, arch.generator_hidden, arch.exp_dim));
  g.d_common = DenseNet<double>(trunk_specs(arch.id_dim + arch.exp_dim, arch.discriminator_hidden));
  const Index trunk = arch.discriminator_hidden.back();
  g.d_source = DenseNet<double>(linear_head(trunk, 1));
  g.d_id = DenseNet<double>(linear_head(trunk, arch.n_id));
  g.d_exp = DenseNet<double>(linear_head(trunk, arch.n_exp));
  if (arch.id_mode == IdMode::gaussian) g.identity_codes = Eigen::MatrixXd::Zero(arch.z_id_dim(), arch.n_id);
  return g;
}

void initialize(ShapeGAN& g, Rng& rng) {
  init_fan_in_uniform(g.g_id, rng);
  init_fan_in_uniform(g.g_exp, rng);
  init_fan_in_uniform(g.d_common, rng);
  init_fan_in_uniform(g.d_source, rng);
  init_fan_in_uniform(g.d_id, rng);
  init_fan_in_uniform(g.d_exp, rng);
  if (g.arch.id_mode == IdMode::gaussian) {
    for (Index c = 0; c < g.identity_codes.cols(); ++c)
      for (Index r = 0; r < g.identity_codes.rows(); ++r) g.identity_codes(r, c) = rng.normal();
  }
}

void check_code(const ShapeGAN& model, const LatentCode& code) {
  const auto& a = model.arch;
  if (code.z_id.size() != a.z_id_dim() || code.z_exp.size() != a.z_exp_dim() || code.z_noise.size() != a.z_noise_dim)
    throw DimensionError("latent code dims (z_id " + std::to_string(code.z_id.size()) + ", z_exp " +
                         std::to_string(code.z_exp.size()) + ", z_noise " + std::to_string(code.z_noise.size()) +
                         ") do not match the model (" + std::to_string(a.z_id_dim()) + ", " +
                         std::to_string(a.z_exp_dim()) + ", " + std::to_string(a.z_noise_dim) + ")");
  if (!code.z_id.allFinite() || !code.z_exp.weights.allFinite() || !code.z_noise.allFinite())
    throw NonFiniteError("latent code has non-finite entries");
}

Eigen::MatrixXd g_id_forward(const ShapeGAN& model, const Eigen::MatrixXd& z_noise, const Eigen::MatrixXd& z_id) {
  if (z_id.rows() != model.arch.z_id_dim() || z_noise.rows() != model.arch.z_noise_dim)
    throw DimensionError("G_id input dims (" + std::to_string(z_id.rows()) + ", " + std::to_string(z_noise.rows()) +
                         ") do not match the model");
  return forward(model.g_id, stack({&z_id, &z_noise}));
}

Eigen::MatrixXd g_exp_forward(const ShapeGAN& model, const Eigen::MatrixXd& z_noise, const Eigen::MatrixXd& z_id,
                              const Eigen::MatrixXd& z_exp) {
  if (z_id.rows() != model.arch.z_id_dim() || z_exp.rows() != model.arch.z_exp_dim() ||
      z_noise.rows() != model.arch.z_noise_dim)
    throw DimensionError("G_exp input dims do not match the model");
  return forward(model.g_exp, stack({&z_id, &z_exp, &z_noise}));
}

DiscriminatorOutput d_forward(const ShapeGAN& model, const Eigen::MatrixXd& mu_id, const Eigen::MatrixXd& mu_exp) {
  if (mu_id.rows() != model.arch.id_dim || mu_exp.rows() != model.arch.exp_dim)
    throw DimensionError("discriminator input is (" + std::to_string(mu_id.rows()) + " + " +
                         std::to_string(mu_exp.rows()) + "), model expects (" + std::to_string(model.arch.id_dim) +
                         " + " + std::to_string(model.arch.exp_dim) + ")");
  const Eigen::MatrixXd trunk = forward(model.d_common, stack({&mu_id, &mu_exp}));
  return {forward(model.d_source, trunk), forward(model.d_id, trunk), forward(model.d_exp, trunk)};
}

DiscriminatorOutput d_forward(const ShapeGAN& model, const EmbeddingPair& mu) {
  return d_forward(model, Eigen::MatrixXd(mu.mu_id), Eigen::MatrixXd(mu.mu_exp));
}

namespace {

struct DTrace {
  ForwardTrace<double> trunk, source, id, exp;
};

DTrace d_trace(const ShapeGAN& m, const Eigen::MatrixXd& input) {
  DTrace t;
  t.trunk = forward_trace(m.d_common, input);
  t.source = forward_trace(m.d_source, t.trunk.output());
  t.id = forward_trace(m.d_id, t.trunk.output());
  t.exp = forward_trace(m.d_exp, t.trunk.output());
  return t;
}

struct DBackward {
  DiscriminatorGradient grad;
  Eigen::MatrixXd input;
};

// Backward through the three heads and the trunk. An empty upstream matrix
// means the head receives no gradient.
DBackward d_backward(const ShapeGAN& m, const DTrace& t, const Eigen::MatrixXd& up_source, const Eigen::MatrixXd& up_id,
                     const Eigen::MatrixXd& up_exp) {
  DBackward out;
  Eigen::MatrixXd trunk_up = Eigen::MatrixXd::Zero(t.trunk.output().rows(), t.trunk.output().cols());
  auto head = [&](const DenseNet<double>& net, const ForwardTrace<double>& tr, const Eigen::MatrixXd& up,
                  NetGradient<double>& g) {
    if (up.size() == 0) {
      g = NetGradient<double>::zeros_like(net);
      return;
    }
    auto b = backward(net, tr, up);
    trunk_up += b.input;
    g = std::move(b.params);
  };
  head(m.d_source, t.source, up_source, out.grad.source);
  head(m.d_id, t.id, up_id, out.grad.id);
  head(m.d_exp, t.exp, up_exp, out.grad.exp);
  auto b = backward(m.d_common, t.trunk, trunk_up);
  out.grad.common = std::move(b.params);
  out.input = std::move(b.input);
  return out;
}

void add(DiscriminatorGradient& a, const DiscriminatorGradient& b) {
  a.common += b.common;
  a.source += b.source;
  a.id += b.id;
  a.exp += b.exp;
}


enum class LossParts { all, discriminator, generators };

DBackward d_backward_input(const ShapeGAN& m, const DTrace& t, const Eigen::MatrixXd& up_source,
                           const Eigen::MatrixXd& up_class, bool identity_head) {
  Eigen::MatrixXd trunk_up = backward_input(m.d_source, t.source, up_source);
  trunk_up += identity_head ? backward_input(m.d_id, t.id, up_class) : backward_input(m.d_exp, t.exp, up_class);
  return {{}, backward_input(m.d_common, t.trunk, trunk_up)};
}

GANLoss losses(const ShapeGAN& m, const RealBatch& real, const CodeBatch& codes, LossParts parts) {
  const auto& a = m.arch;
  const bool want_d = parts != LossParts::generators;
  const bool want_g = parts != LossParts::discriminator;
  const Index nr = real.size();
  const Index nf = codes.size();
  if ((want_d && nr == 0) || nf == 0) throw std::invalid_argument("gan_losses: empty batch");
  if (want_d && (real.mu_exp.cols() != nr || static_cast<Index>(real.id_labels.size()) != nr ||
                 static_cast<Index>(real.exp_labels.size()) != nr))
    throw DimensionError("gan_losses: real batch parts have different sizes");
  if (codes.z_exp.cols() != nf || codes.z_noise.cols() != nf || static_cast<Index>(codes.id_labels.size()) != nf ||
      static_cast<Index>(codes.exp_labels.size()) != nf)
    throw DimensionError("gan_losses: code batch parts have different sizes");
  if (codes.z_id.rows() != a.z_id_dim() || codes.z_exp.rows() != a.z_exp_dim() || codes.z_noise.rows() != a.z_noise_dim)
    throw DimensionError("gan_losses: code dims do not match the model");

  const Eigen::MatrixXd fake_id_t = one_hot_columns<double>(codes.id_labels, a.n_id);
  const Eigen::MatrixXd fake_exp_t = one_hot_columns<double>(codes.exp_labels, a.n_exp);

  const auto t_gid = forward_trace(m.g_id, stack({&codes.z_id, &codes.z_noise}));
  const auto t_gexp = forward_trace(m.g_exp, stack({&codes.z_id, &codes.z_exp, &codes.z_noise}));
  const Eigen::MatrixXd fake_in = stack({&t_gid.output(), &t_gexp.output()});
  const DTrace tf = d_trace(m, fake_in);

  const auto id_fake = softmax_cross_entropy<double>(tf.id.output(), fake_id_t);
  const auto exp_fake = softmax_cross_entropy<double>(tf.exp.output(), fake_exp_t);

  GANLoss out;
  if (want_d) {
    if (real.mu_id.rows() != a.id_dim || real.mu_exp.rows() != a.exp_dim)
      throw DimensionError("gan_losses: real embedding dims do not match the model");
    const Eigen::MatrixXd real_in = stack({&real.mu_id, &real.mu_exp});
    const DTrace tr = d_trace(m, real_in);
    const Eigen::MatrixXd real_id_t = one_hot_columns<double>(real.id_labels, a.n_id);
    const Eigen::MatrixXd real_exp_t = one_hot_columns<double>(real.exp_labels, a.n_exp);

    const auto src_real = sigmoid_cross_entropy<double>(tr.source.output(), Eigen::MatrixXd::Ones(1, nr).eval());
    const auto src_fake = sigmoid_cross_entropy<double>(tf.source.output(), Eigen::MatrixXd::Zero(1, nf).eval());
    const auto id_real = softmax_cross_entropy<double>(tr.id.output(), real_id_t);
    const auto exp_real = softmax_cross_entropy<double>(tr.exp.output(), real_exp_t);

    out.objectives.source = -(src_real.loss + src_fake.loss);
    out.objectives.identity = -(id_real.loss + id_fake.loss);
    out.objectives.expression = -(exp_real.loss + exp_fake.loss);
    out.d_loss = -(out.objectives.source + out.objectives.identity + out.objectives.expression);

    // discriminator: descend -(L_s + L_id + L_exp) with the generators fixed
    DBackward dr = d_backward(m, tr, src_real.grad, id_real.grad, exp_real.grad);
    const DBackward df = d_backward(m, tf, src_fake.grad, id_fake.grad, exp_fake.grad);
    add(dr.grad, df.grad);
    out.d_grad = std::move(dr.grad);
  }

  if (want_g) {
    // non-saturating source term plus each generator's own class term
    const auto src_gen = sigmoid_cross_entropy<double>(tf.source.output(), Eigen::MatrixXd::Ones(1, nf).eval());
    out.g_id_loss = src_gen.loss + id_fake.loss;
    out.g_exp_loss = src_gen.loss + exp_fake.loss;
    const DBackward gi = d_backward_input(m, tf, src_gen.grad, id_fake.grad, true);
    const DBackward ge = d_backward_input(m, tf, src_gen.grad, exp_fake.grad, false);
    out.g_id_grad = backward(m.g_id, t_gid, Eigen::MatrixXd(gi.input.topRows(a.id_dim))).params;
    out.g_exp_grad = backward(m.g_exp, t_gexp, Eigen::MatrixXd(ge.input.bottomRows(a.exp_dim))).params;
  }
  return out;
}

}  // namespace

GANLoss gan_losses(const ShapeGAN& m, const RealBatch& real, const CodeBatch& codes) {
  return losses(m, real, codes, LossParts::all);
}

void GANTrainConfig::validate() const {
  if (steps <= 0 || batch_size <= 0 || d_steps <= 0 || log_every <= 0)
    throw std::invalid_argument("GAN config: steps, batch size, d_steps and log_every must be positive");
  if (!(lr_generator > 0 && lr_discriminator > 0)) throw std::invalid_argument("GAN config: learning rates must be positive");
  if (gaussian_z_id_dim <= 0 || z_noise_dim <= 0) throw std::invalid_argument("GAN config: latent dims must be positive");
  if (discriminator_hidden.empty()) throw std::invalid_argument("GAN config: discriminator needs a trunk layer");
  for (Index w : generator_hidden)
    if (w <= 0) throw std::invalid_argument("GAN config: hidden widths must be positive");
  for (Index w : discriminator_hidden)
    if (w <= 0) throw std::invalid_argument("GAN config: hidden widths must be positive");
}

Eigen::VectorXd identity_code(const ShapeGAN& model, const IdSpec& id, Rng& rng) {
  const auto& a = model.arch;
  if (id.kind == IdSpec::Kind::fresh_gaussian) {
    if (a.id_mode != IdMode::gaussian)
      throw std::invalid_argument("fresh Gaussian identity codes need a gaussian-mode model");
    Eigen::VectorXd z(a.z_id_dim());
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return z;
  }
  if (id.identity < 0 || id.identity >= a.n_id)
    throw std::out_of_range("identity class " + std::to_string(id.identity) + " outside [0, " +
                            std::to_string(a.n_id) + ")");
  if (a.id_mode == IdMode::gaussian) return model.identity_codes.col(id.identity);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.n_id);
  z(id.identity) = 1.0;
  return z;
}

LatentCode sample_code(const ShapeGAN& model, const IdSpec& id, const ExpressionCode& exp, Rng& rng) {
  if (exp.size() != model.arch.z_exp_dim())
    throw DimensionError("expression weights have length " + std::to_string(exp.size()) + ", model expects " +
                         std::to_string(model.arch.z_exp_dim()));
  LatentCode code;
  code.z_id = identity_code(model, id, rng);
  code.z_exp = exp;
  code.z_noise.resize(model.arch.z_noise_dim);
  for (Index i = 0; i < code.z_noise.size(); ++i) code.z_noise(i) = rng.normal();
  return code;
}

namespace {

CodeBatch sample_training_codes(const ShapeGAN& m, Index n, Rng& rng) {
  const auto& a = m.arch;
  CodeBatch b;
  b.z_id.resize(a.z_id_dim(), n);
  b.z_exp = Eigen::MatrixXd::Zero(a.z_exp_dim(), n);
  b.z_noise.resize(a.z_noise_dim, n);
  for (Index c = 0; c < n; ++c) {
    const int id = static_cast<int>(rng.index(static_cast<std::uint64_t>(a.n_id)));
    const int e = static_cast<int>(rng.index(static_cast<std::uint64_t>(a.n_exp)));
    b.id_labels.push_back(id);
    b.exp_labels.push_back(e);
    b.z_id.col(c) = identity_code(m, IdSpec::of_class(id), rng);
    b.z_exp(e, c) = 1.0;
    for (Index r = 0; r < a.z_noise_dim; ++r) b.z_noise(r, c) = rng.normal();
  }
  return b;
}

double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  const auto pred = argmax_columns<double>(logits);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += pred[i] == labels[i];
  return labels.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(labels.size());
}

}  // namespace

GANTrainResult train_gan(const SAEModel& sae, const Dataset& dataset, const GANTrainConfig& config,
                         std::span<const std::size_t> indices) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train_gan: empty dataset");
  if (sae.arch.n_id != dataset.n_id || sae.arch.n_exp != dataset.n_exp ||
      sae.arch.vertex_count != dataset.vertex_count())
    throw DimensionError("train_gan: SAE (n_id " + std::to_string(sae.arch.n_id) + ", n_exp " +
                         std::to_string(sae.arch.n_exp) + ", V " + std::to_string(sae.arch.vertex_count) +
                         ") does not match dataset (n_id " + std::to_string(dataset.n_id) + ", n_exp " +
                         std::to_string(dataset.n_exp) + ", V " + std::to_string(dataset.vertex_count()) + ")");

  GANArchitecture arch;
  arch.vertex_count = sae.arch.vertex_count;
  arch.n_id = dataset.n_id;
  arch.n_exp = dataset.n_exp;
  arch.id_dim = sae.arch.id_dim;
  arch.exp_dim = sae.arch.exp_dim;
  arch.id_mode = config.id_mode;
  arch.gaussian_z_id_dim = config.gaussian_z_id_dim;
  arch.z_noise_dim = config.z_noise_dim;
  arch.generator_hidden = config.generator_hidden;
  arch.discriminator_hidden = config.discriminator_hidden;

  GANTrainResult result;
  Rng rng(config.seed);
  Rng init_rng = rng.split();
  Rng step_rng = rng.split();
  result.model = make_gan(arch);
  ShapeGAN& m = result.model;
  initialize(m, init_rng);

  const EmbeddingBatch pool = encode(sae, dataset.stacked(indices));
  const auto pool_id = dataset.identity_labels(indices);
  const auto pool_exp = dataset.expression_labels(indices);
  const auto pool_size = static_cast<std::uint64_t>(pool.mu_id.cols());

  const AdamConfig d_adam{config.lr_discriminator, config.beta1, config.beta2, 1e-8};
  const AdamConfig g_adam{config.lr_generator, config.beta1, config.beta2, 1e-8};
  AdamState<double> s_common(m.d_common, d_adam), s_source(m.d_source, d_adam), s_did(m.d_id, d_adam),
      s_dexp(m.d_exp, d_adam), s_gid(m.g_id, g_adam), s_gexp(m.g_exp, g_adam);

  const Index bs = config.batch_size;
  auto real_batch = [&] {
    RealBatch r;
    r.mu_id.resize(arch.id_dim, bs);
    r.mu_exp.resize(arch.exp_dim, bs);
    for (Index c = 0; c < bs; ++c) {
      const auto k = static_cast<Index>(step_rng.index(pool_size));
      r.mu_id.col(c) = pool.mu_id.col(k);
      r.mu_exp.col(c) = pool.mu_exp.col(k);
      r.id_labels.push_back(pool_id[static_cast<std::size_t>(k)]);
      r.exp_labels.push_back(pool_exp[static_cast<std::size_t>(k)]);
    }
    return r;
  };

  for (int step = 1; step <= config.steps; ++step) {
    GANLoss last;
    for (int k = 0; k < config.d_steps; ++k) {
      const RealBatch real = real_batch();
      const CodeBatch codes = sample_training_codes(m, bs, step_rng);
      last = losses(m, real, codes, LossParts::discriminator);
      adam_step(s_common, m.d_common, last.d_grad.common);
      adam_step(s_source, m.d_source, last.d_grad.source);
      adam_step(s_did, m.d_id, last.d_grad.id);
      adam_step(s_dexp, m.d_exp, last.d_grad.exp);
    }
    const CodeBatch codes = sample_training_codes(m, bs, step_rng);
    const GANLoss g = losses(m, {}, codes, LossParts::generators);
    adam_step(s_gid, m.g_id, g.g_id_grad);
    adam_step(s_gexp, m.g_exp, g.g_exp_grad);

    if (step % config.log_every == 0 || step == config.steps) {
      const Eigen::MatrixXd fid = g_id_forward(m, codes.z_noise, codes.z_id);
      const Eigen::MatrixXd fexp = g_exp_forward(m, codes.z_noise, codes.z_id, codes.z_exp);
      const DiscriminatorOutput d = d_forward(m, fid, fexp);
      result.log.push_back({step, last.d_loss, g.g_id_loss, g.g_exp_loss, accuracy(d.id_logits, codes.id_labels),
                            accuracy(d.exp_logits, codes.exp_labels)});
    }
  }
  return result;
}

Checkpoint to_checkpoint(const ShapeGAN& m) {
  Checkpoint c;
  c.kind = "gan";
  c.n_id = static_cast<std::uint32_t>(m.arch.n_id);
  c.n_exp = static_cast<std::uint32_t>(m.arch.n_exp);
  c.vertex_count = static_cast<std::uint32_t>(m.arch.vertex_count);
  c.architecture = {{"id_dim", m.arch.id_dim},
                    {"exp_dim", m.arch.exp_dim},
                    {"id_mode", to_string(m.arch.id_mode)},
                    {"z_id_dim", m.arch.z_id_dim()},
                    {"gaussian_z_id_dim", m.arch.gaussian_z_id_dim},
                    {"z_exp_dim", m.arch.z_exp_dim()},
                    {"z_noise_dim", m.arch.z_noise_dim},
                    {"generator_hidden", m.arch.generator_hidden},
                    {"discriminator_hidden", m.arch.discriminator_hidden},
                    {"g_id", specs_to_json(m.g_id.specs())},
                    {"g_exp", specs_to_json(m.g_exp.specs())},
                    {"d_common", specs_to_json(m.d_common.specs())},
                    {"d_source", specs_to_json(m.d_source.specs())},
                    {"d_id", specs_to_json(m.d_id.specs())},
                    {"d_exp", specs_to_json(m.d_exp.specs())}};
  c.add_net("g_id", m.g_id);
  c.add_net("g_exp", m.g_exp);
  c.add_net("d_common", m.d_common);
  c.add_net("d_source", m.d_source);
  c.add_net("d_id", m.d_id);
  c.add_net("d_exp", m.d_exp);
  if (m.arch.id_mode == IdMode::gaussian) c.add_matrix("identity_codes", m.identity_codes);
  return c;
}

ShapeGAN gan_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "gan") throw CheckpointError("expected a GAN checkpoint, found '" + c.kind + "'");
  const auto& j = c.architecture;
  GANArchitecture a;
  a.vertex_count = c.vertex_count;
  a.n_id = static_cast<int>(c.n_id);
  a.n_exp = static_cast<int>(c.n_exp);
  a.id_dim = j.at("id_dim").get<Index>();
  a.exp_dim = j.at("exp_dim").get<Index>();
  a.id_mode = id_mode_from_string(j.at("id_mode").get<std::string>());
  a.gaussian_z_id_dim = j.at("gaussian_z_id_dim").get<Index>();
  a.z_noise_dim = j.at("z_noise_dim").get<Index>();
  a.generator_hidden = j.at("generator_hidden").get<std::vector<Index>>();
  a.discriminator_hidden = j.at("discriminator_hidden").get<std::vector<Index>>();
  ShapeGAN m = make_gan(a);
  if (j.at("z_id_dim").get<Index>() != a.z_id_dim() || j.at("z_exp_dim").get<Index>() != a.z_exp_dim())
    throw CheckpointError("GAN checkpoint latent dims are inconsistent");
  auto load = [&](const char* name, DenseNet<double>& net) {
    if (specs_from_json(j.at(name)) != net.specs())
      throw CheckpointError(std::string("layer table of ") + name + " disagrees with the architecture");
    net = c.net(name, net.specs());
  };
  load("g_id", m.g_id);
  load("g_exp", m.g_exp);
  load("d_common", m.d_common);
  load("d_source", m.d_source);
  load("d_id", m.d_id);
  load("d_exp", m.d_exp);
  if (a.id_mode == IdMode::gaussian) {
    Eigen::MatrixXd codes = c.matrix("identity_codes");
    if (codes.rows() != a.z_id_dim() || codes.cols() != a.n_id)
      throw CheckpointError("identity code table has the wrong shape");
    m.identity_codes = std::move(codes);
  }
  return m;
}

void save_gan(const ShapeGAN& model, const std::filesystem::path& path) { write_checkpoint(to_checkpoint(model), path); }

ShapeGAN load_gan(const std::filesystem::path& path) { return gan_from_checkpoint(read_checkpoint(path)); }

}  // namespace ffl
