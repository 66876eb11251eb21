#include "ffl/sae.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace ffl {

namespace {

std::vector<LayerSpec> encoder_specs(const SAEArchitecture& a, Index out) {
  return mlp_specs(a.input_dim(), a.encoder_hidden, out);
}

std::vector<LayerSpec> decoder_specs(const SAEArchitecture& a) {
  return mlp_specs(a.embedding_dim(), a.decoder_hidden, a.input_dim());
}

std::vector<LayerSpec> head_specs(Index in, Index classes) {
  return {LayerSpec{in, classes, Activation::identity, false}};
}

}  // namespace

SAEModel make_sae(const SAEArchitecture& arch) {
  if (arch.vertex_count <= 0 || arch.n_id <= 0 || arch.n_exp <= 0 || arch.id_dim <= 0 || arch.exp_dim <= 0)
    throw DimensionError("SAE architecture dimensions must be positive");
  SAEModel m;
  m.arch = arch;
  m.encoder_id = DenseNet<double>(encoder_specs(arch, arch.id_dim));
  m.encoder_exp = DenseNet<double>(encoder_specs(arch, arch.exp_dim));
  m.decoder = DenseNet<double>(decoder_specs(arch));
  m.head_id = DenseNet<double>(head_specs(arch.id_dim, arch.n_id));
  m.head_exp = DenseNet<double>(head_specs(arch.exp_dim, arch.n_exp));
  return m;
}

void initialize(SAEModel& model, Rng& rng) {
  init_fan_in_uniform(model.encoder_id, rng);
  init_fan_in_uniform(model.encoder_exp, rng);
  init_fan_in_uniform(model.decoder, rng);
  init_fan_in_uniform(model.head_id, rng);
  init_fan_in_uniform(model.head_exp, rng);
}

namespace {

void check_input(const SAEModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.arch.input_dim())
    throw DimensionError("SAE input has " + std::to_string(x.rows()) + " rows, model expects 3V = " +
                         std::to_string(model.arch.input_dim()));
}

}  // namespace

SAEOutput sae_forward(const SAEModel& model, const Eigen::MatrixXd& x) {
  check_input(model, x);
  SAEOutput out;
  out.embedding = encode(model, x);
  out.reconstruction = decode(model, out.embedding);
  out.id_logits = forward(model.head_id, out.embedding.mu_id);
  out.exp_logits = forward(model.head_exp, out.embedding.mu_exp);
  return out;
}

EmbeddingBatch encode(const SAEModel& model, const Eigen::MatrixXd& x) {
  check_input(model, x);
  return {forward(model.encoder_id, x), forward(model.encoder_exp, x)};
}

EmbeddingPair encode(const SAEModel& model, const Mesh& mesh) {
  const EmbeddingBatch b = encode(model, Eigen::MatrixXd(mesh.flatten()));
  return b.column(0);
}

Eigen::MatrixXd decode(const SAEModel& model, const EmbeddingBatch& e) {
  if (e.mu_id.rows() != model.arch.id_dim || e.mu_exp.rows() != model.arch.exp_dim ||
      e.mu_id.cols() != e.mu_exp.cols())
    throw DimensionError("decode: embedding is (" + dims(e.mu_id.rows(), e.mu_id.cols()) + ", " +
                         dims(e.mu_exp.rows(), e.mu_exp.cols()) + "), model expects (" +
                         std::to_string(model.arch.id_dim) + ", " + std::to_string(model.arch.exp_dim) + ")");
  return forward(model.decoder, e.concatenated());
}

Mesh decode(const SAEModel& model, const EmbeddingPair& e, TopologyPtr topology) {
  EmbeddingBatch b{Eigen::MatrixXd(e.mu_id), Eigen::MatrixXd(e.mu_exp)};
  return Mesh::from_flat(decode(model, b).col(0), std::move(topology));
}

SAELoss sae_loss(const SAEModel& model, const Eigen::MatrixXd& x, std::span<const int> identity_labels,
                 const Eigen::MatrixXd& expression_targets, const SAELossWeights& w) {
  check_input(model, x);
  const Index n = x.cols();
  if (n == 0) throw DimensionError("sae_loss: empty batch");
  if (static_cast<Index>(identity_labels.size()) != n || expression_targets.cols() != n)
    throw DimensionError("sae_loss: label count does not match batch size");
  if (expression_targets.rows() != model.arch.n_exp)
    throw DimensionError("sae_loss: expression targets have " + std::to_string(expression_targets.rows()) +
                         " rows, model has " + std::to_string(model.arch.n_exp) + " classes");
  for (Index c = 0; c < n; ++c) {
    if (!ExpressionCode(expression_targets.col(c)).is_one_hot())
      throw std::invalid_argument("sae_loss: expression code of sample " + std::to_string(c) + " is not one-hot");
  }
  const Eigen::MatrixXd id_targets = one_hot_columns<double>(identity_labels, model.arch.n_id);

  const auto t_id = forward_trace(model.encoder_id, x);
  const auto t_exp = forward_trace(model.encoder_exp, x);
  Eigen::MatrixXd mu(model.arch.embedding_dim(), n);
  mu << t_id.output(), t_exp.output();
  const auto t_dec = forward_trace(model.decoder, mu);
  const auto t_hid = forward_trace(model.head_id, t_id.output());
  const auto t_hexp = forward_trace(model.head_exp, t_exp.output());

  const auto rec = l1_loss(t_dec.output(), x);
  const auto ce_id = softmax_cross_entropy(t_hid.output(), id_targets);
  const auto ce_exp = softmax_cross_entropy(t_hexp.output(), expression_targets);

  SAELoss out;
  out.terms.reconstruction = rec.loss;
  out.terms.identity = ce_id.loss;
  out.terms.expression = ce_exp.loss;
  out.terms.total = w.reconstruction * rec.loss + w.identity * ce_id.loss + w.expression * ce_exp.loss;

  auto dec = backward(model.decoder, t_dec, Eigen::MatrixXd(w.reconstruction * rec.grad));
  Eigen::MatrixXd up_id = dec.input.topRows(model.arch.id_dim);
  Eigen::MatrixXd up_exp = dec.input.bottomRows(model.arch.exp_dim);
  out.grad.decoder = std::move(dec.params);

  if (w.identity != 0.0) {
    auto h = backward(model.head_id, t_hid, Eigen::MatrixXd(w.identity * ce_id.grad));
    up_id += h.input;
    out.grad.head_id = std::move(h.params);
  } else {
    out.grad.head_id = NetGradient<double>::zeros_like(model.head_id);
  }
  if (w.expression != 0.0) {
    auto h = backward(model.head_exp, t_hexp, Eigen::MatrixXd(w.expression * ce_exp.grad));
    up_exp += h.input;
    out.grad.head_exp = std::move(h.params);
  } else {
    out.grad.head_exp = NetGradient<double>::zeros_like(model.head_exp);
  }
  out.grad.encoder_id = backward(model.encoder_id, t_id, up_id).params;
  out.grad.encoder_exp = backward(model.encoder_exp, t_exp, up_exp).params;
  return out;
}

SAELoss sae_loss(const SAEModel& model, const FaceSample& sample, const SAELossWeights& weights) {
  if (sample.expression.size() != model.arch.n_exp)
    throw DimensionError("sae_loss: expression code length does not match the model");
  const int label = sample.identity;
  return sae_loss(model, Eigen::MatrixXd(sample.mesh.flatten()), std::span<const int>(&label, 1),
                  Eigen::MatrixXd(sample.expression.weights), weights);
}

DataSplit split_by_identity(const Dataset& dataset, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
    throw std::invalid_argument("heldout fraction must be in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) by_id[dataset.samples[i].identity].push_back(i);
  Rng rng(seed);
  DataSplit split;
  for (auto& [id, idx] : by_id) {
    rng.shuffle(idx.begin(), idx.end());
    std::size_t held = static_cast<std::size_t>(std::lround(heldout_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) held = std::clamp<std::size_t>(held, 1, idx.size() - 1);
    else held = 0;
    split.heldout.insert(split.heldout.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  return split;
}

double scheduled_rate(const SAETrainConfig& config, int epoch) {
  if (config.epochs <= 1 || config.final_lr_fraction == 1.0) return config.learning_rate;
  const double t = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
  const double frac = config.final_lr_fraction + (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return config.learning_rate * frac;
}

void SAETrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw std::invalid_argument("SAE config: epochs and batch size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("SAE config: learning rate must be positive");
  if (!(heldout_fraction > 0 && heldout_fraction < 1))
    throw std::invalid_argument("SAE config: heldout fraction must be in (0, 1)");
  if (!(final_lr_fraction > 0 && final_lr_fraction <= 1))
    throw std::invalid_argument("SAE config: final_lr_fraction must be in (0, 1]");
  if (weights.reconstruction < 0 || weights.identity < 0 || weights.expression < 0)
    throw std::invalid_argument("SAE config: loss weights must be nonnegative");
}

SAETrainResult train_sae(const Dataset& dataset, const SAETrainConfig& config, const SAEArchitecture* architecture) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train_sae: empty dataset");
  for (const auto& s : dataset.samples) {
    if (s.identity < 0 || s.identity >= dataset.n_id)
      throw std::out_of_range("train_sae: identity label " + std::to_string(s.identity) + " outside [0, " +
                              std::to_string(dataset.n_id) + ")");
    if (s.expression.size() != dataset.n_exp)
      throw DimensionError("train_sae: expression code length " + std::to_string(s.expression.size()) +
                           " differs from n_exp " + std::to_string(dataset.n_exp));
  }
  SAEArchitecture arch;
  if (architecture) arch = *architecture;
  if (architecture && (arch.n_id != dataset.n_id || arch.n_exp != dataset.n_exp ||
                       arch.vertex_count != dataset.vertex_count()))
    throw DimensionError("train_sae: architecture (n_id " + std::to_string(arch.n_id) + ", n_exp " +
                         std::to_string(arch.n_exp) + ", V " + std::to_string(arch.vertex_count) +
                         ") does not match dataset (n_id " + std::to_string(dataset.n_id) + ", n_exp " +
                         std::to_string(dataset.n_exp) + ", V " + std::to_string(dataset.vertex_count()) + ")");
  arch.vertex_count = dataset.vertex_count();
  arch.n_id = dataset.n_id;
  arch.n_exp = dataset.n_exp;

  SAETrainResult result;
  Rng rng(config.seed);
  Rng init_rng = rng.split();
  Rng order_rng = rng.split();
  result.model = make_sae(arch);
  initialize(result.model, init_rng);
  result.split = split_by_identity(dataset, config.heldout_fraction, config.seed);

  SAELossWeights weights = config.weights;
  if (!config.supervised) weights.identity = weights.expression = 0.0;

  const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, 1e-8};
  SAEModel& m = result.model;
  AdamState<double> s_eid(m.encoder_id, adam), s_eexp(m.encoder_exp, adam), s_dec(m.decoder, adam),
      s_hid(m.head_id, adam), s_hexp(m.head_exp, adam);

  const Eigen::MatrixXd all_x = dataset.stacked();
  const std::vector<int> all_id = dataset.identity_labels();
  Eigen::MatrixXd all_exp(dataset.n_exp, static_cast<Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) all_exp.col(static_cast<Index>(i)) = dataset.samples[i].expression.weights;

  std::vector<std::size_t> order = result.split.train;
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = scheduled_rate(config, epoch);
    for (auto* s : {&s_eid, &s_eexp, &s_dec, &s_hid, &s_hexp}) s->config.learning_rate = lr;
    order_rng.shuffle(order.begin(), order.end());
    SAELossTerms sum;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t count = std::min(bs, order.size() - start);
      Eigen::MatrixXd x(all_x.rows(), static_cast<Index>(count));
      Eigen::MatrixXd exp_t(all_exp.rows(), static_cast<Index>(count));
      std::vector<int> ids(count);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = order[start + k];
        x.col(static_cast<Index>(k)) = all_x.col(static_cast<Index>(idx));
        exp_t.col(static_cast<Index>(k)) = all_exp.col(static_cast<Index>(idx));
        ids[k] = all_id[idx];
      }
      const SAELoss loss = sae_loss(m, x, ids, exp_t, weights);
      adam_step(s_eid, m.encoder_id, loss.grad.encoder_id);
      adam_step(s_eexp, m.encoder_exp, loss.grad.encoder_exp);
      adam_step(s_dec, m.decoder, loss.grad.decoder);
      if (config.supervised) {
        adam_step(s_hid, m.head_id, loss.grad.head_id);
        adam_step(s_hexp, m.head_exp, loss.grad.head_exp);
      }
      const double wgt = static_cast<double>(count);
      sum.reconstruction += wgt * loss.terms.reconstruction;
      sum.identity += wgt * loss.terms.identity;
      sum.expression += wgt * loss.terms.expression;
      sum.total += wgt * loss.terms.total;
    }
    const double total = static_cast<double>(order.size());
    result.log.push_back({epoch,
                          {sum.reconstruction / total, sum.identity / total, sum.expression / total,
                           sum.total / total}});
  }
  return result;
}

SAETrainResult train_unsupervised_ae(const Dataset& dataset, SAETrainConfig config,
                                     const SAEArchitecture* architecture) {
  config.supervised = false;
  return train_sae(dataset, config, architecture);
}

std::vector<int> classify_identity(const SAEModel& model, const Eigen::MatrixXd& x) {
  return argmax_columns<double>(forward(model.head_id, forward(model.encoder_id, x)));
}

std::vector<int> classify_expression(const SAEModel& model, const Eigen::MatrixXd& x) {
  return argmax_columns<double>(forward(model.head_exp, forward(model.encoder_exp, x)));
}

HeadAccuracy head_accuracy(const SAEModel& model, const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) return {};
  const Eigen::MatrixXd x = dataset.stacked(indices);
  const auto id_pred = classify_identity(model, x);
  const auto exp_pred = classify_expression(model, x);
  const auto id_true = dataset.identity_labels(indices);
  const auto exp_true = dataset.expression_labels(indices);
  std::size_t id_ok = 0, exp_ok = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    id_ok += id_pred[i] == id_true[i];
    exp_ok += exp_pred[i] == exp_true[i];
  }
  const double n = static_cast<double>(indices.size());
  return {static_cast<double>(id_ok) / n, static_cast<double>(exp_ok) / n};
}

Checkpoint to_checkpoint(const SAEModel& m, const std::string& kind) {
  Checkpoint c;
  c.kind = kind;
  c.n_id = static_cast<std::uint32_t>(m.arch.n_id);
  c.n_exp = static_cast<std::uint32_t>(m.arch.n_exp);
  c.vertex_count = static_cast<std::uint32_t>(m.arch.vertex_count);
  c.architecture = {{"id_dim", m.arch.id_dim},
                    {"exp_dim", m.arch.exp_dim},
                    {"encoder_hidden", m.arch.encoder_hidden},
                    {"decoder_hidden", m.arch.decoder_hidden},
                    {"encoder_id", specs_to_json(m.encoder_id.specs())},
                    {"encoder_exp", specs_to_json(m.encoder_exp.specs())},
                    {"decoder", specs_to_json(m.decoder.specs())},
                    {"head_id", specs_to_json(m.head_id.specs())},
                    {"head_exp", specs_to_json(m.head_exp.specs())}};
  c.add_net("encoder_id", m.encoder_id);
  c.add_net("encoder_exp", m.encoder_exp);
  c.add_net("decoder", m.decoder);
  c.add_net("head_id", m.head_id);
  c.add_net("head_exp", m.head_exp);
  return c;
}

SAEModel sae_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "sae" && c.kind != "ae")
    throw CheckpointError("expected an auto-encoder checkpoint, found '" + c.kind + "'");
  SAEArchitecture a;
  a.vertex_count = c.vertex_count;
  a.n_id = static_cast<int>(c.n_id);
  a.n_exp = static_cast<int>(c.n_exp);
  a.id_dim = c.architecture.at("id_dim").get<Index>();
  a.exp_dim = c.architecture.at("exp_dim").get<Index>();
  a.encoder_hidden = c.architecture.at("encoder_hidden").get<std::vector<Index>>();
  a.decoder_hidden = c.architecture.at("decoder_hidden").get<std::vector<Index>>();
  SAEModel m = make_sae(a);
  auto expect = [&](const char* name, const DenseNet<double>& net) {
    if (specs_from_json(c.architecture.at(name)) != net.specs())
      throw CheckpointError(std::string("layer table of ") + name + " disagrees with the architecture");
  };
  expect("encoder_id", m.encoder_id);
  expect("encoder_exp", m.encoder_exp);
  expect("decoder", m.decoder);
  expect("head_id", m.head_id);
  expect("head_exp", m.head_exp);
  m.encoder_id = c.net("encoder_id", m.encoder_id.specs());
  m.encoder_exp = c.net("encoder_exp", m.encoder_exp.specs());
  m.decoder = c.net("decoder", m.decoder.specs());
  m.head_id = c.net("head_id", m.head_id.specs());
  m.head_exp = c.net("head_exp", m.head_exp.specs());
  return m;
}

void save_sae(const SAEModel& model, const std::filesystem::path& path, const std::string& kind) {
  write_checkpoint(to_checkpoint(model, kind), path);
}

SAEModel load_sae(const std::filesystem::path& path) { return sae_from_checkpoint(read_checkpoint(path)); }

}  // namespace ffl
