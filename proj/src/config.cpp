#include "ffl/config.hpp"

#include <functional>
#include <map>

namespace ffl {

using json = nlohmann::json;

namespace {

// Applies each present key with its setter; unknown keys throw.
void apply(const json& j, const std::string& where, const std::map<std::string, std::function<void(const json&)>>& setters) {
  if (!j.is_object()) throw ConfigError(where + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown " + where + " config key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(where + " config key '" + key + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

}  // namespace

json to_json(const SyntheticSpec& s) {
  return {{"vertex_count", s.vertex_count},     {"n_id", s.n_id},
          {"n_exp", s.n_exp},                   {"samples_per_cell", s.samples_per_cell},
          {"identity_rank", s.identity_rank},   {"noise_sigma", s.noise_sigma},
          {"cross_strength", s.cross_strength}, {"identity_scale", s.identity_scale},
          {"expression_scale", s.expression_scale}, {"face_size", s.face_size},
          {"seed", s.seed}};
}

void from_json(const json& j, SyntheticSpec& s) {
  apply(j, "synthetic",
        {{"vertex_count", set(s.vertex_count)},
         {"n_id", set(s.n_id)},
         {"n_exp", set(s.n_exp)},
         {"samples_per_cell", set(s.samples_per_cell)},
         {"identity_rank", set(s.identity_rank)},
         {"noise_sigma", set(s.noise_sigma)},
         {"cross_strength", set(s.cross_strength)},
         {"identity_scale", set(s.identity_scale)},
         {"expression_scale", set(s.expression_scale)},
         {"face_size", set(s.face_size)},
         {"seed", set(s.seed)}});
}

json to_json(const SAETrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"weights",
           {{"reconstruction", c.weights.reconstruction},
            {"identity", c.weights.identity},
            {"expression", c.weights.expression}}},
          {"seed", c.seed},
          {"heldout_fraction", c.heldout_fraction},
          {"supervised", c.supervised}};
}

void from_json(const json& j, SAETrainConfig& c) {
  apply(j, "sae",
        {{"epochs", set(c.epochs)},
         {"batch_size", set(c.batch_size)},
         {"learning_rate", set(c.learning_rate)},
         {"final_lr_fraction", set(c.final_lr_fraction)},
         {"beta1", set(c.beta1)},
         {"beta2", set(c.beta2)},
         {"weights",
          [&c](const json& w) {
            apply(w, "sae.weights",
                  {{"reconstruction", set(c.weights.reconstruction)},
                   {"identity", set(c.weights.identity)},
                   {"expression", set(c.weights.expression)}});
          }},
         {"seed", set(c.seed)},
         {"heldout_fraction", set(c.heldout_fraction)},
         {"supervised", set(c.supervised)}});
}

json to_json(const GANTrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"d_steps", c.d_steps},
          {"log_every", c.log_every},
          {"seed", c.seed},
          {"id_mode", to_string(c.id_mode)},
          {"gaussian_z_id_dim", c.gaussian_z_id_dim},
          {"z_noise_dim", c.z_noise_dim},
          {"generator_hidden", c.generator_hidden},
          {"discriminator_hidden", c.discriminator_hidden}};
}

void from_json(const json& j, GANTrainConfig& c) {
  apply(j, "gan",
        {{"steps", set(c.steps)},
         {"batch_size", set(c.batch_size)},
         {"lr_generator", set(c.lr_generator)},
         {"lr_discriminator", set(c.lr_discriminator)},
         {"beta1", set(c.beta1)},
         {"beta2", set(c.beta2)},
         {"d_steps", set(c.d_steps)},
         {"log_every", set(c.log_every)},
         {"seed", set(c.seed)},
         {"id_mode",
          [&c](const json& v) {
            try {
              c.id_mode = id_mode_from_string(v.get<std::string>());
            } catch (const std::invalid_argument& e) {
              throw ConfigError(e.what());
            }
          }},
         {"gaussian_z_id_dim", set(c.gaussian_z_id_dim)},
         {"z_noise_dim", set(c.z_noise_dim)},
         {"generator_hidden", set(c.generator_hidden)},
         {"discriminator_hidden", set(c.discriminator_hidden)}});
}

json to_json(const MetricConfig& c) {
  return {{"n_generated", c.n_generated},
          {"n_pairs", c.n_pairs},
          {"n_specificity", c.n_specificity},
          {"n_controlled_pairs", c.n_controlled_pairs},
          {"level", c.level},
          {"seed", c.seed}};
}

void from_json(const json& j, MetricConfig& c) {
  apply(j, "metrics",
        {{"n_generated", set(c.n_generated)},
         {"n_pairs", set(c.n_pairs)},
         {"n_specificity", set(c.n_specificity)},
         {"n_controlled_pairs", set(c.n_controlled_pairs)},
         {"level", set(c.level)},
         {"seed", set(c.seed)}});
}

json to_json(const SAEArchitecture& a) {
  return {{"id_dim", a.id_dim},
          {"exp_dim", a.exp_dim},
          {"encoder_hidden", a.encoder_hidden},
          {"decoder_hidden", a.decoder_hidden}};
}

void from_json(const json& j, SAEArchitecture& a) {
  apply(j, "sae_architecture",
        {{"id_dim", set(a.id_dim)},
         {"exp_dim", set(a.exp_dim)},
         {"encoder_hidden", set(a.encoder_hidden)},
         {"decoder_hidden", set(a.decoder_hidden)}});
}

json RunConfig::to_json() const {
  return {{"synthetic", ffl::to_json(synthetic)},
          {"sae", ffl::to_json(sae)},
          {"sae_architecture", ffl::to_json(sae_architecture)},
          {"gan", ffl::to_json(gan)},
          {"metrics", ffl::to_json(metrics)}};
}

RunConfig RunConfig::from_json(const json& j, RunConfig base) {
  apply(j, "run",
        {{"synthetic", [&](const json& v) { ffl::from_json(v, base.synthetic); }},
         {"sae", [&](const json& v) { ffl::from_json(v, base.sae); }},
         {"sae_architecture", [&](const json& v) { ffl::from_json(v, base.sae_architecture); }},
         {"gan", [&](const json& v) { ffl::from_json(v, base.gan); }},
         {"metrics", [&](const json& v) { ffl::from_json(v, base.metrics); }}});
  base.synthetic.validate();
  base.sae.validate();
  base.gan.validate();
  return base;
}

RunConfig reference_config() {
  RunConfig c;
  c.sae.epochs = 60;
  c.sae.batch_size = 64;
  c.sae.learning_rate = 1e-3;
  c.sae.final_lr_fraction = 0.01;
  c.gan.steps = 3000;
  c.gan.batch_size = 64;
  return c;
}

}  // namespace ffl
