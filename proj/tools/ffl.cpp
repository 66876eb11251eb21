// ffl: command-line driver for data synthesis, training, generation,
// evaluation and serving.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ffl/bundle.hpp"
#include "ffl/config.hpp"
#include "ffl/metrics.hpp"
#include "ffl/service.hpp"
#include "ffl/synthesis.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ffl;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  const char* v = std::getenv("FFL_LOG");
  if (!v) return Level::info;
  const std::string s(v);
  if (s == "error" || s == "quiet") return Level::error;
  if (s == "warn") return Level::warn;
  if (s == "debug") return Level::debug;
  return Level::info;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  if (level > threshold) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[ffl " << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--config", c.config_path, "JSON run config (keys: synthetic, sae, gan, metrics)")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed for this stage");
  auto* o = app->add_option("--out", c.out, "output directory");
  if (out_required) o->required();
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = reference_config();
  if (!c.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(c.config_path));
    } catch (const json::exception& e) {
      throw ConfigError("config " + c.config_path + " is not valid JSON: " + e.what());
    }
    cfg = RunConfig::from_json(j, cfg);
  }
  return cfg;
}

// Reproducibility record written next to every command's outputs.
struct RunRecord {
  std::string command;
  json config;
  std::optional<std::uint64_t> seed;
  json inputs = json::object();
  json outputs = json::object();
  json results = json::object();

  void input(const std::string& name, const fs::path& p) {
    if (fs::is_regular_file(p)) inputs[name] = {{"path", p.string()}, {"sha256", file_sha256(p)}};
    else inputs[name] = {{"path", p.string()}};
  }
  void output(const std::string& name, const fs::path& p) {
    outputs[name] = {{"path", p.filename().string()}, {"sha256", file_sha256(p)}};
  }
  void write(const fs::path& dir) const {
    json j{{"command", command}, {"config", config}, {"inputs", inputs}, {"outputs", outputs}, {"results", results}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    fs::create_directories(dir);
    write_file(dir / "run.json", j.dump(2) + "\n");
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Dataset load_normalized(const fs::path& manifest) {
  Dataset d = load_dataset(manifest);
  if (!d.normalization) {
    log(Level::info, "normalizing " + manifest.string());
    d = normalize(d).first;
  }
  return d;
}

LatentCode read_code(const fs::path& p) {
  try {
    json j = json::parse(read_file(p));
    if (j.contains("code") && j.size() == 1) j = j.at("code");
    return code_from_json(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument("code file " + p.string() + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

IdPolicy parse_id_policy(const std::string& s) {
  if (s == "random") return {IdPolicy::Kind::random_class, 0};
  if (s == "fresh") return {IdPolicy::Kind::fresh_gaussian, 0};
  if (s == "shared-fresh") return {IdPolicy::Kind::shared_fresh, 0};
  if (s.rfind("class:", 0) == 0) return {IdPolicy::Kind::fixed_class, std::stoi(s.substr(6))};
  throw std::invalid_argument("id policy must be random, fresh, shared-fresh or class:K");
}

ExpPolicy parse_exp_policy(const std::string& s, double level) {
  if (s == "random") return {ExpPolicy::Kind::random_class, 0, level};
  if (s == "neutral") return {ExpPolicy::Kind::neutral, 0, level};
  if (s.rfind("class:", 0) == 0) return {ExpPolicy::Kind::fixed_class, std::stoi(s.substr(6)), level};
  throw std::invalid_argument("expression policy must be random, neutral or class:K");
}

void write_meshes(const std::vector<Generated>& frames, const fs::path& dir, const std::string& stem,
                  RunRecord& rec) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%03zu.obj", stem.c_str(), i);
    export_mesh(frames[i].mesh, dir / name);
    rec.output(name, dir / name);
  }
}

GenerateOptions bundle_options(const ModelBundle& b, bool normalized) {
  GenerateOptions o;
  if (!normalized) o.denormalize = b.card.normalization;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ffl: face shape synthesis with a supervised auto-encoder and a latent conditional GAN"};
  app.require_subcommand(1);

  Common c;
  RunRecord rec;

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate the synthetic face dataset");
  add_common(synth, c);

  // train-sae / train-ae-baseline
  std::string data_path;
  std::optional<int> epochs;
  std::optional<double> sae_lr;
  auto* train_sae_cmd = app.add_subcommand("train-sae", "train the supervised auto-encoder");
  auto* train_ae_cmd = app.add_subcommand("train-ae-baseline", "train the unsupervised auto-encoder baseline");
  for (auto* s : {train_sae_cmd, train_ae_cmd}) {
    add_common(s, c);
    s->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
    s->add_option("--epochs", epochs, "override epochs");
    s->add_option("--lr", sae_lr, "override learning rate");
  }

  // train-gan
  std::string sae_path, id_mode;
  std::optional<int> steps;
  auto* train_gan_cmd = app.add_subcommand("train-gan", "train the latent GAN on a frozen SAE and write a bundle");
  add_common(train_gan_cmd, c);
  train_gan_cmd->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  train_gan_cmd->add_option("--sae", sae_path, "SAE checkpoint")->required()->check(CLI::ExistingFile);
  train_gan_cmd->add_option("--steps", steps, "override steps");
  train_gan_cmd->add_option("--id-mode", id_mode, "gaussian or one_hot");

  // generate
  std::string bundle_path, code_path, id_policy = "random", exp_policy = "random";
  std::size_t count = 1;
  double level = 1.0;
  bool normalized = false;
  auto* generate_cmd = app.add_subcommand("generate", "generate meshes from a bundle");
  add_common(generate_cmd, c);
  generate_cmd->add_option("--bundle", bundle_path, "model bundle directory")->required()->check(CLI::ExistingDirectory);
  generate_cmd->add_option("--code", code_path, "latent code JSON; overrides the sampling policies")
      ->check(CLI::ExistingFile);
  generate_cmd->add_option("--count", count, "number of meshes");
  generate_cmd->add_option("--id-policy", id_policy, "random | fresh | shared-fresh | class:K");
  generate_cmd->add_option("--exp-policy", exp_policy, "random | neutral | class:K");
  generate_cmd->add_option("--level", level, "expression intensity");
  generate_cmd->add_flag("--normalized", normalized, "keep normalized coordinates");

  // interpolate
  std::string code_b_path, targets = "z_id,z_exp,z_noise", space = "code";
  int n_steps = 8;
  auto* interp_cmd = app.add_subcommand("interpolate", "linear interpolation between two codes");
  add_common(interp_cmd, c);
  interp_cmd->add_option("--bundle", bundle_path)->required()->check(CLI::ExistingDirectory);
  interp_cmd->add_option("--a", code_path, "first code JSON")->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--b", code_b_path, "second code JSON")->required()->check(CLI::ExistingFile);
  interp_cmd->add_option("--steps", n_steps, "number of frames (>= 2)");
  interp_cmd->add_option("--targets", targets, "comma list of z_id, z_exp, z_noise");
  interp_cmd->add_option("--space", space, "code or embedding");
  interp_cmd->add_flag("--normalized", normalized, "keep normalized coordinates");

  // mix
  std::string weights;
  auto* mix_cmd = app.add_subcommand("mix", "superimpose expressions with given weights");
  add_common(mix_cmd, c);
  mix_cmd->add_option("--bundle", bundle_path)->required()->check(CLI::ExistingDirectory);
  mix_cmd->add_option("--code", code_path, "base code JSON")->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--weights", weights, "comma list of n_exp weights")->required();
  mix_cmd->add_flag("--normalized", normalized, "keep normalized coordinates");

  // style-edit
  std::string donor_path;
  std::optional<int> donor_class;
  auto* style_cmd = app.add_subcommand("style-edit", "feed G_exp a donor identity code");
  add_common(style_cmd, c);
  style_cmd->add_option("--bundle", bundle_path)->required()->check(CLI::ExistingDirectory);
  style_cmd->add_option("--code", code_path, "base code JSON")->required()->check(CLI::ExistingFile);
  auto* donor_opt = style_cmd->add_option("--donor", donor_path, "donor code JSON")->check(CLI::ExistingFile);
  style_cmd->add_option("--donor-class", donor_class, "donor identity class")->excludes(donor_opt);
  style_cmd->add_flag("--normalized", normalized, "keep normalized coordinates");

  // metrics
  std::string generated_path;
  bool exhaustive = false;
  auto* metrics_cmd = app.add_subcommand("metrics", "DIV, DIV-ID, DIV-EXP and SP");
  add_common(metrics_cmd, c);
  metrics_cmd->add_option("--data", data_path, "training dataset manifest")->required()->check(CLI::ExistingFile);
  auto* bundle_opt = metrics_cmd->add_option("--bundle", bundle_path, "evaluate samples from this bundle")
                         ->check(CLI::ExistingDirectory);
  metrics_cmd->add_option("--generated", generated_path, "evaluate this dataset instead of sampling")
      ->check(CLI::ExistingFile)
      ->excludes(bundle_opt);
  metrics_cmd->add_flag("--exhaustive", exhaustive, "all pairs instead of sampled pairs (--generated only)");
  metrics_cmd->add_option("--level", level, "expression intensity of generated samples");

  // report
  std::string baseline_path;
  auto* report_cmd = app.add_subcommand("report", "embedding cluster statistics, PCA CSVs and reconstruction error");
  add_common(report_cmd, c);
  report_cmd->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--sae", sae_path, "SAE checkpoint")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--baseline", baseline_path, "unsupervised AE checkpoint")->check(CLI::ExistingFile);

  // export
  std::string gan_path;
  auto* export_cmd = app.add_subcommand("export", "assemble a model bundle from checkpoints and a dataset");
  add_common(export_cmd, c);
  export_cmd->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--sae", sae_path, "SAE checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--gan", gan_path, "GAN checkpoint")->required()->check(CLI::ExistingFile);

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "serve a bundle over HTTP");
  add_common(serve_cmd, c, false);
  serve_cmd->add_option("--bundle", bundle_path)->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(c);
    const fs::path out = c.out;
    const auto start = std::chrono::steady_clock::now();
    rec.seed = c.seed;

    if (synth->parsed()) {
      rec.command = "synth-data";
      if (c.seed) cfg.synthetic.seed = *c.seed;
      cfg.synthetic.validate();
      rec.config = to_json(cfg.synthetic);
      rec.seed = cfg.synthetic.seed;
      const SyntheticDataset syn = generate_synthetic(cfg.synthetic);
      write_dataset(syn.dataset, out);
      rec.output("manifest", out / "manifest.json");
      rec.results["samples"] = syn.dataset.size();
      rec.results["mean_expression_displacement"] =
          mean_expression_displacement(syn.factors, cfg.synthetic.n_id, cfg.synthetic.n_exp);
      log(Level::info, "wrote " + std::to_string(syn.dataset.size()) + " samples to " + out.string());
    } else if (train_sae_cmd->parsed() || train_ae_cmd->parsed()) {
      const bool supervised = train_sae_cmd->parsed();
      rec.command = supervised ? "train-sae" : "train-ae-baseline";
      if (c.seed) cfg.sae.seed = *c.seed;
      if (epochs) cfg.sae.epochs = *epochs;
      if (sae_lr) cfg.sae.learning_rate = *sae_lr;
      cfg.sae.supervised = supervised;
      cfg.sae.validate();
      rec.config = to_json(cfg.sae);
      rec.seed = cfg.sae.seed;
      rec.input("data", data_path);
      const Dataset d = load_normalized(data_path);
      log(Level::info, "training on " + std::to_string(d.size()) + " samples, V = " + std::to_string(d.vertex_count()));
      SAEArchitecture arch = cfg.sae_architecture;
      arch.vertex_count = d.vertex_count();
      arch.n_id = d.n_id;
      arch.n_exp = d.n_exp;
      rec.config["architecture"] = to_json(arch);
      const SAETrainResult r = supervised ? train_sae(d, cfg.sae, &arch) : train_unsupervised_ae(d, cfg.sae, &arch);
      fs::create_directories(out);
      const fs::path ckpt = out / (supervised ? "sae.ffl" : "ae.ffl");
      save_sae(r.model, ckpt, supervised ? "sae" : "ae");
      rec.output("checkpoint", ckpt);
      json log_json = json::array();
      for (const auto& e : r.log)
        log_json.push_back({{"epoch", e.epoch},
                            {"reconstruction", e.train.reconstruction},
                            {"identity", e.train.identity},
                            {"expression", e.train.expression},
                            {"total", e.train.total}});
      write_file(out / "train_log.json", log_json.dump(1) + "\n");
      rec.output("log", out / "train_log.json");
      const HeadAccuracy acc = head_accuracy(r.model, d, r.split.heldout);
      rec.results["heldout_identity_accuracy"] = acc.identity;
      rec.results["heldout_expression_accuracy"] = acc.expression;
      rec.results["heldout"] = r.split.heldout;
      log(Level::info, "held-out head accuracy: identity " + std::to_string(acc.identity) + ", expression " +
                           std::to_string(acc.expression));
    } else if (train_gan_cmd->parsed()) {
      rec.command = "train-gan";
      if (c.seed) cfg.gan.seed = *c.seed;
      if (steps) cfg.gan.steps = *steps;
      if (!id_mode.empty()) cfg.gan.id_mode = id_mode_from_string(id_mode);
      cfg.gan.validate();
      rec.config = to_json(cfg.gan);
      rec.seed = cfg.gan.seed;
      rec.input("data", data_path);
      rec.input("sae", sae_path);
      const Dataset d = load_normalized(data_path);
      const SAEModel sae = load_sae(sae_path);
      const GANTrainResult r = train_gan(sae, d, cfg.gan);
      fs::create_directories(out);
      save_gan(r.model, out / "gan.ffl");
      rec.output("checkpoint", out / "gan.ffl");
      json log_json = json::array();
      for (const auto& e : r.log)
        log_json.push_back({{"step", e.step},
                            {"d_loss", e.d_loss},
                            {"g_id_loss", e.g_id_loss},
                            {"g_exp_loss", e.g_exp_loss},
                            {"fake_id_accuracy", e.fake_id_accuracy},
                            {"fake_exp_accuracy", e.fake_exp_accuracy}});
      write_file(out / "train_log.json", log_json.dump(1) + "\n");
      rec.output("log", out / "train_log.json");
      save_bundle(out / "bundle", sae, r.model, DatasetCard::of(d));
      rec.results["bundle_hash"] = load_bundle(out / "bundle").hash;
    } else if (generate_cmd->parsed()) {
      rec.command = "generate";
      rec.input("bundle", bundle_path);
      const ModelBundle b = load_bundle(bundle_path);
      rec.results["bundle_hash"] = b.hash;
      const auto opts = bundle_options(b, normalized);
      if (!code_path.empty()) {
        rec.input("code", code_path);
        const Generated g = generate(b.sae, b.gan, read_code(code_path), b.card.topology, opts);
        write_meshes({g}, out, "mesh", rec);
      } else {
        BatchSpec spec;
        spec.count = count;
        spec.seed = c.seed.value_or(0);
        spec.id = parse_id_policy(id_policy);
        spec.exp = parse_exp_policy(exp_policy, level);
        rec.seed = spec.seed;
        rec.config = {{"count", count}, {"id_policy", id_policy}, {"exp_policy", exp_policy}, {"level", level}};
        GeneratedBatch gb = batch_generate(b.sae, b.gan, b.card.topology, spec, opts);
        gb.dataset.units = opts.denormalize ? b.card.units : "normalized";
        gb.dataset.expression_names = b.card.expression_names;
        if (!opts.denormalize) gb.dataset.normalization = b.card.normalization;
        write_dataset(gb.dataset, out);
        json codes = json::array();
        for (const auto& code : gb.codes) codes.push_back(code_to_json(code));
        write_file(out / "codes.json", codes.dump() + "\n");
        rec.output("manifest", out / "manifest.json");
        rec.output("codes", out / "codes.json");
      }
    } else if (interp_cmd->parsed()) {
      rec.command = "interpolate";
      rec.input("bundle", bundle_path);
      rec.input("a", code_path);
      rec.input("b", code_b_path);
      const ModelBundle b = load_bundle(bundle_path);
      InterpolationPath p;
      p.a = read_code(code_path);
      p.b = read_code(code_b_path);
      p.steps = n_steps;
      p.targets = 0;
      std::stringstream ss(targets);
      for (std::string t; std::getline(ss, t, ',');) {
        if (t == "z_id") p.targets |= target_z_id;
        else if (t == "z_exp") p.targets |= target_z_exp;
        else if (t == "z_noise") p.targets |= target_z_noise;
        else throw std::invalid_argument("unknown interpolation target '" + t + "'");
      }
      if (space == "embedding") p.space = InterpolationSpace::embedding;
      else if (space != "code") throw std::invalid_argument("space must be code or embedding");
      rec.config = {{"steps", n_steps}, {"targets", targets}, {"space", space}};
      write_meshes(interpolate(b.sae, b.gan, p, b.card.topology, bundle_options(b, normalized)), out, "frame", rec);
    } else if (mix_cmd->parsed()) {
      rec.command = "mix";
      rec.input("bundle", bundle_path);
      rec.input("code", code_path);
      const ModelBundle b = load_bundle(bundle_path);
      const auto w = parse_list(weights);
      const LatentCode code =
          mix_expressions(read_code(code_path), ExpressionCode(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Index>(w.size()))));
      rec.config = {{"weights", w}};
      write_meshes({generate(b.sae, b.gan, code, b.card.topology, bundle_options(b, normalized))}, out, "mix", rec);
    } else if (style_cmd->parsed()) {
      rec.command = "style-edit";
      rec.input("bundle", bundle_path);
      rec.input("code", code_path);
      const ModelBundle b = load_bundle(bundle_path);
      const LatentCode code = read_code(code_path);
      Eigen::VectorXd donor;
      if (!donor_path.empty()) {
        rec.input("donor", donor_path);
        donor = read_code(donor_path).z_id;
      } else if (donor_class) {
        Rng unused(0);
        donor = identity_code(b.gan, IdSpec::of_class(*donor_class), unused);
        rec.config = {{"donor_class", *donor_class}};
      } else {
        throw std::invalid_argument("style-edit needs --donor or --donor-class");
      }
      const auto opts = bundle_options(b, normalized);
      write_meshes({generate(b.sae, b.gan, code, b.card.topology, opts),
                    generate(b.sae, b.gan, style_edit(code, donor), b.card.topology, opts)},
                   out, "style", rec);
    } else if (metrics_cmd->parsed()) {
      rec.command = "metrics";
      if (c.seed) cfg.metrics.seed = *c.seed;
      if (metrics_cmd->count("--level")) cfg.metrics.level = level;
      rec.config = to_json(cfg.metrics);
      rec.seed = cfg.metrics.seed;
      rec.input("data", data_path);
      const Dataset train = load_normalized(data_path);
      json report;
      if (!bundle_path.empty()) {
        rec.input("bundle", bundle_path);
        const ModelBundle b = load_bundle(bundle_path);
        report = evaluate(b.sae, b.gan, train, cfg.metrics).to_json();
        report["bundle_hash"] = b.hash;
      } else {
        const fs::path gen_manifest = generated_path.empty() ? fs::path(data_path) : fs::path(generated_path);
        rec.input("generated", gen_manifest);
        // bring the generated set into the training frame
        Dataset g2 = load_dataset(gen_manifest);
        if (g2.normalization) g2 = denormalize(g2, *g2.normalization);
        Eigen::MatrixXd gx = g2.stacked();
        if (train.normalization) gx = train.normalization->apply_flat(gx);
        const Eigen::MatrixXd tx = train.stacked();
        Rng rng(cfg.metrics.seed);
        Rng train_rng = rng.split();
        Rng gen_rng = rng.split();
        const double td = exhaustive ? raw_diversity_exhaustive(tx) : raw_diversity(tx, cfg.metrics.n_pairs, train_rng);
        const double div =
            exhaustive ? diversity_exhaustive(gx, td) : diversity(gx, cfg.metrics.n_pairs, td, gen_rng);
        const double unit = train.normalization ? train.normalization->scale : 1.0;
        report = {{"div", div},
                  {"training_diversity", td},
                  {"exhaustive", exhaustive},
                  {"sp", unit * specificity(gx, tx, cfg.metrics.n_specificity, SpecificityMode::nearest)},
                  {"sp_mean_over_training",
                   unit * specificity(gx, tx, cfg.metrics.n_specificity, SpecificityMode::mean_over_training)},
                  {"sp_units", train.normalization ? train.units : "normalized"},
                  {"sp_mode", "nearest"},
                  {"n_pairs", cfg.metrics.n_pairs},
                  {"n_specificity", std::min<std::size_t>(cfg.metrics.n_specificity, gx.cols())},
                  {"seed", cfg.metrics.seed}};
      }
      fs::create_directories(out);
      write_file(out / "report.json", report.dump(2) + "\n");
      rec.output("report", out / "report.json");
      rec.results = report;
      log(Level::info, report.dump());
    } else if (report_cmd->parsed()) {
      rec.command = "report";
      rec.input("data", data_path);
      rec.input("sae", sae_path);
      const std::uint64_t seed = c.seed.value_or(0);
      rec.seed = seed;
      const Dataset d = load_normalized(data_path);
      const double unit = d.normalization ? d.normalization->scale : 1.0;
      fs::create_directories(out);
      const auto ids = d.identity_labels();
      const auto exps = d.expression_labels();
      auto stats_json = [](const ClusterStats& s) {
        return json{{"mean_intra", s.mean_intra},
                    {"mean_nearest_other", s.mean_nearest_other},
                    {"separability", s.separability},
                    {"probe_accuracy", s.probe_accuracy},
                    {"nearest_centroid_accuracy", s.nearest_centroid_accuracy}};
      };
      auto describe = [&](const std::string& name, const fs::path& ckpt) {
        const SAEModel m = load_sae(ckpt);
        const Eigen::MatrixXd x = d.stacked();
        const EmbeddingBatch e = encode(m, x);
        const ReconstructionReport r = reconstruction_report(m, x, unit);
        json j{{"identity_embedding", stats_json(cluster_stats(e.mu_id, ids, seed))},
               {"expression_embedding", stats_json(cluster_stats(e.mu_exp, exps, seed))},
               {"reconstruction",
                {{"e_avg_mean", r.mean},
                 {"e_avg_median", r.median},
                 {"mean_vertex_l1", r.mean_vertex_l1},
                 {"units", d.normalization ? d.units : "normalized"},
                 {"count", r.count}}}};
        write_pca_csv(pca_project_2d(e.mu_id), ids, out / (name + "_id_pca.csv"));
        write_pca_csv(pca_project_2d(e.mu_exp), exps, out / (name + "_exp_pca.csv"));
        rec.output(name + "_id_pca", out / (name + "_id_pca.csv"));
        rec.output(name + "_exp_pca", out / (name + "_exp_pca.csv"));
        return j;
      };
      json report{{"sae", describe("sae", sae_path)}};
      if (!baseline_path.empty()) {
        rec.input("baseline", baseline_path);
        report["baseline"] = describe("baseline", baseline_path);
      }
      write_file(out / "report.json", report.dump(2) + "\n");
      rec.output("report", out / "report.json");
      rec.results = report;
    } else if (export_cmd->parsed()) {
      rec.command = "export";
      rec.input("data", data_path);
      rec.input("sae", sae_path);
      rec.input("gan", gan_path);
      const Dataset d = load_normalized(data_path);
      save_bundle(out, load_sae(sae_path), load_gan(gan_path), DatasetCard::of(d));
      rec.results["bundle_hash"] = load_bundle(out).hash;
    } else if (serve_cmd->parsed()) {
      auto b = std::make_shared<const ModelBundle>(load_bundle(bundle_path));
      Server server(b);
      log(Level::info, "serving bundle " + b->hash + " on " + host + ":" + std::to_string(port));
      server.run(host, port);
      return 0;
    }

    log(Level::info, rec.command + " finished in " + std::to_string(seconds_since(start)) + " s");
    rec.write(out);
    return 0;
  } catch (const std::exception& e) {
    log(Level::error, e.what());
    return 1;
  }
}
