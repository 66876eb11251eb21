#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "ffl/bundle.hpp"
#include "ffl/config.hpp"
#include "support.hpp"

using namespace ffl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FFL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

fs::path write_tiny_config(const fs::path& dir) {
  RunConfig cfg = reference_config();
  cfg.synthetic.n_id = 3;
  cfg.synthetic.n_exp = 2;
  cfg.synthetic.samples_per_cell = 4;
  cfg.synthetic.vertex_count = 20;
  cfg.synthetic.identity_rank = 3;
  cfg.sae.epochs = 3;
  cfg.sae.batch_size = 8;
  cfg.sae_architecture.id_dim = 6;
  cfg.sae_architecture.exp_dim = 4;
  cfg.sae_architecture.encoder_hidden = {16, 12};
  cfg.sae_architecture.decoder_hidden = {12, 16};
  cfg.gan.steps = 10;
  cfg.gan.batch_size = 8;
  cfg.gan.log_every = 5;
  cfg.gan.gaussian_z_id_dim = 4;
  cfg.gan.z_noise_dim = 3;
  cfg.gan.generator_hidden = {10, 8};
  cfg.gan.discriminator_hidden = {12, 8};
  cfg.metrics.n_generated = 40;
  cfg.metrics.n_pairs = 200;
  cfg.metrics.n_specificity = 20;
  cfg.metrics.n_controlled_pairs = 50;
  fs::create_directories(dir);
  write_file(dir / "config.json", cfg.to_json().dump(2));
  return dir / "config.json";
}

}  // namespace

TEST(Cli, UsageErrorsExitNonZero) {
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run("train-sae --out /tmp/x"), 0);
  test::TempDir dir;
  write_file(dir / "bad.json", R"({"gan": {"stepz": 1}})");
  EXPECT_NE(run("synth-data --config " + q(dir / "bad.json") + " --out " + q(dir / "d")), 0);
}

TEST(Cli, SynthDataIsByteIdentical) {
  test::TempDir dir;
  const fs::path cfg = write_tiny_config(dir.path());
  ASSERT_EQ(run("synth-data --config " + q(cfg) + " --seed 4 --out " + q(dir / "a")), 0);
  ASSERT_EQ(run("synth-data --config " + q(cfg) + " --seed 4 --out " + q(dir / "b")), 0);
  EXPECT_EQ(std::system(("diff -r " + q(dir / "a") + " " + q(dir / "b") + " > /dev/null").c_str()), 0);
  ASSERT_EQ(run("synth-data --config " + q(cfg) + " --seed 5 --out " + q(dir / "c")), 0);
  EXPECT_NE(read_file(dir / "a/meshes/000000.obj"), read_file(dir / "c/meshes/000000.obj"));
}

TEST(Cli, TinyPipelineEndToEnd) {
  test::TempDir dir;
  const fs::path cfg = write_tiny_config(dir.path());
  const std::string c = " --config " + q(cfg);
  ASSERT_EQ(run("synth-data" + c + " --out " + q(dir / "data")), 0);
  const std::string data = " --data " + q(dir / "data/manifest.json");
  ASSERT_EQ(run("train-sae" + c + data + " --out " + q(dir / "sae")), 0);
  ASSERT_EQ(run("train-sae" + c + data + " --out " + q(dir / "sae2")), 0);
  EXPECT_EQ(read_file(dir / "sae/sae.ffl"), read_file(dir / "sae2/sae.ffl"));
  ASSERT_EQ(run("train-ae-baseline" + c + data + " --out " + q(dir / "ae")), 0);
  const std::string sae = " --sae " + q(dir / "sae/sae.ffl");
  ASSERT_EQ(run("train-gan" + c + data + sae + " --out " + q(dir / "gan")), 0);
  ASSERT_TRUE(fs::exists(dir / "gan/bundle/card.json"));
  const fs::path bundle = dir / "gan/bundle";
  const ModelBundle b = load_bundle(bundle);
  EXPECT_EQ(b.sae.arch.id_dim, 6);
  EXPECT_EQ(b.gan.arch.z_noise_dim, 3);

  ASSERT_EQ(run("export" + c + data + sae + " --gan " + q(dir / "gan/gan.ffl") + " --out " + q(dir / "exported")), 0);
  EXPECT_EQ(load_bundle(dir / "exported").hash, b.hash);

  const std::string bun = " --bundle " + q(bundle);
  ASSERT_EQ(run("generate" + bun + " --count 12 --seed 2 --out " + q(dir / "gen")), 0);
  ASSERT_EQ(run("generate" + bun + " --count 12 --seed 2 --out " + q(dir / "gen2")), 0);
  EXPECT_EQ(std::system(("diff -r " + q(dir / "gen") + " " + q(dir / "gen2") + " > /dev/null").c_str()), 0);
  const Dataset gen = load_dataset(dir / "gen/manifest.json");
  EXPECT_EQ(gen.size(), 12u);

  const json codes = json::parse(read_file(dir / "gen/codes.json"));
  write_file(dir / "a.json", codes[0].dump());
  write_file(dir / "b.json", codes[1].dump());
  ASSERT_EQ(run("interpolate" + bun + " --a " + q(dir / "a.json") + " --b " + q(dir / "b.json") +
                " --steps 3 --out " + q(dir / "interp")),
            0);
  EXPECT_TRUE(fs::exists(dir / "interp/frame_002.obj"));
  ASSERT_EQ(run("generate" + bun + " --code " + q(dir / "a.json") + " --out " + q(dir / "single")), 0);
  EXPECT_EQ(read_file(dir / "single/mesh_000.obj"), read_file(dir / "interp/frame_000.obj"));
  EXPECT_EQ(run("mix" + bun + " --code " + q(dir / "a.json") + " --weights 0.5,1 --out " + q(dir / "mix")), 0);
  EXPECT_NE(run("mix" + bun + " --code " + q(dir / "a.json") + " --weights 1 --out " + q(dir / "mix2")), 0);
  EXPECT_EQ(run("style-edit" + bun + " --code " + q(dir / "a.json") + " --donor-class 1 --out " + q(dir / "style")), 0);

  ASSERT_EQ(run("metrics" + c + data + bun + " --out " + q(dir / "m1")), 0);
  ASSERT_EQ(run("metrics" + c + data + bun + " --out " + q(dir / "m2")), 0);
  EXPECT_EQ(read_file(dir / "m1/report.json"), read_file(dir / "m2/report.json"));
  const json rep = json::parse(read_file(dir / "m1/report.json"));
  EXPECT_EQ(rep["bundle_hash"], b.hash);

  ASSERT_EQ(run("metrics" + c + data + " --exhaustive --out " + q(dir / "self")), 0);
  EXPECT_EQ(json::parse(read_file(dir / "self/report.json"))["div"].get<double>(), 1.0);

  ASSERT_EQ(run("report" + data + sae + " --baseline " + q(dir / "ae/ae.ffl") + " --out " + q(dir / "rep")), 0);
  const json r = json::parse(read_file(dir / "rep/report.json"));
  EXPECT_TRUE(r.contains("baseline"));
  EXPECT_TRUE(fs::exists(dir / "rep/sae_exp_pca.csv"));
  const json run_rec = json::parse(read_file(dir / "rep/run.json"));
  EXPECT_EQ(run_rec["command"], "report");
}
