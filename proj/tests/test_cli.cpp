#include "neurframe/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

namespace neurframe {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static inline fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("neurframe_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("preprocess " + std::string(NEURFRAME_TEST_DATA) + "/cube5.mesh -o " + p("bundle")), 0);
    write_file_bytes(p("small.json"), R"({"width": 16, "hidden_layers": 1})");
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string p(const std::string& name) { return (dir / name).string(); }

  // Exit status of the tool; stdout goes to dir/stdout.txt.
  static int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = "env -u NEURFRAME_SEED " + env + " " + NEURFRAME_CLI + " " + args + " > " + p("stdout.txt") +
                            " 2> " + p("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string stdout_text() { return read_file_bytes(p("stdout.txt")); }
};

TEST_F(Cli, PreprocessWritesBundleAndCounts) {
  const Bundle b = load_bundle(p("bundle"));
  ASSERT_EQ(run("preprocess " + std::string(NEURFRAME_TEST_DATA) + "/cube5.mesh -o " + p("bundle_again")), 0);
  const PreprocessStats s = bundle_stats(b);
  const std::string out = stdout_text();
  EXPECT_NE(out.find("centroids " + std::to_string(s.centroids) + "\n"), std::string::npos);
  EXPECT_NE(out.find("dual_edges " + std::to_string(s.dual_edges) + "\n"), std::string::npos);
  EXPECT_NE(out.find("boundary_samples " + std::to_string(s.boundary_samples) + "\n"), std::string::npos);
  EXPECT_NE(out.find("features 12\n"), std::string::npos);
  EXPECT_EQ(b.input.tets.size(), 5u);
  // No tet keeps more than one boundary face.
  for (int c : b.mesh.boundary_faces_per_tet()) EXPECT_LE(c, 1);
  EXPECT_EQ(load_bundle(p("bundle_again")).hash, b.hash);
}

TEST_F(Cli, UserFeatureFileReplacesDetection) {
  write_file_bytes(p("custom.feat"), "0 0 0 1 0 0\n");
  ASSERT_EQ(run("preprocess " + std::string(NEURFRAME_TEST_DATA) + "/cube5.mesh --features " + p("custom.feat") +
                " -o " + p("bundle_feat")),
            0);
  const Bundle b = load_bundle(p("bundle_feat"));
  ASSERT_EQ(b.features.size(), 1u);
  // Stored in normalized coordinates: the unit cube maps to [-1, 1]^3.
  EXPECT_NEAR((b.features.segments[0].a - Vec3(-1, -1, -1)).norm(), 0, 1e-15);
  EXPECT_NEAR((b.features.segments[0].b - Vec3(1, -1, -1)).norm(), 0, 1e-15);
}

TEST_F(Cli, ZeroIterationsIsTheInitialization) {
  ASSERT_EQ(run("train " + p("bundle") + " --iterations 0 --seed 5 -q -o " + p("init")), 0);
  const Checkpoint c = load_checkpoint(p("init/checkpoint.nfck"));
  EXPECT_TRUE(c.params == init_params(MlpShape{}, 5));
  EXPECT_EQ(c.params.parameter_count(), 266505u);
  const Bundle b = load_bundle(p("bundle"));
  EXPECT_EQ(c.bundle_hash, b.hash);
  EXPECT_EQ(c.transform.scale, b.transform.scale);
}

TEST_F(Cli, SeedPrecedence) {
  const auto seed_of = [&](const std::string& extra, const std::string& env) {
    EXPECT_EQ(run("train " + p("bundle") + " --iterations 0 -q -o " + p("seed_run") + " " + extra, env), 0);
    const Checkpoint c = load_checkpoint(p("seed_run/checkpoint.nfck"));
    for (std::uint64_t s : {0, 3, 7, 9})
      if (c.params == init_params(MlpShape{}, s)) return static_cast<int>(s);
    return -1;
  };
  write_file_bytes(p("seed3.json"), R"({"seed": 3})");
  EXPECT_EQ(seed_of("", ""), 0);
  EXPECT_EQ(seed_of("--config " + p("seed3.json"), ""), 3);
  EXPECT_EQ(seed_of("--config " + p("seed3.json"), "NEURFRAME_SEED=7"), 7);
  EXPECT_EQ(seed_of("--config " + p("seed3.json") + " --seed 9", "NEURFRAME_SEED=7"), 9);
  EXPECT_EQ(run("train " + p("bundle") + " --iterations 0 -q -o " + p("seed_run"), "NEURFRAME_SEED=abc"), 2);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  write_file_bytes(p("cfg.json"), R"({"width": 16, "hidden_layers": 1, "iterations": 7, "learning_rate": 0.001})");
  ASSERT_EQ(run("train " + p("bundle") + " -q --config " + p("cfg.json") + " --iterations 3 -o " + p("prec")), 0);
  const TrainConfig c = load_train_config(p("prec/config.json"));
  EXPECT_EQ(c.iterations, 3);
  EXPECT_EQ(c.learning_rate, 0.001);
  EXPECT_EQ(c.network.width, 16);
  EXPECT_EQ(c.lambda_b, 20.0);
}

TEST_F(Cli, ManifestReplayIsBitIdentical) {
  ASSERT_EQ(run("train " + p("bundle") + " -q --config " + p("small.json") +
                " --iterations 20 --seed 11 --batch-edges 10 --checkpoint-every 10 -o " + p("a")),
            0);
  ASSERT_EQ(run("train -q --manifest " + p("a/manifest.json") + " -o " + p("b")), 0);
  for (const char* f : {"checkpoint.nfck", "checkpoint_10.nfck", "loss.csv", "config.json"})
    EXPECT_EQ(read_file_bytes(p(std::string("a/") + f)), read_file_bytes(p(std::string("b/") + f))) << f;

  const nlohmann::json m = nlohmann::json::parse(read_file_bytes(p("a/manifest.json")));
  EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 11u);
  EXPECT_EQ(m.at("version").get<std::string>(), kToolVersion);
  EXPECT_EQ(m.at("bundle_hash").get<std::string>(), hex64(load_bundle(p("bundle")).hash));
  EXPECT_EQ(m.at("inputs").size(), 5u);  // four bundle files + config
  EXPECT_TRUE(m.at("timing_seconds").contains("train"));

  std::ifstream in(p("a/loss.csv"));
  const auto history = read_loss_csv(in);
  ASSERT_EQ(history.size(), 20u);
  EXPECT_EQ(history.back().iteration, 19);
}

TEST_F(Cli, AnalyzeOutputsInOriginalCoordinates) {
  ASSERT_EQ(run("train " + p("bundle") + " -q --config " + p("small.json") + " --iterations 5 -o " + p("run")), 0);
  const Checkpoint c = load_checkpoint(p("run/checkpoint.nfck"));
  const Bundle b = load_bundle(p("bundle"));

  ASSERT_EQ(run("analyze discretize " + p("run/checkpoint.nfck")), 0);
  const DiscreteField f = load_frames(p("run/frames.txt"));
  ASSERT_EQ(f.frames.size(), b.input.tets.size());
  const DiscreteField direct = discretize_volume_field(NeuralField{c.params}, b.input, b.transform);
  for (std::size_t t = 0; t < f.frames.size(); ++t) EXPECT_EQ(f.frames[t].axes, direct.frames[t].axes);

  ASSERT_EQ(run("analyze crossfield " + p("run/checkpoint.nfck") + " -o " + p("analysis")), 0);
  std::ifstream cin(p("analysis/crossfield.txt"));
  const auto crosses = read_cross_field(cin);
  ASSERT_EQ(crosses.size(), b.input.boundary_faces.size());
  for (std::size_t t = 0; t < crosses.size(); ++t) {
    const Vec3 n = b.input.boundary_faces[t].normal;
    EXPECT_NEAR(crosses[t].u.dot(n), 0, 1e-12);
    EXPECT_NEAR(crosses[t].v.dot(n), 0, 1e-12);
    EXPECT_NEAR(crosses[t].u.dot(crosses[t].v), 0, 1e-12);
  }

  ASSERT_EQ(run("analyze streamlines " + p("run/checkpoint.nfck") + " --count 4 -o " + p("analysis")), 0);
  const std::string obj = read_file_bytes(p("analysis/streamlines.obj"));
  std::istringstream ls(obj);
  std::string tag;
  double x, y, z;
  int vertices = 0;
  while (ls >> tag) {
    if (tag == "v") {
      ls >> x >> y >> z;
      ++vertices;
      // The input cube is [0,1]^3; streamlines stop within one step of its boundary.
      for (double v : {x, y, z}) {
        EXPECT_GT(v, -0.01);
        EXPECT_LT(v, 1.01);
      }
    } else {
      std::getline(ls, tag);
    }
  }
  EXPECT_GT(vertices, 4);

  ASSERT_EQ(run("analyze singularities " + p("run/checkpoint.nfck") + " --seeds 20 -o " + p("analysis")), 0);
  std::ifstream pin(p("analysis/singularities.ply"));
  for (const auto& s : read_singular_ply(pin))
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(s.position[a], -1e-9);
      EXPECT_LE(s.position[a], 1 + 1e-9);
    }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("selfcheck"), 0);
  EXPECT_NE(stdout_text().find("PASS mlp_gradient"), std::string::npos);
  EXPECT_EQ(run("preprocess " + p("missing.mesh") + " -o " + p("x")), 2);
  EXPECT_EQ(run("preprocess " + std::string(NEURFRAME_TEST_DATA) + "/inverted_tet.mesh -o " + p("x")), 2);
  EXPECT_EQ(run("preprocess --primitive sphere -o " + p("x")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  write_file_bytes(p("bad.json"), R"({"learning_rat": 1})");
  EXPECT_EQ(run("train " + p("bundle") + " --config " + p("bad.json")), 2);
  EXPECT_EQ(run("train " + p("bundle") + " --lr -1"), 2);
  EXPECT_EQ(run("analyze singularities " + p("missing.nfck")), 2);

  // A checkpoint trained on another bundle is refused.
  ASSERT_EQ(run("preprocess --primitive cube --resolution 2 -o " + p("other")), 0);
  ASSERT_EQ(run("train " + p("bundle") + " -q --config " + p("small.json") + " --iterations 0 -o " + p("r0")), 0);
  EXPECT_EQ(run("analyze discretize " + p("r0/checkpoint.nfck") + " --bundle " + p("other")), 2);

  // Smoothness-only loss starts low; a huge step drives it past 10x by the end of the grace period.
  write_file_bytes(p("diverge.json"), R"({"width": 16, "hidden_layers": 1, "lambda_b": 0, "lambda_f": 0})");
  EXPECT_EQ(run("train " + p("bundle") + " -q --config " + p("diverge.json") + " --iterations 600 --lr 1000 -o " +
                p("div")),
            3);
  EXPECT_NE(read_file_bytes(p("stderr.txt")).find("exceeds 10x"), std::string::npos);
}

}  // namespace
}  // namespace neurframe
