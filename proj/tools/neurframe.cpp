// neurframe: preprocess / train / analyze / selfcheck.
//
// Exit codes: 0 success, 2 input error, 3 training divergence, 4 selfcheck
// failure, 1 anything unexpected.

#include "neurframe/pipeline.hpp"
#include "neurframe/selfcheck.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace neurframe;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitSelfcheck = 4;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string file_hash(const std::string& path) { return hex64(fnv1a64(read_file_bytes(path))); }

std::string lower_ext(const std::string& path) {
  std::string e = fs::path(path).extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string mesh;
  std::string primitive;
  int resolution = 4;
  std::string features;
  double feature_angle = 45.0;
  std::string out = "bundle";
};

int run_preprocess(const PreprocessArgs& a) {
  if (a.mesh.empty() == a.primitive.empty()) throw InputError("give exactly one of a mesh file or --primitive");
  const TetMesh input = a.primitive.empty() ? load_tet_mesh(a.mesh)
                                            : generate_primitive(parse_primitive(a.primitive), a.resolution);
  std::optional<FeatureSet> user;
  const double angle = a.feature_angle * kPi / 180.0;
  if (!a.features.empty())
    user = lower_ext(a.features) == ".obj" ? load_obj_features(a.features, angle) : load_feature_file(a.features);
  const Bundle b = preprocess(input, user, angle);
  save_bundle(b, a.out);
  const PreprocessStats s = bundle_stats(b);
  std::cout << "centroids " << s.centroids << "\ndual_edges " << s.dual_edges << "\nboundary_samples "
            << s.boundary_samples << "\nfeatures " << s.features << "\nbundle " << a.out << " hash " << hex64(b.hash)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string bundle;
  std::string config;
  std::string manifest;
  std::string out = "run";
  std::optional<long> iterations, checkpoint_every, log_every, batch_edges, batch_boundary, batch_feature;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, lambda_s, lambda_b, lambda_f, sigma;
  bool quiet = false;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("NEURFRAME_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (errno || *end || v[0] == '-') throw InputError(std::string("NEURFRAME_SEED is not an unsigned integer: ") + v);
  return s;
}

// defaults < config file (or replayed manifest) < NEURFRAME_SEED < flags
TrainConfig resolve_config(const TrainArgs& a, const std::optional<RunManifest>& replay) {
  TrainConfig c;
  if (replay) c = replay->config;
  if (!a.config.empty()) c = load_train_config(a.config, c);
  if (const auto s = env_seed()) c.seed = *s;
  if (a.seed) c.seed = *a.seed;
  if (a.iterations) c.iterations = *a.iterations;
  if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
  if (a.log_every) c.log_every = *a.log_every;
  if (a.batch_edges) c.batch_edges = *a.batch_edges;
  if (a.batch_boundary) c.batch_boundary = *a.batch_boundary;
  if (a.batch_feature) c.batch_feature = *a.batch_feature;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.lambda_s) c.lambda_s = *a.lambda_s;
  if (a.lambda_b) c.lambda_b = *a.lambda_b;
  if (a.lambda_f) c.lambda_f = *a.lambda_f;
  if (a.sigma) c.sigma = *a.sigma;
  c.validate();
  return c;
}

int run_train(const TrainArgs& a) {
  Stopwatch clock;
  std::optional<RunManifest> replay;
  if (!a.manifest.empty()) {
    replay = load_manifest(a.manifest);
    if (replay->command != "train") throw InputError(a.manifest + ": not a train manifest");
  }
  const std::string bundle_dir = !a.bundle.empty() ? a.bundle : replay ? replay->bundle : "";
  if (bundle_dir.empty()) throw InputError("train needs a bundle directory or --manifest");
  const TrainConfig cfg = resolve_config(a, replay);

  RunManifest m;
  m.command = "train";
  m.config = cfg;
  m.bundle = fs::absolute(bundle_dir).lexically_normal().string();
  for (const char* f : {kBundleMesh, kBundleInput, kBundleFeatures, kBundleMeta}) {
    const std::string p = (fs::path(bundle_dir) / f).string();
    m.inputs.emplace_back(p, file_hash(p));
  }
  if (!a.config.empty()) m.inputs.emplace_back(a.config, file_hash(a.config));

  const Bundle b = load_bundle(bundle_dir);
  m.bundle_hash = hex64(b.hash);
  if (replay && replay->bundle_hash != m.bundle_hash)
    throw InputError("bundle " + bundle_dir + " does not match the replayed manifest (hash " + m.bundle_hash +
                     ", expected " + replay->bundle_hash + ")");
  const TrainingData data = prepare_training_data(b.mesh, b.features, cfg.sigma);
  m.timings.emplace_back("load", clock.lap());

  fs::create_directories(a.out);
  const auto ckpt_path = [&](const std::string& name) { return (fs::path(a.out) / name).string(); };
  const auto on_checkpoint = [&](long it, const MlpParams& p) {
    save_checkpoint({p, b.transform, b.hash}, ckpt_path("checkpoint_" + std::to_string(it) + ".nfck"));
  };
  const long report_every = std::max<long>(1, cfg.iterations / 20);
  const auto on_progress = [&](const LossReport& r) {
    if (!a.quiet && r.iteration % report_every == 0)
      std::cerr << "iter " << r.iteration << " total " << r.total << " (S " << r.smoothness << " B " << r.boundary
                << " F " << r.feature << ")\n";
  };

  TrainResult res;
  try {
    res = train(data, cfg, on_checkpoint, on_progress);
  } catch (const DivergenceError&) {
    m.timings.emplace_back("train", clock.lap());
    save_manifest(m, ckpt_path("manifest.json"));
    throw;
  }
  m.timings.emplace_back("train", clock.lap());

  const std::string ckpt = ckpt_path("checkpoint.nfck"), loss = ckpt_path("loss.csv"), conf = ckpt_path("config.json");
  save_checkpoint({res.params, b.transform, b.hash}, ckpt);
  {
    std::ostringstream ss;
    write_loss_csv(res.history, ss);
    write_file_bytes(loss, ss.str());
  }
  save_train_config(cfg, conf);
  for (const std::string& p : {ckpt, loss, conf}) m.outputs.emplace_back(p, file_hash(p));
  m.timings.emplace_back("write", clock.lap());
  save_manifest(m, ckpt_path("manifest.json"));

  std::cout << "iterations " << cfg.iterations << "\nseed " << cfg.seed << "\n";
  if (!res.history.empty()) std::cout << "final_loss " << detail::fmt17(res.history.back().total) << "\n";
  std::cout << "checkpoint " << ckpt << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeCommon {
  std::string checkpoint;
  std::string bundle;  // default: the bundle recorded next to the checkpoint
  std::string out;     // default: the checkpoint's directory
};

struct Loaded {
  Checkpoint ckpt;
  Bundle bundle;
  std::string out_dir;
};

Loaded load_for_analysis(const AnalyzeCommon& a) {
  Loaded l;
  l.ckpt = load_checkpoint(a.checkpoint);
  std::string bundle = a.bundle;
  const fs::path run_dir = fs::path(a.checkpoint).parent_path();
  if (bundle.empty()) {
    const fs::path mpath = run_dir / "manifest.json";
    if (!fs::exists(mpath)) throw InputError("no --bundle given and no manifest.json next to " + a.checkpoint);
    bundle = load_manifest(mpath.string()).bundle;
  }
  l.bundle = load_bundle(bundle);
  if (l.bundle.hash != l.ckpt.bundle_hash)
    throw InputError("checkpoint " + a.checkpoint + " was trained on a different bundle (" + hex64(l.ckpt.bundle_hash) +
                     " vs " + hex64(l.bundle.hash) + ")");
  l.out_dir = !a.out.empty() ? a.out : run_dir.empty() ? std::string(".") : run_dir.string();
  fs::create_directories(l.out_dir);
  return l;
}

std::string out_path(const Loaded& l, const std::string& name) { return (fs::path(l.out_dir) / name).string(); }

struct SingularArgs {
  int seeds = 500;
  std::uint64_t seed = 0;
  double min_side = 1e-3;
  int max_depth = 8;
};

int run_singularities(const AnalyzeCommon& c, const SingularArgs& a) {
  const Loaded l = load_for_analysis(c);
  const MeshDomain domain(l.bundle.mesh);
  SingularityOptions opt;
  opt.seeds = a.seeds;
  opt.seed = a.seed;
  opt.min_side = a.min_side;
  opt.max_depth = a.max_depth;
  std::vector<SingularPoint> pts = extract_singular_points(NeuralField{l.ckpt.params}, domain, opt);
  for (auto& p : pts) p.position = l.ckpt.transform.to_original(p.position);
  const std::string path = out_path(l, "singularities.ply");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_singular_ply(pts, out);
  std::cout << pts.size() << " singular points\noutput " << path << "\n";
  return 0;
}

struct StreamlineArgs {
  int count = 100;
  std::uint64_t seed = 0;
  double step = 0.01;
  int max_steps = 2000;
  bool surface = false;
};

int run_streamlines(const AnalyzeCommon& c, const StreamlineArgs& a) {
  if (a.count < 1) throw InputError("--count must be positive");
  const Loaded l = load_for_analysis(c);
  const NeuralField field{l.ckpt.params};
  StreamlineOptions opt;
  opt.step = a.step;
  opt.max_steps = a.max_steps;
  std::mt19937_64 rng(a.seed);
  std::vector<Streamline> lines;
  std::size_t by_reason[3] = {0, 0, 0};
  if (a.surface) {
    const SurfaceMesh surface = SurfaceMesh::from_boundary(l.bundle.mesh);
    for (int i = 0; i < a.count; ++i)
      lines.push_back(trace_surface_streamline(field, surface, surface.centroid(uniform_index(rng, surface.triangles.size())), opt));
  } else {
    const MeshDomain domain(l.bundle.mesh);
    const auto inside = [&](const Vec3& p) { return domain.contains(p); };
    for (int i = 0; i < a.count; ++i) {
      Vec3 p;
      int attempts = 0;
      do {
        for (int k = 0; k < 3; ++k) p[k] = uniform(rng, domain.lo()[k], domain.hi()[k]);
        if (++attempts > 10000) throw InputError("domain has no interior to seed");
      } while (!inside(p));
      lines.push_back(trace_streamline(field, p, inside, opt));
    }
  }
  for (auto& s : lines) {
    ++by_reason[static_cast<int>(s.reason)];
    s.seed = l.ckpt.transform.to_original(s.seed);
    for (Vec3& p : s.points) p = l.ckpt.transform.to_original(p);
  }
  const std::string path = out_path(l, a.surface ? "surface_streamlines.obj" : "streamlines.obj");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_obj_polylines(streamline_polylines(lines), out);
  std::cout << "streamlines " << lines.size();
  for (int r = 0; r < 3; ++r) std::cout << "\n" << to_string(static_cast<Termination>(r)) << ' ' << by_reason[r];
  std::cout << "\noutput " << path << "\n";
  return 0;
}

// Surface of the input mesh, queried through the normalization.
int run_crossfield(const AnalyzeCommon& c) {
  const Loaded l = load_for_analysis(c);
  std::vector<Vec3> v = l.bundle.input.vertices;
  for (Vec3& p : v) p = l.ckpt.transform.to_normalized(p);
  std::vector<Tri> tris;
  std::vector<Vec3> normals;
  for (const auto& f : l.bundle.input.boundary_faces) {
    tris.push_back(f.vertices);
    normals.push_back(f.normal);
  }
  const SurfaceMesh surface(std::move(v), std::move(tris), std::move(normals));
  const std::vector<Cross> crosses = extract_surface_cross_field(NeuralField{l.ckpt.params}, surface);
  const std::size_t ambiguous = std::count_if(crosses.begin(), crosses.end(), [](const Cross& x) { return x.ambiguous; });
  const std::string path = out_path(l, "crossfield.txt");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_cross_field(crosses, out);
  std::cout << "triangles " << crosses.size() << "\nambiguous " << ambiguous << "\noutput " << path << "\n";
  return 0;
}

int run_discretize(const AnalyzeCommon& c, const std::string& mesh_path) {
  const Loaded l = load_for_analysis(c);
  const TetMesh mesh = mesh_path.empty() ? l.bundle.input : load_tet_mesh(mesh_path);
  const DiscreteField f = discretize_volume_field(NeuralField{l.ckpt.params}, mesh, l.ckpt.transform);
  const std::string path = out_path(l, "frames.txt");
  save_frames(f, path);
  std::cout << "tets " << f.frames.size() << "\nprojection_failures " << f.failures.size();
  for (int t : f.failures) std::cout << ' ' << t;
  std::cout << "\noutput " << path << "\n";
  return 0;
}

int run_selfcheck_cmd() {
  const SelfcheckReport r = run_selfcheck();
  for (const auto& c : r.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  return r.passed() ? 0 : kExitSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural octahedral frame fields on tetrahedral meshes"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "Normalize a mesh, detect features and write a bundle");
  pre->add_option("mesh", pa.mesh, "Input tetrahedral mesh (.mesh)");
  pre->add_option("--primitive", pa.primitive, "Generate cube | box | cylinder | l_shape instead of reading a mesh");
  pre->add_option("--resolution", pa.resolution, "Primitive resolution")->check(CLI::PositiveNumber);
  pre->add_option("--features", pa.features, "Feature curves (.obj polylines or text segments), replaces detection");
  pre->add_option("--feature-angle", pa.feature_angle, "Dihedral threshold in degrees")->check(CLI::Range(0.0, 180.0));
  pre->add_option("-o,--out", pa.out, "Bundle directory")->capture_default_str();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Fit the neural frame field to a bundle");
  tr->add_option("bundle", ta.bundle, "Bundle directory from preprocess");
  tr->add_option("--config", ta.config, "Training config JSON");
  tr->add_option("--manifest", ta.manifest, "Replay the run recorded in a manifest");
  tr->add_option("-o,--out", ta.out, "Run directory")->capture_default_str();
  tr->add_option("--iterations", ta.iterations);
  tr->add_option("--seed", ta.seed, "Overrides NEURFRAME_SEED and the config");
  tr->add_option("--lr", ta.lr);
  tr->add_option("--lambda-s", ta.lambda_s);
  tr->add_option("--lambda-b", ta.lambda_b);
  tr->add_option("--lambda-f", ta.lambda_f);
  tr->add_option("--sigma", ta.sigma);
  tr->add_option("--batch-edges", ta.batch_edges);
  tr->add_option("--batch-boundary", ta.batch_boundary);
  tr->add_option("--batch-feature", ta.batch_feature);
  tr->add_option("--log-every", ta.log_every);
  tr->add_option("--checkpoint-every", ta.checkpoint_every);
  tr->add_flag("-q,--quiet", ta.quiet);

  auto* an = app.add_subcommand("analyze", "Extract structure from a trained field");
  an->require_subcommand(1);
  AnalyzeCommon common;
  const auto add_common = [&](CLI::App* s) {
    s->add_option("checkpoint", common.checkpoint, "Checkpoint file")->required();
    s->add_option("--bundle", common.bundle, "Bundle directory (default: from the run manifest)");
    s->add_option("-o,--out", common.out, "Output directory (default: the checkpoint's directory)");
  };
  SingularArgs sa;
  auto* sing = an->add_subcommand("singularities", "Singular points by triangle subdivision (PLY)");
  add_common(sing);
  sing->add_option("--seeds", sa.seeds)->capture_default_str()->check(CLI::PositiveNumber);
  sing->add_option("--seed", sa.seed)->capture_default_str();
  sing->add_option("--min-side", sa.min_side)->capture_default_str();
  sing->add_option("--max-depth", sa.max_depth)->capture_default_str();
  StreamlineArgs sl;
  auto* stream = an->add_subcommand("streamlines", "Trace frame-axis streamlines (OBJ polylines)");
  add_common(stream);
  stream->add_option("--count", sl.count)->capture_default_str();
  stream->add_option("--seed", sl.seed)->capture_default_str();
  stream->add_option("--step", sl.step)->capture_default_str()->check(CLI::PositiveNumber);
  stream->add_option("--max-steps", sl.max_steps)->capture_default_str();
  stream->add_flag("--surface", sl.surface, "Trace on the boundary surface");
  auto* cross = an->add_subcommand("crossfield", "Per-triangle boundary cross field");
  add_common(cross);
  std::string disc_mesh;
  auto* disc = an->add_subcommand("discretize", "Per-tet frames on a volumetric mesh");
  add_common(disc);
  disc->add_option("--mesh", disc_mesh, "Mesh in original coordinates (default: the preprocessed input)");

  auto* sc = app.add_subcommand("selfcheck", "Run the embedded oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*pre) return run_preprocess(pa);
    if (*tr) return run_train(ta);
    if (*sing) return run_singularities(common, sa);
    if (*stream) return run_streamlines(common, sl);
    if (*cross) return run_crossfield(common);
    if (*disc) return run_discretize(common, disc_mesh);
    if (*sc) return run_selfcheck_cmd();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
