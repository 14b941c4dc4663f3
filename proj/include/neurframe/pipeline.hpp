#pragma once

// On-disk preprocessed bundle and run manifests shared by the command-line
// stages.

#include "neurframe/exports.hpp"
#include "neurframe/features.hpp"
#include "neurframe/training.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <sstream>

namespace neurframe {

inline constexpr const char* kToolVersion = "1.0.0";

// Bundle directory layout.
inline constexpr const char* kBundleMesh = "mesh.mesh";         // normalized, subdivided
inline constexpr const char* kBundleInput = "input.mesh";       // input mesh, original coordinates
inline constexpr const char* kBundleFeatures = "features.txt";  // normalized coordinates
inline constexpr const char* kBundleMeta = "bundle.json";

struct Bundle {
  TetMesh mesh;   // normalized + subdivided: the training domain
  TetMesh input;  // as given, original coordinates
  FeatureSet features;
  SimilarityTransform transform;
  std::string feature_source = "detected";
  std::uint64_t hash = 0;
};

struct PreprocessStats {
  std::size_t centroids = 0;
  std::size_t dual_edges = 0;
  std::size_t boundary_samples = 0;
  std::size_t features = 0;
};

inline PreprocessStats bundle_stats(const Bundle& b) {
  return {b.mesh.tets.size(), b.mesh.interior_face_count(), b.mesh.boundary_faces.size(), b.features.size()};
}

inline std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << bytes;
  if (!out) throw InputError("write failed: " + path);
}

namespace detail {

inline std::string mesh_text(const TetMesh& m) {
  std::ostringstream ss;
  write_medit(m, ss);
  return ss.str();
}

inline std::string features_text(const FeatureSet& f) {
  std::ostringstream ss;
  write_feature_file(f, ss);
  return ss.str();
}

inline std::uint64_t bundle_hash(const std::string& mesh, const std::string& input, const std::string& features,
                                 const SimilarityTransform& tr) {
  std::uint64_t h = fnv1a64(mesh);
  h = fnv1a64(input, h);
  h = fnv1a64(features, h);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g", tr.scale, tr.center.x(), tr.center.y(), tr.center.z());
  return fnv1a64(buf, h);
}

}  // namespace detail

/// Normalizes, detects or maps features, and splits multi-boundary tets.
/// `user_features` are in the input's coordinates and replace detection.
inline Bundle preprocess(const TetMesh& input, const std::optional<FeatureSet>& user_features,
                         double feature_angle = kPi / 4) {
  Bundle b;
  b.input = input;
  const NormalizedMesh n = normalize_to_unit_box(input);
  b.transform = n.transform;
  if (user_features) {
    b.features = transform_features(*user_features, n.transform);
    b.feature_source = "file";
  } else {
    b.features = detect_features(n.mesh, feature_angle);
  }
  b.mesh = subdivide_multi_boundary_tets(n.mesh);
  b.hash = detail::bundle_hash(detail::mesh_text(b.mesh), detail::mesh_text(b.input), detail::features_text(b.features),
                               b.transform);
  return b;
}

inline void save_bundle(const Bundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string mesh = detail::mesh_text(b.mesh), input = detail::mesh_text(b.input),
                    features = detail::features_text(b.features);
  write_file_bytes((fs::path(dir) / kBundleMesh).string(), mesh);
  write_file_bytes((fs::path(dir) / kBundleInput).string(), input);
  write_file_bytes((fs::path(dir) / kBundleFeatures).string(), features);
  const PreprocessStats s = bundle_stats(b);
  nlohmann::json meta = {
      {"format", 1},
      {"transform", {{"scale", b.transform.scale}, {"center", {b.transform.center.x(), b.transform.center.y(), b.transform.center.z()}}}},
      {"feature_source", b.feature_source},
      {"counts",
       {{"centroids", s.centroids}, {"dual_edges", s.dual_edges}, {"boundary_samples", s.boundary_samples}, {"features", s.features}}},
      {"hash", hex64(detail::bundle_hash(mesh, input, features, b.transform))}};
  write_file_bytes((fs::path(dir) / kBundleMeta).string(), meta.dump(2) + "\n");
}

inline Bundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("not a bundle directory: " + dir);
  Bundle b;
  nlohmann::json meta;
  const std::string meta_path = (fs::path(dir) / kBundleMeta).string();
  try {
    meta = nlohmann::json::parse(read_file_bytes(meta_path));
    b.transform.scale = meta.at("transform").at("scale").get<double>();
    for (int a = 0; a < 3; ++a) b.transform.center[a] = meta.at("transform").at("center").at(a).get<double>();
    b.feature_source = meta.value("feature_source", "detected");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(meta_path + ": " + e.what());
  }
  const std::string mesh = read_file_bytes((fs::path(dir) / kBundleMesh).string());
  const std::string input = read_file_bytes((fs::path(dir) / kBundleInput).string());
  const std::string features = read_file_bytes((fs::path(dir) / kBundleFeatures).string());
  {
    std::istringstream in(mesh);
    b.mesh = read_medit(in, (fs::path(dir) / kBundleMesh).string());
  }
  {
    std::istringstream in(input);
    b.input = read_medit(in, (fs::path(dir) / kBundleInput).string());
  }
  {
    std::istringstream in(features);
    b.features = read_feature_file(in, (fs::path(dir) / kBundleFeatures).string());
  }
  b.hash = detail::bundle_hash(mesh, input, features, b.transform);
  return b;
}

/// Reproduction record of one command.
struct RunManifest {
  std::string command;
  TrainConfig config;
  std::string bundle;  // absolute bundle directory
  std::string bundle_hash;
  std::vector<std::pair<std::string, std::string>> inputs;   // path -> fnv1a64 hex
  std::vector<std::pair<std::string, std::string>> outputs;  // path -> fnv1a64 hex
  std::vector<std::pair<std::string, double>> timings;       // stage -> seconds
  std::string version = kToolVersion;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j = {{"tool", "neurframe"},
                      {"version", m.version},
                      {"command", m.command},
                      {"config", to_json(m.config)},
                      {"seed", m.config.seed},
                      {"bundle", m.bundle},
                      {"bundle_hash", m.bundle_hash}};
  j["inputs"] = nlohmann::json::object();
  for (const auto& [k, v] : m.inputs) j["inputs"][k] = v;
  j["outputs"] = nlohmann::json::object();
  for (const auto& [k, v] : m.outputs) j["outputs"][k] = v;
  j["timing_seconds"] = nlohmann::json::object();
  for (const auto& [k, v] : m.timings) j["timing_seconds"][k] = v;
  return j;
}

inline RunManifest load_manifest(const std::string& path) {
  RunManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(read_file_bytes(path));
    m.command = j.at("command").get<std::string>();
    apply_json(m.config, j.at("config"), path);
    m.bundle = j.at("bundle").get<std::string>();
    m.bundle_hash = j.at("bundle_hash").get<std::string>();
    m.version = j.value("version", "");
    const nlohmann::json inputs = j.value("inputs", nlohmann::json::object());
    for (const auto& [k, v] : inputs.items()) m.inputs.emplace_back(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return m;
}

inline void save_manifest(const RunManifest& m, const std::string& path) {
  write_file_bytes(path, to_json(m).dump(2) + "\n");
}

}  // namespace neurframe
