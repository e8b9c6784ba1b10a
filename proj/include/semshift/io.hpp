#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semshift/core.hpp"
#include "semshift/synth.hpp"

namespace semshift::io {

using Json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

Json to_json(const StructuredScene& scene);
StructuredScene scene_from_json(const Json& j);

Json to_json(const OrientedBox& b);
Json to_json(const WallSegment& w);
Json to_json(const Opening& o);

Json to_json(const synth::GenParams& p);
/// Missing keys keep their defaults.
synth::GenParams gen_params_from_json(const Json& j);

Json to_json(const synth::SceneBundle& bundle);
synth::SceneBundle bundle_from_json(const Json& j);

/// Writes text atomically enough for our purposes: to a temporary file, then renamed.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_bundle(const std::filesystem::path& path, const synth::SceneBundle& bundle);
synth::SceneBundle read_bundle(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;    // scene_<seed>
  std::string path;  // relative to the manifest's directory
  std::uint64_t seed = 0;
};

struct Manifest {
  std::uint64_t base_seed = 0;
  synth::GenParams params;
  std::vector<ManifestEntry> scenes;
  std::filesystem::path dir;  // set on read

  std::filesystem::path resolve(const ManifestEntry& e) const { return dir / e.path; }
};

Json to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::string scene_id(std::uint64_t seed);

/// Generates `count` bundles with seeds base_seed .. base_seed + count - 1 and a manifest.
Manifest synthesize_dataset(const synth::GenParams& params, std::uint64_t base_seed,
                            std::size_t count, const std::filesystem::path& out_dir);

}  // namespace semshift::io
