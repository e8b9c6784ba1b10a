#include "semshift/io.hpp"

#include <fstream>
#include <sstream>

namespace semshift::io {

namespace fs = std::filesystem;

Json to_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const WallSegment& w) {
  Json j;
  j["a"] = to_json(w.a);
  j["b"] = to_json(w.b);
  j["height"] = w.height;
  j["thickness"] = w.thickness;
  return j;
}

Json to_json(const Opening& o) {
  Json j;
  j["kind"] = o.kind == OpeningKind::Door ? "door" : "window";
  j["wall_index"] = o.wall_index;
  j["center"] = to_json(o.center);
  j["width"] = o.width;
  j["height"] = o.height;
  return j;
}

Json to_json(const OrientedBox& b) {
  Json j;
  j["category"] = b.category;
  j["center"] = to_json(b.center);
  j["yaw"] = b.yaw;
  j["size"] = to_json(b.size);
  return j;
}

Json to_json(const StructuredScene& scene) {
  Json j;
  j["walls"] = Json::array();
  for (const auto& w : scene.walls) j["walls"].push_back(to_json(w));
  j["openings"] = Json::array();
  for (const auto& o : scene.openings) j["openings"].push_back(to_json(o));
  j["boxes"] = Json::array();
  for (const auto& b : scene.boxes) j["boxes"].push_back(to_json(b));
  return j;
}

StructuredScene scene_from_json(const Json& j) {
  StructuredScene s;
  try {
    for (const auto& w : j.at("walls"))
      s.walls.push_back({vec3_from_json(w.at("a")), vec3_from_json(w.at("b")),
                         w.at("height").get<double>(), w.at("thickness").get<double>()});
    for (const auto& o : j.at("openings")) {
      const std::string kind = o.at("kind").get<std::string>();
      if (kind != "door" && kind != "window") throw IoError("unknown opening kind '" + kind + "'");
      s.openings.push_back({kind == "door" ? OpeningKind::Door : OpeningKind::Window,
                            o.at("wall_index").get<int>(), vec3_from_json(o.at("center")),
                            o.at("width").get<double>(), o.at("height").get<double>()});
    }
    for (const auto& b : j.at("boxes")) {
      OrientedBox box;
      box.category = b.at("category").get<std::string>();
      box.center = vec3_from_json(b.at("center"));
      box.yaw = b.at("yaw").get<double>();
      box.size = vec3_from_json(b.at("size"));
      s.boxes.push_back(box);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("scene: ") + e.what());
  }
  return s;
}

namespace {

Json range(const synth::Range& r) { return Json::array({r.lo, r.hi}); }
Json range(const synth::IntRange& r) { return Json::array({r.lo, r.hi}); }

template <typename T>
void read_key(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const Json& j, const char* key, synth::Range& r) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw IoError(std::string("params: ") + key + " must be [lo, hi]");
  r = {a[0].get<double>(), a[1].get<double>()};
}

void read_range(const Json& j, const char* key, synth::IntRange& r) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw IoError(std::string("params: ") + key + " must be [lo, hi]");
  r = {a[0].get<int>(), a[1].get<int>()};
}

const char* group_key(std::size_t k) {
  static constexpr std::array<const char*, 3> keys{"furniture", "wall", "opening"};
  return keys[k];
}

}  // namespace

Json to_json(const synth::GenParams& p) {
  Json j;
  j["seed"] = p.seed;
  j["room_width"] = range(p.room_width);
  j["room_depth"] = range(p.room_depth);
  j["room_height"] = range(p.room_height);
  j["wall_thickness"] = p.wall_thickness;
  j["doors"] = range(p.doors);
  j["windows"] = range(p.windows);
  j["door_width"] = range(p.door_width);
  j["door_height"] = range(p.door_height);
  j["window_width"] = range(p.window_width);
  j["window_height"] = range(p.window_height);
  j["window_sill"] = range(p.window_sill);
  j["opening_margin"] = p.opening_margin;
  j["furniture"] = range(p.furniture);
  j["furniture_footprint"] = range(p.furniture_footprint);
  j["furniture_height"] = range(p.furniture_height);
  j["clearance"] = p.clearance;
  j["max_attempts"] = p.max_attempts;
  j["density"] = p.density;
  j["noise_sigma"] = p.noise_sigma;
  j["sample_floor"] = p.sample_floor;
  j["cameras"] = p.cameras;
  j["focal"] = p.focal;
  j["raster_width"] = p.raster_width;
  j["raster_height"] = p.raster_height;
  j["camera_height"] = p.camera_height;
  j["camera_inset"] = p.camera_inset;
  return j;
}

synth::GenParams gen_params_from_json(const Json& j) {
  synth::GenParams p;
  if (!j.is_object()) throw IoError("params: expected an object");
  try {
    read_key(j, "seed", p.seed);
    read_range(j, "room_width", p.room_width);
    read_range(j, "room_depth", p.room_depth);
    read_range(j, "room_height", p.room_height);
    read_key(j, "wall_thickness", p.wall_thickness);
    read_range(j, "doors", p.doors);
    read_range(j, "windows", p.windows);
    read_range(j, "door_width", p.door_width);
    read_range(j, "door_height", p.door_height);
    read_range(j, "window_width", p.window_width);
    read_range(j, "window_height", p.window_height);
    read_range(j, "window_sill", p.window_sill);
    read_key(j, "opening_margin", p.opening_margin);
    read_range(j, "furniture", p.furniture);
    read_range(j, "furniture_footprint", p.furniture_footprint);
    read_range(j, "furniture_height", p.furniture_height);
    read_key(j, "clearance", p.clearance);
    read_key(j, "max_attempts", p.max_attempts);
    read_key(j, "density", p.density);
    read_key(j, "noise_sigma", p.noise_sigma);
    read_key(j, "sample_floor", p.sample_floor);
    read_key(j, "cameras", p.cameras);
    read_key(j, "focal", p.focal);
    read_key(j, "raster_width", p.raster_width);
    read_key(j, "raster_height", p.raster_height);
    read_key(j, "camera_height", p.camera_height);
    read_key(j, "camera_inset", p.camera_inset);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("params: ") + e.what());
  }
  return p;
}

Json to_json(const synth::SceneBundle& b) {
  Json j;
  Json meta;
  meta["seed"] = b.params.seed;
  meta["params"] = to_json(b.params);
  j["meta"] = std::move(meta);
  j["scene"] = to_json(b.scene);

  Json cloud;
  Json pos = Json::array(), raw = Json::array(), color = Json::array(), group = Json::array(),
       inst = Json::array();
  for (const auto& p : b.cloud.points) {
    pos.push_back(to_json(p.pos));
    raw.push_back(p.raw);
    color.push_back(Json::array({p.color.r, p.color.g, p.color.b}));
    group.push_back(std::string(group_name(p.gt_group)));
    inst.push_back(p.instance_id ? Json(*p.instance_id) : Json(nullptr));
  }
  cloud["d_raw"] = b.cloud.d_raw;
  cloud["pos"] = std::move(pos);
  cloud["raw"] = std::move(raw);
  cloud["color"] = std::move(color);
  cloud["gt_group"] = std::move(group);
  cloud["instance_id"] = std::move(inst);
  j["cloud"] = std::move(cloud);

  Json views;
  Json cams = Json::array();
  for (const auto& c : b.cameras) {
    Json cj;
    cj["view_id"] = c.view_id;
    cj["position"] = to_json(c.position);
    cj["forward"] = to_json(c.forward);
    cj["right"] = to_json(c.right);
    cj["down"] = to_json(c.down);
    cj["focal"] = c.focal;
    cj["width"] = c.width;
    cj["height"] = c.height;
    cams.push_back(std::move(cj));
  }
  views["cameras"] = std::move(cams);
  Json masks = Json::array();
  for (const auto& v : b.views) {
    Json mj;
    mj["view_id"] = v.view_id;
    mj["width"] = v.width;
    mj["height"] = v.height;
    // Sparse storage: flat (u, v) pairs of set pixels per group.
    for (std::size_t k = 0; k < 3; ++k) {
      Json px = Json::array();
      for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x)
          if (v.masks[k][v.offset(x, y)]) {
            px.push_back(x);
            px.push_back(y);
          }
      mj[group_key(k)] = std::move(px);
    }
    masks.push_back(std::move(mj));
  }
  views["masks"] = std::move(masks);
  Json pmap = Json::array();
  for (const auto& s : b.pmap.support) {
    Json row = Json::array();
    for (const auto& px : s) {
      row.push_back(px.view_id);
      row.push_back(px.u);
      row.push_back(px.v);
    }
    pmap.push_back(std::move(row));
  }
  views["pmap"] = std::move(pmap);
  j["views"] = std::move(views);
  return j;
}

synth::SceneBundle bundle_from_json(const Json& j) {
  synth::SceneBundle b;
  try {
    b.params = gen_params_from_json(j.at("meta").at("params"));
    b.scene = scene_from_json(j.at("scene"));
    const Json& c = j.at("cloud");
    b.cloud.d_raw = c.at("d_raw").get<int>();
    const auto& pos = c.at("pos");
    const auto& raw = c.at("raw");
    const auto& color = c.at("color");
    const auto& group = c.at("gt_group");
    const auto& inst = c.at("instance_id");
    const std::size_t n = pos.size();
    if (raw.size() != n || color.size() != n || group.size() != n || inst.size() != n)
      throw IoError("bundle: cloud arrays differ in length");
    b.cloud.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = b.cloud.points[i];
      p.pos = vec3_from_json(pos[i]);
      p.raw = raw[i].get<std::vector<double>>();
      if (static_cast<int>(p.raw.size()) != b.cloud.d_raw) throw IoError("bundle: raw width mismatch");
      const auto col = color[i].get<std::vector<double>>();
      if (col.size() != 3) throw IoError("bundle: color must have 3 channels");
      p.color = {col[0], col[1], col[2]};
      const auto g = group_from_name(group[i].get<std::string>());
      if (!g) throw IoError("bundle: unknown group '" + group[i].get<std::string>() + "'");
      p.gt_group = *g;
      if (!inst[i].is_null()) p.instance_id = inst[i].get<int>();
    }

    const Json& v = j.at("views");
    for (const auto& cj : v.at("cameras")) {
      synth::Camera cam;
      cam.view_id = cj.at("view_id").get<int>();
      cam.position = vec3_from_json(cj.at("position"));
      cam.forward = vec3_from_json(cj.at("forward"));
      cam.right = vec3_from_json(cj.at("right"));
      cam.down = vec3_from_json(cj.at("down"));
      cam.focal = cj.at("focal").get<double>();
      cam.width = cj.at("width").get<int>();
      cam.height = cj.at("height").get<int>();
      b.cameras.push_back(cam);
    }
    for (const auto& mj : v.at("masks")) {
      ViewMaskSet view(mj.at("view_id").get<int>(), mj.at("width").get<int>(),
                       mj.at("height").get<int>());
      for (std::size_t k = 0; k < 3; ++k) {
        const auto px = mj.at(group_key(k)).get<std::vector<int>>();
        if (px.size() % 2) throw IoError("bundle: odd mask pixel list");
        for (std::size_t q = 0; q < px.size(); q += 2) {
          if (!view.contains(px[q], px[q + 1])) throw IoError("bundle: mask pixel out of raster");
          view.masks[k][view.offset(px[q], px[q + 1])] = 1;
        }
      }
      b.views.push_back(std::move(view));
    }
    const auto& pmap = v.at("pmap");
    if (pmap.size() != n) throw IoError("bundle: pmap length differs from the cloud");
    b.pmap.support.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto flat = pmap[i].get<std::vector<int>>();
      if (flat.size() % 3) throw IoError("bundle: pmap rows hold (view, u, v) triples");
      for (std::size_t q = 0; q < flat.size(); q += 3)
        b.pmap.support[i].push_back({flat[q], flat[q + 1], flat[q + 2]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bundle: ") + e.what());
  }
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bundle(const fs::path& path, const synth::SceneBundle& bundle) {
  write_text(path, to_json(bundle).dump() + "\n");
}

synth::SceneBundle read_bundle(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
  return bundle_from_json(j);
}

std::string scene_id(std::uint64_t seed) { return "scene_" + std::to_string(seed); }

Json to_json(const Manifest& m) {
  Json j;
  j["base_seed"] = m.base_seed;
  j["count"] = m.scenes.size();
  j["params"] = to_json(m.params);
  j["scenes"] = Json::array();
  for (const auto& e : m.scenes) {
    Json s;
    s["id"] = e.id;
    s["path"] = e.path;
    s["seed"] = e.seed;
    j["scenes"].push_back(std::move(s));
  }
  return j;
}

Manifest manifest_from_json(const Json& j) {
  Manifest m;
  try {
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.params = gen_params_from_json(j.at("params"));
    for (const auto& s : j.at("scenes"))
      m.scenes.push_back({s.at("id").get<std::string>(), s.at("path").get<std::string>(),
                          s.at("seed").get<std::uint64_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
  Manifest m = manifest_from_json(j);
  m.dir = path.parent_path();
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  write_text(path, to_json(m).dump(2) + "\n");
}

Manifest synthesize_dataset(const synth::GenParams& params, std::uint64_t base_seed,
                            std::size_t count, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  Manifest m;
  m.base_seed = base_seed;
  m.params = params;
  m.dir = out_dir;
  for (std::size_t i = 0; i < count; ++i) {
    synth::GenParams p = params;
    p.seed = base_seed + i;
    const std::string id = scene_id(p.seed);
    const std::string file = id + ".scene.json";
    write_bundle(out_dir / file, synth::generate_scene(p));
    m.scenes.push_back({id, file, p.seed});
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace semshift::io
