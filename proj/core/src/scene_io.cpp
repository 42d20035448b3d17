#include "hyspec/scene_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"

namespace hyspec {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; add byte swapping for this host");

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::pair<fs::path, fs::path> scene_paths(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
  fs::path bin = stem;
  bin += ".bin";
  fs::path header = stem;
  header += ".json";
  return {bin, header};
}

}  // namespace

void write_scene(const fs::path& path, const HyperspectralScene& scene) {
  scene.validate();
  const auto [bin, header] = scene_paths(path);
  json h;
  h["height"] = scene.height;
  h["width"] = scene.width;
  h["bands"] = scene.band_count();
  h["gsd_m"] = scene.gsd_m;
  h["wavelengths_um"] = scene.axis.wavelengths();
  h["interleave"] = "bip";
  h["data_type"] = "float32";
  h["byte_order"] = "little";
  std::string raw(scene.cube.size() * sizeof(float), '\0');
  std::memcpy(raw.data(), scene.cube.data(), raw.size());
  write_file_atomic(bin, raw);
  write_file_atomic(header, h.dump(2) + "\n");
}

HyperspectralScene read_scene(const fs::path& path) {
  const auto [bin, header] = scene_paths(path);
  json h;
  try {
    h = json::parse(read_file(header));
  } catch (const json::exception& e) {
    throw IoError("bad scene header " + header.string() + ": " + e.what());
  }
  HyperspectralScene scene;
  try {
    scene.height = h.at("height").get<std::size_t>();
    scene.width = h.at("width").get<std::size_t>();
    scene.gsd_m = h.at("gsd_m").get<double>();
    scene.axis = SpectralAxis(h.at("wavelengths_um").get<std::vector<double>>());
    if (h.at("bands").get<std::size_t>() != scene.axis.band_count()) {
      throw SizeError("header band count disagrees with the wavelength list");
    }
  } catch (const json::exception& e) {
    throw IoError("bad scene header " + header.string() + ": " + e.what());
  }
  const std::string raw = read_file(bin);
  const std::size_t expected = scene.height * scene.width * scene.band_count();
  if (raw.size() != expected * sizeof(float)) {
    throw SizeError(bin.string() + " holds " + std::to_string(raw.size()) + " bytes, expected " +
                    std::to_string(expected * sizeof(float)));
  }
  scene.cube.resize(expected);
  std::memcpy(scene.cube.data(), raw.data(), raw.size());
  scene.validate();
  return scene;
}

void write_ground_truth(const fs::path& path, const GroundTruth& gt) {
  json polys = json::array();
  for (const Polygon& p : gt.polygons) {
    json verts = json::array();
    for (const Point& v : p.vertices) verts.push_back({v.x, v.y});
    json item;
    item["vertices"] = std::move(verts);
    item["land_cover"] = p.land_cover;
    item["land_use"] = p.land_use;
    item["group"] = p.group ? json(*p.group) : json(nullptr);
    polys.push_back(std::move(item));
  }
  json doc;
  doc["polygons"] = std::move(polys);
  write_file_atomic(path, doc.dump(2) + "\n");
}

GroundTruth read_ground_truth(const fs::path& path) {
  GroundTruth gt;
  try {
    const json doc = json::parse(read_file(path));
    for (const json& item : doc.at("polygons")) {
      Polygon p;
      for (const json& v : item.at("vertices")) {
        if (v.size() != 2) throw IoError("vertex must be [x, y]");
        p.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      p.land_cover = item.at("land_cover").get<int>();
      p.land_use = item.value("land_use", 0);
      if (item.contains("group") && !item["group"].is_null()) p.group = item["group"].get<int>();
      gt.polygons.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw IoError("bad ground truth " + path.string() + ": " + e.what());
  }
  return gt;
}

}  // namespace hyspec
