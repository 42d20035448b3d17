#include "hyspec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"
#include "hyspec/features.hpp"
#include "hyspec/hash.hpp"
#include "hyspec/knn.hpp"
#include "hyspec/metrics.hpp"
#include "hyspec/model_io.hpp"
#include "hyspec/scene_io.hpp"
#include "hyspec/split_io.hpp"

namespace hyspec::pipeline {

using nlohmann::ordered_json;

std::string toolkit_version() { return HYSPEC_VERSION; }

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.add_bytes(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string model_file_stem(const std::string& model) {
  std::string s;
  for (char c : model) s += c == '+' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// ---------------------------------------------------------------- config

namespace {

class FieldReader {
 public:
  FieldReader(const ordered_json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(prefix_ + " must be an object");
  }

  ~FieldReader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) errors_.push_back(name(key) + " is not a known field");
    }
  }

  void get(const std::string& key, std::size_t& dst) {
    if (const auto* v = find(key)) {
      if (v->is_number_unsigned()) {
        dst = v->get<std::size_t>();
      } else {
        errors_.push_back(name(key) + " must be a non-negative integer");
      }
    }
  }
  void get(const std::string& key, int& dst) {
    if (const auto* v = find(key)) {
      if (v->is_number_integer()) {
        dst = v->get<int>();
      } else {
        errors_.push_back(name(key) + " must be an integer");
      }
    }
  }
  void get(const std::string& key, std::uint64_t& dst, bool) {
    if (const auto* v = find(key)) {
      if (v->is_number_unsigned()) {
        dst = v->get<std::uint64_t>();
      } else {
        errors_.push_back(name(key) + " must be a non-negative integer");
      }
    }
  }
  void get(const std::string& key, double& dst) {
    if (const auto* v = find(key)) {
      if (v->is_number()) {
        dst = v->get<double>();
      } else {
        errors_.push_back(name(key) + " must be a number");
      }
    }
  }
  void get(const std::string& key, bool& dst) {
    if (const auto* v = find(key)) {
      if (v->is_boolean()) {
        dst = v->get<bool>();
      } else {
        errors_.push_back(name(key) + " must be true or false");
      }
    }
  }
  void get(const std::string& key, fs::path& dst) {
    if (const auto* v = find(key)) {
      if (v->is_string()) {
        dst = v->get<std::string>();
      } else {
        errors_.push_back(name(key) + " must be a string");
      }
    }
  }
  const ordered_json* object(const std::string& key) { return find(key); }
  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  const ordered_json* find(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object()) return nullptr;
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const ordered_json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

ordered_json synthetic_json(const SyntheticSceneConfig& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"bands", s.bands},
          {"materials", s.materials},
          {"polygons", s.polygons},
          {"class_budget", s.class_budget},
          {"gsd_m", s.gsd_m},
          {"first_um", s.first_um},
          {"last_um", s.last_um},
          {"noise_sigma", s.noise_sigma},
          {"brightness_jitter", s.brightness_jitter},
          {"min_side", s.min_side},
          {"max_side", s.max_side},
          {"max_retries", s.max_retries}};
}

void read_synthetic(FieldReader& r, SyntheticSceneConfig& s) {
  r.get("height", s.height);
  r.get("width", s.width);
  r.get("bands", s.bands);
  r.get("materials", s.materials);
  r.get("polygons", s.polygons);
  r.get("class_budget", s.class_budget);
  r.get("gsd_m", s.gsd_m);
  r.get("first_um", s.first_um);
  r.get("last_um", s.last_um);
  r.get("noise_sigma", s.noise_sigma);
  r.get("brightness_jitter", s.brightness_jitter);
  r.get("min_side", s.min_side);
  r.get("max_side", s.max_side);
  r.get("max_retries", s.max_retries);
}

ordered_json mae_json(const mae::MAEConfig& c) {
  return {{"token_len", c.token_len},         {"embed_dim", c.embed_dim},
          {"n_heads", c.n_heads},             {"encoder_depth", c.encoder_depth},
          {"decoder_depth", c.decoder_depth}, {"decoder_dim", c.decoder_dim},
          {"decoder_heads", c.decoder_heads}, {"mlp_ratio", c.mlp_ratio},
          {"mask_ratio", c.mask_ratio},       {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},           {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},         {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"validation_fraction", c.validation_fraction},
          {"eval_samples", c.eval_samples}};
}

void read_mae(FieldReader& r, mae::MAEConfig& c) {
  r.get("token_len", c.token_len);
  r.get("embed_dim", c.embed_dim);
  r.get("n_heads", c.n_heads);
  r.get("encoder_depth", c.encoder_depth);
  r.get("decoder_depth", c.decoder_depth);
  r.get("decoder_dim", c.decoder_dim);
  r.get("decoder_heads", c.decoder_heads);
  r.get("mlp_ratio", c.mlp_ratio);
  r.get("mask_ratio", c.mask_ratio);
  r.get("learning_rate", c.learning_rate);
  r.get("momentum", c.momentum);
  r.get("weight_decay", c.weight_decay);
  r.get("clip_norm", c.clip_norm);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("validation_fraction", c.validation_fraction);
  r.get("eval_samples", c.eval_samples);
}

ordered_json ae_json(const mae::AEConfig& c) {
  return {{"latent_dim", c.latent_dim},       {"hidden_dim", c.hidden_dim}, {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},           {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction}};
}

void read_ae(FieldReader& r, mae::AEConfig& c) {
  r.get("latent_dim", c.latent_dim);
  r.get("hidden_dim", c.hidden_dim);
  r.get("learning_rate", c.learning_rate);
  r.get("momentum", c.momentum);
  r.get("weight_decay", c.weight_decay);
  r.get("clip_norm", c.clip_norm);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("validation_fraction", c.validation_fraction);
}

ordered_json config_json(const PipelineConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["scene"] = c.scene.string();
  j["ground_truth"] = c.ground_truth.string();
  j["split_file"] = c.split_file.string();
  j["model_dir"] = c.model_dir.string();
  j["synthetic"] = synthetic_json(c.synthetic);
  j["grouping_radius_m"] = c.grouping_radius_m;
  j["split"] = {{"train", c.proportions.train},
                {"validation", c.proportions.validation},
                {"test", c.proportions.test},
                {"count", c.splits},
                {"min_hamming", c.min_hamming}};
  j["features"] = {{"patch_size", c.patch_size}, {"patch_stride", c.patch_stride}};
  j["mae"] = mae_json(c.mae);
  j["ae"] = ae_json(c.ae);
  j["max_pretrain_pixels"] = c.max_pretrain_pixels;
  j["classifiers"] = {{"knn_k", c.knn_k},
                      {"rf_trees", c.forest.n_trees},
                      {"rf_max_features", c.forest.max_features},
                      {"rf_min_samples_split", c.forest.min_samples_split},
                      {"rf_max_depth", c.forest.max_depth}};
  return j;
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  std::vector<std::string> errors;
  {
    FieldReader r(doc, "", errors);
    r.get("seed", c.seed, true);
    r.get("out", c.out);
    r.get("scene", c.scene);
    r.get("ground_truth", c.ground_truth);
    r.get("split_file", c.split_file);
    r.get("model_dir", c.model_dir);
    if (const auto* s = r.object("synthetic")) {
      FieldReader sr(*s, "synthetic", errors);
      read_synthetic(sr, c.synthetic);
    }
    r.get("grouping_radius_m", c.grouping_radius_m);
    if (const auto* s = r.object("split")) {
      FieldReader sr(*s, "split", errors);
      sr.get("train", c.proportions.train);
      sr.get("validation", c.proportions.validation);
      sr.get("test", c.proportions.test);
      sr.get("count", c.splits);
      sr.get("min_hamming", c.min_hamming);
    }
    if (const auto* s = r.object("features")) {
      FieldReader sr(*s, "features", errors);
      sr.get("patch_size", c.patch_size);
      sr.get("patch_stride", c.patch_stride);
    }
    if (const auto* s = r.object("mae")) {
      FieldReader sr(*s, "mae", errors);
      read_mae(sr, c.mae);
    }
    if (const auto* s = r.object("ae")) {
      FieldReader sr(*s, "ae", errors);
      read_ae(sr, c.ae);
    }
    r.get("max_pretrain_pixels", c.max_pretrain_pixels);
    if (const auto* s = r.object("classifiers")) {
      FieldReader sr(*s, "classifiers", errors);
      sr.get("knn_k", c.knn_k);
      sr.get("rf_trees", c.forest.n_trees);
      sr.get("rf_max_features", c.forest.max_features);
      sr.get("rf_min_samples_split", c.forest.min_samples_split);
      sr.get("rf_max_depth", c.forest.max_depth);
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  return parse_config(read_file(path));
}

std::string PipelineConfig::to_json() const { return config_json(*this).dump(2) + "\n"; }

std::uint64_t PipelineConfig::stage_seed(const std::string& stage, std::size_t index) const {
  Fnv1a h;
  h.add(stage);
  return mix_seed(mix_seed(seed, h.value()), index);
}

fs::path PipelineConfig::scene_path() const { return scene.empty() ? out / "scene" : scene; }
fs::path PipelineConfig::ground_truth_path() const {
  return ground_truth.empty() ? out / "ground_truth.json" : ground_truth;
}

void PipelineConfig::validate() const {
  std::vector<std::string> errors;
  if (out.empty()) errors.push_back("out must name a directory");
  if (!scene.empty() && !fs::exists(scene_path().string() + ".json") && !fs::exists(scene)) {
    errors.push_back("scene " + scene.string() + " does not exist");
  }
  if (!ground_truth.empty() && !fs::exists(ground_truth)) {
    errors.push_back("ground_truth " + ground_truth.string() + " does not exist");
  }
  if (!split_file.empty() && !fs::exists(split_file)) {
    errors.push_back("split_file " + split_file.string() + " does not exist");
  }
  if (!model_dir.empty() && !fs::is_directory(model_dir)) {
    errors.push_back("model_dir " + model_dir.string() + " is not a directory");
  }
  if (!(grouping_radius_m >= 0.0) || !std::isfinite(grouping_radius_m)) {
    errors.push_back("grouping_radius_m must be a finite value >= 0");
  }
  for (const auto& [name, p] : {std::pair{"split.train", proportions.train},
                                std::pair{"split.validation", proportions.validation},
                                std::pair{"split.test", proportions.test}}) {
    if (!(p >= 0.0 && p < 1.0)) errors.push_back(std::string(name) + " must be in [0, 1)");
  }
  if (!(proportions.train + proportions.validation + proportions.test < 1.0)) {
    errors.push_back("split proportions must sum to less than 1");
  }
  if (splits == 0) errors.push_back("split.count must be >= 1");
  if (patch_size == 0) errors.push_back("features.patch_size must be >= 1");
  if (patch_stride == 0) errors.push_back("features.patch_stride must be >= 1");
  if (knn_k == 0) errors.push_back("classifiers.knn_k must be >= 1");
  if (forest.n_trees == 0) errors.push_back("classifiers.rf_trees must be >= 1");
  if (forest.min_samples_split < 2) errors.push_back("classifiers.rf_min_samples_split must be >= 2");
  if (synthetic.height == 0 || synthetic.width == 0) errors.push_back("synthetic.height and width must be >= 1");
  if (synthetic.bands == 0) errors.push_back("synthetic.bands must be >= 1");
  // Model configs are checked against the band count of the synthetic scene
  // here and again against the real scene at pretrain time.
  const std::size_t bands = synthetic.bands;
  auto collect = [&](const char* prefix, auto&& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      errors.push_back(std::string(prefix) + ": " + e.what());
    }
  };
  if (scene.empty() && bands > 0) {
    collect("mae", [&] { mae.validate(bands); });
    collect("ae", [&] { ae.validate(bands); });
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

// ---------------------------------------------------------------- data

namespace {

struct Dataset {
  HyperspectralScene scene;
  GroundTruth grouped;
  LabelMap labels;
  IndexMap groups;
  std::size_t group_count = 0;
  std::size_t classes = 0;
};

void require(const fs::path& path, const std::string& command) {
  if (!fs::exists(path)) {
    throw DependencyError("missing " + path.string() + "; run `hyspec " + command + "` first");
  }
}

fs::path scene_header(const PipelineConfig& c) {
  fs::path p = c.scene_path();
  if (p.extension() == ".bin" || p.extension() == ".json") p.replace_extension();
  p += ".json";
  return p;
}

fs::path scene_binary(const PipelineConfig& c) {
  fs::path p = scene_header(c);
  p.replace_extension(".bin");
  return p;
}

Dataset load_dataset(const PipelineConfig& c) {
  require(scene_header(c), "generate");
  require(scene_binary(c), "generate");
  require(c.ground_truth_path(), "generate");
  Dataset d;
  d.scene = read_scene(c.scene_path());
  const GroundTruth gt = read_ground_truth(c.ground_truth_path());
  int classes = 0;
  for (const auto& p : gt.polygons) classes = std::max(classes, p.land_cover);
  if (classes == 0) throw ConfigError("ground truth " + c.ground_truth_path().string() + " has no labeled polygons");
  gt.validate(d.scene.height, d.scene.width, classes);
  d.classes = static_cast<std::size_t>(classes);
  const bool pregrouped =
      std::all_of(gt.polygons.begin(), gt.polygons.end(), [](const Polygon& p) { return p.group.has_value(); });
  if (pregrouped) {
    d.grouped = gt;
    int max_group = -1;
    for (const auto& p : gt.polygons) max_group = std::max(max_group, *p.group);
    d.group_count = static_cast<std::size_t>(max_group + 1);
  } else {
    GroupingResult g = group_polygons(gt, c.grouping_radius_m, d.scene.gsd_m);
    d.grouped = std::move(g.ground_truth);
    d.group_count = static_cast<std::size_t>(g.group_count);
  }
  const IndexMap poly = rasterize_polygon_index(d.scene.height, d.scene.width, d.grouped);
  d.labels = rasterize_ground_truth(d.scene.height, d.scene.width, d.grouped);
  d.groups = group_map(poly, d.grouped);
  return d;
}

split::SplitProblem make_problem(const PipelineConfig& c, const Dataset& d) {
  return split::SplitProblem(class_pixel_counts(d.labels, d.groups, d.group_count, d.classes), c.proportions);
}

struct SplitRef {
  std::string name;  // file stem, e.g. split_00
  fs::path path;
  std::size_t index = 0;
};

std::vector<SplitRef> list_splits(const PipelineConfig& c) {
  std::vector<SplitRef> out;
  if (!c.split_file.empty()) {
    require(c.split_file, "split");
    out.push_back({c.split_file.stem().string(), c.split_file, 0});
    return out;
  }
  const fs::path dir = c.out / "splits";
  if (fs::is_directory(dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("split_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) out.push_back({files[i].stem().string(), files[i], i});
  }
  if (out.empty()) throw DependencyError("no split files under " + dir.string() + "; run `hyspec split` first");
  return out;
}

struct PixelSets {
  std::vector<std::size_t> train, pool, validation, test;
  std::vector<std::size_t> pretrain;  // every pixel outside validation and test groups
};

PixelSets pixel_sets(const PipelineConfig& c, const Dataset& d, const SplitRef& s) {
  const split::SplitFile file = split::read_split(s.path);
  const split::SplitProblem problem = make_problem(c, d);
  if (file.problem_hash != problem.hash()) {
    throw ConfigError("split " + s.path.string() + " was made for problem " + file.problem_hash +
                      ", the current scene and grouping give " + problem.hash());
  }
  if (file.assignment.sets.size() != d.group_count) {
    throw ConfigError("split " + s.path.string() + " assigns " + std::to_string(file.assignment.sets.size()) +
                      " groups, the scene has " + std::to_string(d.group_count));
  }
  PixelSets px;
  for (std::size_t i = 0; i < d.labels.data.size(); ++i) {
    const int g = d.groups.data[i];
    const split::SetId set = g >= 0 ? file.assignment.sets[static_cast<std::size_t>(g)] : split::SetId::kPool;
    const bool labeled = d.labels.data[i] > 0;
    if (set != split::SetId::kValidation && set != split::SetId::kTest) px.pretrain.push_back(i);
    if (!labeled) continue;
    switch (set) {
      case split::SetId::kTrain: px.train.push_back(i); break;
      case split::SetId::kPool: px.pool.push_back(i); break;
      case split::SetId::kValidation: px.validation.push_back(i); break;
      case split::SetId::kTest: px.test.push_back(i); break;
    }
  }
  return px;
}

RowMatrix spectra_of(const HyperspectralScene& scene, const std::vector<std::size_t>& pixels) {
  const std::size_t b = scene.band_count();
  RowMatrix m(static_cast<Eigen::Index>(pixels.size()), static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float* src = scene.cube.data() + pixels[i] * b;
    for (std::size_t k = 0; k < b; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = src[k];
  }
  return m;
}

std::vector<int> labels_of(const Dataset& d, const std::vector<std::size_t>& pixels) {
  std::vector<int> out;
  out.reserve(pixels.size());
  for (std::size_t p : pixels) out.push_back(d.labels.data[p]);
  return out;
}

fs::path model_dir_for(const PipelineConfig& c, const SplitRef& s) {
  return c.model_dir.empty() ? c.out / "models" / s.name : c.model_dir;
}

// ---------------------------------------------------------------- manifest

fs::path manifest_path(const PipelineConfig& c) { return c.out / "manifest.json"; }

ordered_json load_manifest(const PipelineConfig& c) {
  const fs::path p = manifest_path(c);
  if (!fs::exists(p)) return ordered_json::object();
  try {
    return ordered_json::parse(read_file(p));
  } catch (const std::exception& e) {
    throw IoError("corrupt manifest " + p.string() + ": " + e.what());
  }
}

struct StageInputs {
  ordered_json config;                       // the settings this stage reads
  std::vector<fs::path> files;               // upstream artifacts
};

std::string stage_key(const std::string& stage, const StageInputs& in) {
  Fnv1a h;
  h.add(stage);
  h.add(toolkit_version());
  h.add(in.config.dump());
  for (const auto& f : in.files) {
    h.add(f.generic_string());
    h.add(file_hash(f));
  }
  return h.hex();
}

bool cache_hit(const PipelineConfig& c, const ordered_json& manifest, const std::string& stage,
               const std::string& key, StageResult& result) {
  if (!manifest.contains("stages") || !manifest["stages"].contains(stage)) return false;
  const auto& entry = manifest["stages"][stage];
  if (entry.value("key", "") != key) return false;
  for (const auto& [rel, hash] : entry.at("outputs").items()) {
    const fs::path p = c.out / rel;
    if (!fs::exists(p) || file_hash(p) != hash.get<std::string>()) return false;
    result.outputs.push_back(rel);
  }
  return true;
}

void record_stage(const PipelineConfig& c, const StageResult& result, const std::string& key,
                  const StageInputs& in) {
  ordered_json manifest = load_manifest(c);
  manifest["toolkit_version"] = toolkit_version();
  manifest["config"] = config_json(c);
  ordered_json seeds = ordered_json::object();
  seeds["root"] = c.seed;
  for (const auto& s : stage_names()) seeds[s] = c.stage_seed(s);
  manifest["seeds"] = seeds;
  if (!manifest.contains("history")) manifest["history"] = ordered_json::array();
  manifest["history"].push_back(result.stage);
  ordered_json entry;
  entry["key"] = key;
  entry["config"] = config_json(c);
  entry["cached"] = result.cached;
  entry["seconds"] = result.seconds;
  ordered_json inputs = ordered_json::object();
  for (const auto& f : in.files) inputs[f.generic_string()] = file_hash(f);
  entry["inputs"] = inputs;
  ordered_json outputs = ordered_json::object();
  for (const auto& rel : result.outputs) outputs[rel.generic_string()] = file_hash(c.out / rel);
  entry["outputs"] = outputs;
  manifest["stages"][result.stage] = entry;
  write_file_atomic(manifest_path(c), manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- stages

using Work = std::vector<fs::path> (*)(const PipelineConfig&);

std::vector<fs::path> do_generate(const PipelineConfig& c) {
  SyntheticSceneConfig s = c.synthetic;
  s.seed = c.stage_seed("generate");
  const SyntheticScene syn = generate_synthetic_scene(s);
  write_scene(c.out / "scene", syn.scene);
  write_ground_truth(c.out / "ground_truth.json", syn.ground_truth);
  return {"scene.bin", "scene.json", "ground_truth.json"};
}

std::vector<fs::path> do_split(const PipelineConfig& c) {
  const Dataset d = load_dataset(c);
  const split::SplitProblem problem = make_problem(c, d);
  const split::SplitPortfolio portfolio =
      split::enumerate_diverse_splits(problem, c.splits, c.min_hamming, c.stage_seed("split"));
  if (portfolio.splits.empty()) {
    throw InfeasibleSplit("no assignment of " + std::to_string(problem.groups()) +
                          " groups satisfies the split proportions");
  }
  fs::create_directories(c.out / "splits");
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < portfolio.splits.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "split_%02zu.json", i);
    split::write_split(c.out / "splits" / name, problem, portfolio.splits[i]);
    out.push_back(fs::path("splits") / name);
  }
  return out;
}

std::vector<fs::path> do_features(const PipelineConfig& c) {
  require(scene_header(c), "generate");
  const HyperspectralScene scene = read_scene(c.scene_path());
  if (scene.height < c.patch_size || scene.width < c.patch_size) {
    throw SizeError("scene " + std::to_string(scene.height) + "x" + std::to_string(scene.width) +
                    " is smaller than one " + std::to_string(c.patch_size) + " pixel patch");
  }
  features::FeatureConfig fc;
  fc.patch_size = c.patch_size;
  const features::PatchFeatureExtractor extractor(fc);
  std::vector<features::PatchFeatureRow> rows;
  for (std::size_t r = 0; r + c.patch_size <= scene.height; r += c.patch_stride) {
    for (std::size_t col = 0; col + c.patch_size <= scene.width; col += c.patch_stride) {
      const HyperspectralScene patch = scene.crop(r, col, c.patch_size, c.patch_size);
      rows.push_back({"r" + std::to_string(r) + "_c" + std::to_string(col), extractor.extract(patch)});
    }
  }
  features::write_feature_csv(c.out / "features.csv", extractor, rows);
  return {"features.csv"};
}

std::vector<fs::path> do_pretrain(const PipelineConfig& c) {
  const Dataset d = load_dataset(c);
  std::vector<fs::path> out;
  for (const SplitRef& s : list_splits(c)) {
    PixelSets px = pixel_sets(c, d, s);
    std::vector<std::size_t> pixels = px.pretrain;
    if (c.max_pretrain_pixels > 0 && pixels.size() > c.max_pretrain_pixels) {
      std::mt19937_64 rng(c.stage_seed("pretrain.subsample", s.index));
      std::shuffle(pixels.begin(), pixels.end(), rng);
      pixels.resize(c.max_pretrain_pixels);
      std::sort(pixels.begin(), pixels.end());
    }
    const RowMatrix spectra = spectra_of(d.scene, pixels);
    mae::MAEConfig mc = c.mae;
    mc.seed = c.stage_seed("pretrain.mae", s.index);
    mae::AEConfig ac = c.ae;
    ac.seed = c.stage_seed("pretrain.ae", s.index);
    const fs::path dir = c.out / "models" / s.name;
    fs::create_directories(dir);
    const mae::MAETrainResult m = mae::train_mae(spectra, mc);
    mae::save_mae(dir / "mae.ckpt", m.model, m.curve);
    mae::write_loss_csv(dir / "mae_loss.csv", m.curve);
    const mae::AETrainResult a = mae::train_autoencoder(spectra, ac);
    mae::save_autoencoder(dir / "ae.ckpt", a.model, a.curve);
    mae::write_loss_csv(dir / "ae_loss.csv", a.curve);
    for (const char* f : {"mae.ckpt", "mae.json", "mae_loss.csv", "ae.ckpt", "ae.json", "ae_loss.csv"}) {
      out.push_back(fs::path("models") / s.name / f);
    }
  }
  return out;
}

void write_predictions(const fs::path& path, const std::vector<std::size_t>& ids, const std::vector<int>& truth,
                       const std::vector<int>& predicted) {
  std::string text = "sample_id,true_label,predicted_label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    text += std::to_string(ids[i]) + "," + std::to_string(truth[i]) + "," + std::to_string(predicted[i]) + "\n";
  }
  write_file_atomic(path, text);
}

std::vector<fs::path> do_classify(const PipelineConfig& c) {
  const Dataset d = load_dataset(c);
  std::vector<fs::path> out;
  for (const SplitRef& s : list_splits(c)) {
    const PixelSets px = pixel_sets(c, d, s);
    if (px.train.empty() || px.test.empty()) {
      throw ConfigError("split " + s.name + " leaves the training or test set empty");
    }
    const fs::path mdir = model_dir_for(c, s);
    require(mdir / "mae.ckpt", "pretrain");
    require(mdir / "ae.ckpt", "pretrain");
    const mae::MAEModel mae_model = mae::load_mae(mdir / "mae.ckpt");
    const mae::AEModel ae_model = mae::load_autoencoder(mdir / "ae.ckpt");

    const RowMatrix xtr = spectra_of(d.scene, px.train);
    const RowMatrix xte = spectra_of(d.scene, px.test);
    const std::vector<int> ytr = labels_of(d, px.train);
    const std::vector<int> yte = labels_of(d, px.test);
    struct Space {
      std::string prefix;
      RowMatrix train, test;
    };
    const std::vector<Space> spaces = {
        {"", xtr, xte},
        {"AE+", mae::ae_encode(ae_model, xtr), mae::ae_encode(ae_model, xte)},
        {"MAE+", mae::cls_embeddings(mae_model, xtr), mae::cls_embeddings(mae_model, xte)},
    };
    const fs::path dir = c.out / "predictions" / s.name;
    fs::create_directories(dir);
    std::map<std::string, std::vector<int>> predictions;
    for (const Space& sp : spaces) {
      clf::LabeledSet train{sp.train, ytr, split::SetId::kTrain};
      predictions[sp.prefix + "KNN"] = clf::knn_fit_predict(train, sp.test, std::min(c.knn_k, train.size()));
      clf::ForestConfig fc = c.forest;
      fc.seed = c.stage_seed("classify.rf", s.index);
      const clf::ForestModel forest = clf::rf_fit(train, fc);
      predictions[sp.prefix + "RF"] = clf::rf_predict(forest, sp.test);
    }
    for (const auto& model : model_names()) {
      const fs::path rel = fs::path("predictions") / s.name / (model_file_stem(model) + ".csv");
      write_predictions(c.out / rel, px.test, yte, predictions.at(model));
      out.push_back(rel);
    }
  }
  return out;
}

struct PredictionRow {
  std::size_t id;
  int truth;
  int predicted;
};

std::vector<PredictionRow> read_predictions(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,true_label,predicted_label") {
    throw IoError(path.string() + " lacks the header sample_id,true_label,predicted_label");
  }
  std::vector<PredictionRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    PredictionRow r{};
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> r.id >> c1 >> r.truth >> c2 >> r.predicted) || c1 != ',' || c2 != ',') {
      throw IoError(path.string() + ":" + std::to_string(n) + ": malformed row");
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<fs::path> do_evaluate(const PipelineConfig& c) {
  const Dataset d = load_dataset(c);
  std::vector<fs::path> out;
  for (const SplitRef& s : list_splits(c)) {
    const PixelSets px = pixel_sets(c, d, s);
    const fs::path dir = c.out / "metrics" / s.name;
    fs::create_directories(dir);
    for (const auto& model : model_names()) {
      const fs::path pred_path = c.out / "predictions" / s.name / (model_file_stem(model) + ".csv");
      require(pred_path, "classify");
      std::vector<PredictionRow> rows = read_predictions(pred_path);
      std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
      std::vector<std::size_t> ids;
      for (const auto& r : rows) ids.push_back(r.id);
      if (ids != px.test) {
        throw ConfigError(pred_path.string() + " covers " + std::to_string(ids.size()) +
                          " samples that are not exactly the " + std::to_string(px.test.size()) +
                          " test pixels of " + s.name);
      }
      metrics::ConfusionMatrix cm(d.classes);
      for (const auto& r : rows) {
        if (r.truth != d.labels.data[r.id]) {
          throw ConfigError(pred_path.string() + ": sample " + std::to_string(r.id) + " has true label " +
                            std::to_string(r.truth) + " but the ground truth says " +
                            std::to_string(d.labels.data[r.id]));
        }
        cm.add(r.truth, r.predicted);
      }
      ordered_json doc;
      doc["model"] = model;
      doc["split"] = s.name;
      doc["samples"] = rows.size();
      const ordered_json scores = ordered_json::parse(metrics::report_json(cm));
      for (const auto& [k, v] : scores.items()) doc[k] = v;
      const fs::path rel = fs::path("metrics") / s.name / (model_file_stem(model) + ".json");
      write_file_atomic(c.out / rel, doc.dump(2) + "\n");
      out.push_back(rel);
    }
  }
  return out;
}

std::vector<fs::path> do_report(const PipelineConfig& c) {
  const Dataset d = load_dataset(c);
  const std::vector<SplitRef> splits = list_splits(c);
  ordered_json report;
  report["toolkit_version"] = toolkit_version();
  ordered_json split_names = ordered_json::array();
  for (const auto& s : splits) split_names.push_back(s.name);
  report["splits"] = split_names;
  ordered_json rows = ordered_json::array();
  for (const auto& model : model_names()) {
    std::vector<double> oa, f1;
    ordered_json per = ordered_json::array();
    for (const auto& s : splits) {
      const fs::path p = c.out / "metrics" / s.name / (model_file_stem(model) + ".json");
      require(p, "evaluate");
      const ordered_json m = ordered_json::parse(read_file(p));
      oa.push_back(m.at("oa").get<double>());
      f1.push_back(m.at("macro_f1").get<double>());
      per.push_back({{"split", s.name}, {"oa", oa.back()}, {"macro_f1", f1.back()}});
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    auto sd = [&](const std::vector<double>& v) {
      if (v.size() < 2) return 0.0;
      const double m = mean(v);
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    rows.push_back({{"model", model},
                    {"oa", mean(oa)},
                    {"oa_std", sd(oa)},
                    {"macro_f1", mean(f1)},
                    {"macro_f1_std", sd(f1)},
                    {"per_split", per}});
  }
  report["models"] = rows;
  std::vector<std::size_t> hist(d.classes, 0);
  for (int l : d.labels.data) {
    if (l > 0) ++hist[static_cast<std::size_t>(l - 1)];
  }
  std::vector<std::size_t> present;
  for (std::size_t h : hist) {
    if (h > 0) present.push_back(h);
  }
  const metrics::LongTailReport tail = metrics::long_tail_report(hist);
  report["dataset"] = {{"classes", d.classes},
                       {"labeled_pixels", std::accumulate(hist.begin(), hist.end(), std::size_t{0})},
                       {"imbalance_ratio", metrics::imbalance_ratio(present)},
                       {"sorted_counts", tail.sorted_counts},
                       {"top1_share", tail.top1_share}};
  write_file_atomic(c.out / "report.json", report.dump(2) + "\n");
  return {"report.json"};
}

std::vector<fs::path> split_files(const PipelineConfig& c) {
  std::vector<fs::path> files;
  for (const auto& s : list_splits(c)) files.push_back(s.path);
  return files;
}

std::vector<fs::path> dataset_files(const PipelineConfig& c) {
  require(scene_header(c), "generate");
  require(scene_binary(c), "generate");
  require(c.ground_truth_path(), "generate");
  return {scene_header(c), scene_binary(c), c.ground_truth_path()};
}

StageInputs inputs_for(const std::string& stage, const PipelineConfig& c) {
  StageInputs in;
  const ordered_json all = config_json(c);
  in.config["seed"] = c.stage_seed(stage);
  if (stage == "generate") {
    in.config["synthetic"] = all["synthetic"];
    return in;
  }
  in.config["grouping_radius_m"] = all["grouping_radius_m"];
  if (stage == "split") {
    in.config["split"] = all["split"];
    in.files = dataset_files(c);
    return in;
  }
  if (stage == "features") {
    in.config = {{"features", all["features"]}};
    in.files = {scene_header(c), scene_binary(c)};
    require(in.files[0], "generate");
    require(in.files[1], "generate");
    return in;
  }
  in.config["split"] = all["split"];
  in.files = dataset_files(c);
  for (const auto& f : split_files(c)) in.files.push_back(f);
  const std::vector<SplitRef> splits = list_splits(c);
  if (stage == "pretrain") {
    in.config["mae"] = all["mae"];
    in.config["ae"] = all["ae"];
    in.config["max_pretrain_pixels"] = all["max_pretrain_pixels"];
    return in;
  }
  if (stage == "classify") {
    in.config["classifiers"] = all["classifiers"];
    for (const auto& s : splits) {
      for (const char* f : {"mae.ckpt", "ae.ckpt"}) {
        const fs::path p = model_dir_for(c, s) / f;
        require(p, "pretrain");
        in.files.push_back(p);
      }
    }
    return in;
  }
  if (stage == "evaluate") {
    for (const auto& s : splits) {
      for (const auto& m : model_names()) {
        const fs::path p = c.out / "predictions" / s.name / (model_file_stem(m) + ".csv");
        require(p, "classify");
        in.files.push_back(p);
      }
    }
    return in;
  }
  if (stage == "report") {
    for (const auto& s : splits) {
      for (const auto& m : model_names()) {
        const fs::path p = c.out / "metrics" / s.name / (model_file_stem(m) + ".json");
        require(p, "evaluate");
        in.files.push_back(p);
      }
    }
    return in;
  }
  throw ConfigError("unknown command " + stage);
}

Work work_for(const std::string& stage) {
  if (stage == "generate") return do_generate;
  if (stage == "split") return do_split;
  if (stage == "features") return do_features;
  if (stage == "pretrain") return do_pretrain;
  if (stage == "classify") return do_classify;
  if (stage == "evaluate") return do_evaluate;
  if (stage == "report") return do_report;
  throw ConfigError("unknown command " + stage);
}

}  // namespace

StageResult run_stage(const std::string& stage, const PipelineConfig& config) {
  const Work work = work_for(stage);
  config.validate();
  if (stage == "generate" && (!config.scene.empty() || !config.ground_truth.empty())) {
    throw ConfigError("generate writes its own scene and ground truth; drop --scene and --ground-truth");
  }
  fs::create_directories(config.out);
  const auto start = std::chrono::steady_clock::now();
  const StageInputs in = inputs_for(stage, config);
  const std::string key = stage_key(stage, in);
  StageResult result;
  result.stage = stage;
  if (cache_hit(config, load_manifest(config), stage, key, result)) {
    result.cached = true;
  } else {
    result.outputs = work(config);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  record_stage(config, result, key, in);
  return result;
}

StageResult cmd_generate(const PipelineConfig& config) { return run_stage("generate", config); }
StageResult cmd_split(const PipelineConfig& config) { return run_stage("split", config); }
StageResult cmd_features(const PipelineConfig& config) { return run_stage("features", config); }
StageResult cmd_pretrain(const PipelineConfig& config) { return run_stage("pretrain", config); }
StageResult cmd_classify(const PipelineConfig& config) { return run_stage("classify", config); }
StageResult cmd_evaluate(const PipelineConfig& config) { return run_stage("evaluate", config); }
StageResult cmd_report(const PipelineConfig& config) { return run_stage("report", config); }

std::vector<StageResult> run_all(const PipelineConfig& config) {
  std::vector<StageResult> out;
  for (const auto& stage : stage_names()) {
    if (stage == "generate" && (!config.scene.empty() || !config.ground_truth.empty())) continue;
    out.push_back(run_stage(stage, config));
  }
  return out;
}

ReplayResult replay(const fs::path& manifest_file, const fs::path& out) {
  if (!fs::exists(manifest_file)) throw ConfigError("manifest " + manifest_file.string() + " does not exist");
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(manifest_file));
  } catch (const std::exception& e) {
    throw ConfigError("manifest " + manifest_file.string() + " is not valid JSON: " + e.what());
  }
  if (!manifest.contains("stages") || !manifest["stages"].is_object()) {
    throw ConfigError("manifest " + manifest_file.string() + " records no stages");
  }
  const fs::path original = manifest_file.parent_path();
  if (fs::exists(out) && fs::weakly_canonical(out) == fs::weakly_canonical(original)) {
    throw ConfigError("replay target must differ from the original run directory");
  }
  auto rebase = [&](const fs::path& p) -> fs::path {
    if (p.empty()) return p;
    const fs::path rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(original));
    if (!rel.empty() && *rel.begin() != "..") return out / rel;
    return p;
  };
  ReplayResult result;
  result.out = out;
  for (const auto& stage : stage_names()) {
    if (!manifest["stages"].contains(stage)) continue;
    const auto& entry = manifest["stages"][stage];
    PipelineConfig c = parse_config(entry.at("config").dump());
    c.out = out;
    c.split_file = rebase(c.split_file);
    c.model_dir = rebase(c.model_dir);
    for (const auto& [path, hash] : entry.at("inputs").items()) {
      const fs::path p = rebase(path);
      if (p.string().rfind(out.string(), 0) == 0) continue;  // produced by an earlier replayed stage
      if (!fs::exists(p) || file_hash(p) != hash.get<std::string>()) {
        throw ConfigError("replay input " + p.string() + " is missing or changed since the run");
      }
    }
    run_stage(stage, c);
  }
  for (const auto& [stage, entry] : manifest["stages"].items()) {
    for (const auto& [rel, hash] : entry.at("outputs").items()) {
      ++result.compared;
      const fs::path p = out / rel;
      if (!fs::exists(p) || file_hash(p) != hash.get<std::string>()) result.mismatches.push_back(rel);
    }
  }
  return result;
}

}  // namespace hyspec::pipeline
