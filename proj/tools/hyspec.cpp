#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"
#include "hyspec/pipeline.hpp"
#include "hyspec/scene_io.hpp"

namespace {

namespace pl = hyspec::pipeline;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfig = 2;
constexpr int kInfeasible = 3;
constexpr int kDivergence = 4;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string scene;
  std::string ground_truth;
  std::string split_file;
  std::string model;
  bool seed_set = false;
};

pl::PipelineConfig resolve(const Flags& f) {
  pl::PipelineConfig c = f.config.empty() ? pl::PipelineConfig{} : pl::load_config(f.config);
  if (f.seed_set) c.seed = f.seed;
  if (!f.out.empty()) c.out = f.out;
  if (!f.scene.empty()) c.scene = f.scene;
  if (!f.ground_truth.empty()) c.ground_truth = f.ground_truth;
  if (!f.split_file.empty()) c.split_file = f.split_file;
  if (!f.model.empty()) c.model_dir = f.model;
  return c;
}

void print_stage(const pl::StageResult& r) {
  std::printf("%-9s %s %zu file(s) in %.2f s\n", r.stage.c_str(), r.cached ? "cached " : "wrote  ", r.outputs.size(),
              r.seconds);
}

void print_report(const pl::PipelineConfig& c) {
  const auto doc = nlohmann::json::parse(hyspec::read_file(c.out / "report.json"));
  std::printf("\n%-9s %8s %8s %10s\n", "model", "OA", "F1", "splits");
  for (const auto& row : doc.at("models")) {
    std::printf("%-9s %8.4f %8.4f %10zu\n", row.at("model").get<std::string>().c_str(), row.at("oa").get<double>(),
                row.at("macro_f1").get<double>(), row.at("per_split").size());
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Hyperspectral dataset engineering and representation-learning baselines"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON pipeline config; flags override its values");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { f.seed = s, f.seed_set = true; }, "root seed of every stage");
  app.add_option("--out", f.out, "run directory");
  app.add_option("--scene", f.scene, "scene file or stem (.bin + .json header)");
  app.add_option("--ground-truth", f.ground_truth, "ground-truth polygons JSON");
  app.add_option("--split-file", f.split_file, "use this split only");
  app.add_option("--model", f.model, "directory holding mae.ckpt and ae.ckpt to classify with");

  for (const auto& stage : pl::stage_names()) {
    app.add_subcommand(stage, "run the " + stage + " stage")->fallthrough();
  }
  app.add_subcommand("run", "run every stage in order")->fallthrough();
  auto* replay = app.add_subcommand("replay", "re-execute a run from its manifest and compare outputs");
  std::string manifest;
  replay->add_option("manifest", manifest, "manifest.json of the original run")->required();
  replay->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "replay") {
      if (f.out.empty()) throw hyspec::ConfigError("replay needs --out naming a fresh directory");
      const pl::ReplayResult r = pl::replay(manifest, f.out);
      std::printf("replayed into %s: %zu output(s) compared, %zu mismatch(es)\n", r.out.string().c_str(),
                  r.compared, r.mismatches.size());
      for (const auto& m : r.mismatches) std::printf("  differs: %s\n", m.c_str());
      return r.identical() ? kOk : kFailure;
    }
    const pl::PipelineConfig config = resolve(f);
    if (name == "run") {
      for (const auto& r : pl::run_all(config)) print_stage(r);
      print_report(config);
      return kOk;
    }
    print_stage(pl::run_stage(name, config));
    if (name == "report") print_report(config);
    return kOk;
  } catch (const hyspec::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const hyspec::DependencyError& e) {
    std::fprintf(stderr, "missing input: %s\n", e.what());
    return kConfig;
  } catch (const hyspec::InfeasibleSplit& e) {
    std::fprintf(stderr, "infeasible split: %s\n", e.what());
    return kInfeasible;
  } catch (const hyspec::DivergenceError& e) {
    std::fprintf(stderr, "training diverged at epoch %d: %s\n", e.epoch(), e.what());
    return kDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
