#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "shapediff/error.hpp"

namespace fs = std::filesystem;
using namespace shapediff;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config, "JSON experiment config");
  cmd->add_option("--set", common.overrides, "Override, e.g. --set train.steps=500 (repeatable; wins over the file)");
}

cli::ExperimentConfig resolve(const Common& common) {
  std::optional<fs::path> file;
  if (!common.config.empty()) file = common.config;
  return cli::load_config(file, common.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-classifier experiments on procedural 3D shapes"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, split = "test", positive;
  std::vector<std::string> inputs, checkpoints2d;
  std::string resume;
  std::size_t image_size = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate train/test point clouds and a manifest");
  add_common(gen, common);

  auto* trn = app.add_subcommand("train", "Train a point-cloud or image diffusion model");
  add_common(trn, common);
  trn->add_option("--resume", resume, "Checkpoint to continue from");
  trn->add_option("--image-size", image_size, "Train an image model on S x S depth views instead");

  auto* cls = app.add_subcommand("classify", "Classify point-cloud files (.xyz, .ply, .off)");
  add_common(cls, common);
  cls->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  cls->add_option("--positive", positive, "Binary run: this class against its complement");
  cls->add_option("inputs", inputs, "Input files")->required();

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_common(evl, common);
  evl->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  evl->add_option("--split", split, "Dataset split")->capture_default_str();

  auto* rnd = app.add_subcommand("render", "Write PGM depth renders of point-cloud files");
  add_common(rnd, common);
  rnd->add_option("inputs", inputs, "Input files")->required();

  auto* abl = app.add_subcommand("ablate-views", "Image size x view count accuracy and timing grid");
  add_common(abl, common);
  abl->add_option("--checkpoint2d", checkpoints2d, "Image-model checkpoints to reuse (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    const auto config = resolve(common);
    nlohmann::json out;
    if (gen->parsed()) {
      out = cli::cmd_gen_data(config);
    } else if (trn->parsed()) {
      cli::TrainOptions opt;
      if (!resume.empty()) opt.resume = resume;
      opt.image_size = image_size;
      out = cli::cmd_train(config, opt);
    } else if (cls->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      std::optional<std::string> pos;
      if (!positive.empty()) pos = positive;
      out = cli::cmd_classify(config, checkpoint, paths, pos)["outputs"]["results"];
    } else if (evl->parsed()) {
      out = cli::cmd_eval(config, checkpoint, split)["outputs"];
    } else if (rnd->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      out = cli::cmd_render(config, paths)["outputs"];
    } else if (abl->parsed()) {
      std::vector<fs::path> paths(checkpoints2d.begin(), checkpoints2d.end());
      out = cli::cmd_ablate_views(config, paths)["outputs"]["rows"];
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kExitRuntime;
  }
}
