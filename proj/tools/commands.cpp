#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "experiment.hpp"
#include "shapediff/error.hpp"
#include "shapediff/mesh_io.hpp"
#include "shapediff/rng.hpp"

namespace shapediff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int family_of(const std::string& name) {
  for (int f = 0; f < kNumShapeFamilies; ++f) {
    if (name == shape_family_name(f)) return f;
  }
  throw ValidationError("unknown shape family '" + name + "'");
}

int class_index(const ExperimentConfig& c, const std::string& name) {
  for (std::size_t i = 0; i < c.dataset.classes.size(); ++i) {
    if (c.dataset.classes[i] == name) return static_cast<int>(i);
  }
  throw ValidationError("class '" + name + "' is not in dataset.classes");
}

json run_manifest(const ExperimentConfig& c, const std::string& command, json outputs, double seconds) {
  const Seeds s = seeds_of(c);
  return {{"command", command},
          {"config_hash", config_hash(c)},
          {"config", config_to_json(c)},
          {"seeds",
           {{"top", c.seed},
            {"dataset", s.dataset},
            {"model_init", s.model_init},
            {"train", s.train},
            {"classify", s.classify},
            {"mesh_sample", s.mesh_sample}}},
          {"versions", {{"shapediff", kVersion}, {"checkpoint_format", kCheckpointVersion}, {"compiler", __VERSION__}}},
          {"outputs", std::move(outputs)},
          {"wall_seconds", seconds}};
}

void write_manifest(const fs::path& dir, const json& manifest) {
  write_file(dir / "run_manifest.json", manifest.dump(2) + "\n");
}

std::string step_tag(std::uint64_t step) { return "step" + std::to_string(step); }

// Binary labels {c, not-c} need the complement rows.
void check_binary_support(const ModelParameters& m) {
  if (!m.complement) throw ValidationError("binary mode needs a model trained with complement labels");
}

PointCloud load_input(const ExperimentConfig& c, const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("input not found: " + path.string());
  const auto pc = load_point_cloud(path, c.dataset.points, seeds_of(c).mesh_sample);
  if (pc.empty()) throw ValidationError(path.string() + ": no points");
  return normalize(pc);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

std::vector<DatasetItem> load_split(const ExperimentConfig& c, const std::string& split) {
  const fs::path dir = c.dataset_dir();
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw ValidationError("dataset manifest not found: " + manifest_path.string());
  const json manifest = json::parse(read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("objects") || !manifest["objects"].is_array()) {
    throw ValidationError(manifest_path.string() + ": malformed dataset manifest");
  }
  std::vector<DatasetItem> items;
  for (const auto& row : manifest["objects"]) {
    if (row.value("split", "") != split) continue;
    DatasetItem item;
    item.object_id = row.value("object_id", "");
    item.file = dir / row.value("file", "");
    item.label = class_index(c, row.value("class", ""));
    item.cloud = load_point_cloud(item.file, c.dataset.points, seeds_of(c).mesh_sample);
    if (item.cloud.empty()) throw ValidationError(item.file.string() + ": no points");
    items.push_back(std::move(item));
  }
  if (items.empty()) throw ValidationError("dataset split '" + split + "' is empty in " + dir.string());
  return items;
}

std::vector<DatasetItem> first_per_class(const std::vector<DatasetItem>& items, std::size_t per_class) {
  if (per_class == 0) return items;
  std::map<int, std::size_t> taken;
  std::vector<DatasetItem> out;
  for (const auto& item : items) {
    if (taken[item.label]++ < per_class) out.push_back(item);
  }
  return out;
}

std::string label_name(const ExperimentConfig& c, int label) {
  const auto k = static_cast<int>(c.dataset.classes.size());
  if (label >= 0 && label < k) return c.dataset.classes[static_cast<std::size_t>(label)];
  if (label >= k && label < 2 * k) return "not-" + c.dataset.classes[static_cast<std::size_t>(label - k)];
  return "label" + std::to_string(label);
}

std::vector<int> candidate_ids(const ExperimentConfig& c) {
  std::vector<int> ids;
  if (c.classify.candidates.empty()) {
    for (std::size_t i = 0; i < c.dataset.classes.size(); ++i) ids.push_back(static_cast<int>(i));
  } else {
    for (const auto& name : c.classify.candidates) ids.push_back(class_index(c, name));
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Models

ModelConfig point_model_config(const ExperimentConfig& c) {
  ModelConfig m;
  m.num_classes = c.dataset.classes.size();
  m.complement = c.model.complement;
  m.latent_dim = c.model.latent_dim;
  m.encoder_hidden = c.model.encoder_hidden;
  m.denoiser_hidden = c.model.denoiser_hidden;
  m.embed_dim = c.model.embed_dim;
  m.time_dim = c.model.time_dim;
  m.steps = c.schedule.steps;
  m.beta_min = c.schedule.beta_min;
  m.beta_max = c.schedule.beta_max;
  return m;
}

ModelConfig image_model_config(const ExperimentConfig& c, std::size_t image_size) {
  ModelConfig m = point_model_config(c);
  m.encoder_hidden = 0;
  m.latent_dim = image_size * image_size;
  m.denoiser_hidden = c.views.hidden;
  return m;
}

void check_model(const ExperimentConfig& c, const ModelParameters& m) {
  if (m.num_classes != c.dataset.classes.size()) {
    throw ValidationError("checkpoint has " + std::to_string(m.num_classes) + " classes, config has " +
                          std::to_string(c.dataset.classes.size()));
  }
}

bool is_image_model(const ModelParameters& m) { return !m.encoder.has_value(); }

std::size_t image_size_of(const ModelParameters& m) {
  const std::size_t d = m.denoiser.latent_dim();
  const auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  if (s * s != d || s < kMinImageSize) {
    throw ValidationError("model latent dimension " + std::to_string(d) + " is not an image size");
  }
  return s;
}

std::vector<Camera> view_cameras(const ExperimentConfig& c) {
  auto ring = camera_ring(c.views.n_views, c.views.elevation);
  return c.views.frontal_only ? frontal_subset(ring) : ring;
}

std::vector<DepthImage> render_views(const ExperimentConfig& c, const PointCloud& pc, std::size_t image_size,
                                     std::size_t n_views) {
  const auto cams = view_cameras(c);
  if (n_views == 0) n_views = cams.size();
  if (n_views > cams.size()) {
    throw ValidationError("requested " + std::to_string(n_views) + " views, only " + std::to_string(cams.size()) +
                          " cameras configured");
  }
  const double radius = c.views.point_radius > 0.0 ? c.views.point_radius : default_point_radius(image_size);
  std::vector<DepthImage> views;
  for (std::size_t v = 0; v < n_views; ++v) views.push_back(render_depth(pc, cams[v], image_size, radius));
  return views;
}

ModelParameters train_image_model(const ExperimentConfig& c, std::size_t image_size,
                                  const std::vector<DatasetItem>& items, TrainTrace* trace,
                                  const ModelParameters* resume) {
  std::vector<Latent> vectors;
  std::vector<int> labels;
  for (const auto& item : items) {
    for (const auto& img : render_views(c, item.cloud, image_size, 0)) {
      vectors.push_back(view_vector(img));
      labels.push_back(item.label);
    }
  }
  ModelParameters model = resume ? *resume : make_model(image_model_config(c, image_size),
                                                        image_model_seed(c, image_size));
  TrainConfig tc;
  tc.steps = c.views.train_steps;
  tc.batch_size = c.views.batch_size;
  tc.adam = c.train.adam;
  tc.seed = image_train_seed(c, image_size);
  tc.log_every = c.train.log_every;
  tc.complement_fraction = c.train.complement_fraction;
  auto t = train_latents(model, tc, vectors, labels);
  if (trace) *trace = std::move(t);
  return model;
}

// ---------------------------------------------------------------------------
// Classification

json object_json(const ExperimentConfig& c, const ObjectResult& r) {
  json j;
  j["object_id"] = r.object_id;
  if (r.label) j["label"] = label_name(c, *r.label);
  json names = json::array();
  for (int id : r.result.candidates) names.push_back(label_name(c, id));
  j["candidates"] = r.result.candidates;
  j["candidate_names"] = names;
  j["mean_losses"] = r.result.mean_losses;
  j["posterior"] = r.result.posterior;
  j["predicted"] = r.result.predicted;
  j["predicted_name"] = label_name(c, r.result.predicted);
  j["trials_used"] = r.result.trials_used;
  j["evaluations"] = r.result.evaluations;
  if (r.votes) j["votes"] = r.votes->votes;
  j["seconds"] = r.seconds;
  return j;
}

ObjectResult classify_object(const ExperimentConfig& c, const ModelParameters& model, const PointCloud& pc,
                             std::string object_id, std::optional<int> positive, std::size_t n_views) {
  const auto t0 = Clock::now();
  const auto sched = model.schedule();
  const DenoiserModel dm(model.denoiser);
  const std::uint64_t seed = seeds_of(c).classify;
  std::vector<int> candidates;
  if (positive) {
    check_binary_support(model);
    candidates = {*positive, model.complement_label(*positive)};
  } else {
    candidates = candidate_ids(c);
  }

  ObjectResult out;
  out.object_id = std::move(object_id);
  if (is_image_model(model)) {
    const auto views = render_views(c, pc, image_size_of(model), n_views);
    VoteRecord rec = classify_multiview(dm, views, candidates, c.views.n_trials, seed, sched, positive);
    // Object-level scores: per-candidate losses averaged over views.
    ClassificationResult& r = out.result;
    r.candidates = candidates;
    r.mean_losses.assign(candidates.size(), 0.0);
    r.trials_used.assign(candidates.size(), 0);
    for (const auto& v : rec.per_view) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        r.mean_losses[i] += v.mean_losses[i] / static_cast<double>(rec.per_view.size());
        r.trials_used[i] += v.trials_used[i];
      }
      r.evaluations += v.evaluations;
    }
    r.posterior = posterior(r.mean_losses, uniform_prior(candidates.size()));
    r.predicted = rec.final;
    rec.per_view.clear();
    out.votes = std::move(rec);
  } else {
    const auto z = encode(*model.encoder, pc);
    if (!positive && !c.classify.stages.empty()) {
      out.result = classify_adaptive(dm, z, candidates, c.classify.stages, seed, sched);
    } else {
      const Sampling sampling = c.classify.sampling == "independent" ? Sampling::kIndependent : Sampling::kPaired;
      out.result = classify_latent(dm, z, candidates, c.classify.n_trials, seed, sched, sampling);
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

namespace {

template <class ClassifyFn>
Evaluation evaluate(const ExperimentConfig& c, std::size_t n_objects, std::span<const int> labels,
                    ClassifyFn classify) {
  const bool binary = c.classify.mode == "binary";
  Evaluation ev;
  std::vector<double> seconds;
  for (std::size_t i = 0; i < n_objects; ++i) {
    ObjectResult r = classify(i, binary ? std::optional<int>(labels[i]) : std::nullopt);
    r.label = labels[i];
    const int p = r.result.predicted;
    ev.predictions.push_back(binary ? (p == labels[i] ? p : -1) : p);
    seconds.push_back(r.seconds);
    ev.objects.push_back(std::move(r));
  }
  ev.report = make_report(c.classify.mode, c.dataset.classes, ev.predictions, labels, std::move(seconds));
  return ev;
}

}  // namespace

Evaluation evaluate_latents(const ExperimentConfig& c, const EpsModel& model, const NoiseSchedule& sched,
                            std::span<const Latent> latents, std::span<const int> labels) {
  if (latents.size() != labels.size()) throw ValidationError("evaluate: latents/labels length mismatch");
  const std::uint64_t seed = seeds_of(c).classify;
  const int k = static_cast<int>(c.dataset.classes.size());
  if (c.classify.mode == "binary" && model.num_labels() < 2 * static_cast<std::size_t>(k)) {
    throw ValidationError("binary mode needs a model trained with complement labels");
  }
  return evaluate(c, latents.size(), labels, [&](std::size_t i, std::optional<int> positive) {
    const auto t0 = Clock::now();
    ObjectResult r;
    r.object_id = std::to_string(i);
    if (positive) {
      const std::vector<int> cands{*positive, k + *positive};
      r.result = classify_latent(model, latents[i], cands, c.classify.n_trials, seed, sched);
    } else if (!c.classify.stages.empty()) {
      r.result = classify_adaptive(model, latents[i], candidate_ids(c), c.classify.stages, seed, sched);
    } else {
      const Sampling sampling = c.classify.sampling == "independent" ? Sampling::kIndependent : Sampling::kPaired;
      r.result = classify_latent(model, latents[i], candidate_ids(c), c.classify.n_trials, seed, sched, sampling);
    }
    r.seconds = seconds_since(t0);
    return r;
  });
}

// ---------------------------------------------------------------------------
// Commands

json cmd_gen_data(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = Clock::now();
  const fs::path dir = fs::path(c.output_dir) / "data";
  json rows = json::array();
  for (const std::string split : {"train", "test"}) {
    const std::size_t per_class = split == "train" ? c.dataset.train_per_class : c.dataset.test_per_class;
    for (std::size_t ci = 0; ci < c.dataset.classes.size(); ++ci) {
      const std::string& name = c.dataset.classes[ci];
      const int family = family_of(name);
      for (std::size_t i = 0; i < per_class; ++i) {
        const std::uint64_t seed = object_seed(c, split, family, i);
        char id[128];
        std::snprintf(id, sizeof id, "%s_%s_%04zu", split.c_str(), name.c_str(), i);
        const std::string file = split + "/" + id + ".xyz";
        write_file(dir / file, to_xyz(gen_shape(family, seed, c.dataset.points)));
        rows.push_back({{"object_id", id},
                        {"file", file},
                        {"split", split},
                        {"label", ci},
                        {"class", name},
                        {"family", family},
                        {"seed", seed}});
      }
    }
  }
  write_file(dir / "manifest.json", json{{"classes", c.dataset.classes}, {"objects", rows}}.dump(2) + "\n");
  auto manifest = run_manifest(c, "gen-data", {{"dataset_dir", dir.string()}, {"objects", rows.size()}},
                               seconds_since(t0));
  write_manifest(dir, manifest);
  return manifest;
}

json cmd_train(const ExperimentConfig& c, const TrainOptions& opt) {
  c.validate();
  const auto t0 = Clock::now();
  const fs::path dir = fs::path(c.output_dir) / "train";
  std::optional<ModelParameters> resumed;
  if (opt.resume) {
    if (!fs::exists(*opt.resume)) throw ValidationError("checkpoint not found: " + opt.resume->string());
    resumed = load_checkpoint(*opt.resume);
    check_model(c, *resumed);
  }

  ModelParameters model;
  TrainTrace trace;
  std::string prefix;
  if (opt.image_size > 0) {
    if (opt.image_size < kMinImageSize) throw ValidationError("image size must be >= 8");
    if (resumed && (!is_image_model(*resumed) || image_size_of(*resumed) != opt.image_size)) {
      throw ValidationError("resume checkpoint is not an image model of size " + std::to_string(opt.image_size));
    }
    const auto items = first_per_class(load_split(c, "train"), c.views.train_per_class);
    model = train_image_model(c, opt.image_size, items, &trace, resumed ? &*resumed : nullptr);
    prefix = "image_S" + std::to_string(opt.image_size) + "_";
  } else {
    if (resumed) {
      auto want = point_model_config(c), have = resumed->config();
      if (!resumed->encoder || have.latent_dim != want.latent_dim || have.encoder_hidden != want.encoder_hidden ||
          have.denoiser_hidden != want.denoiser_hidden || have.embed_dim != want.embed_dim ||
          have.time_dim != want.time_dim || have.complement != want.complement || have.steps != want.steps) {
        throw ValidationError("resume checkpoint does not match the model configuration");
      }
      model = std::move(*resumed);
    } else {
      model = make_model(point_model_config(c), seeds_of(c).model_init);
    }
    const auto items = load_split(c, "train");
    std::vector<PointCloud> clouds;
    std::vector<int> labels;
    for (const auto& item : items) {
      clouds.push_back(item.cloud);
      labels.push_back(item.label);
    }
    TrainConfig tc;
    tc.steps = c.train.steps;
    tc.batch_size = c.train.batch_size;
    tc.adam = c.train.adam;
    tc.seed = seeds_of(c).train;
    tc.log_every = c.train.log_every;
    tc.joint_encoder = c.train.joint_encoder;
    tc.complement_fraction = c.train.complement_fraction;
    trace = train(model, tc, clouds, labels);
  }

  const fs::path ckpt = dir / (prefix + "checkpoint_" + step_tag(model.step) + ".bin");
  const fs::path loss = dir / (prefix + "loss_" + step_tag(model.step) + ".csv");
  save_checkpoint(model, ckpt);
  write_file(loss, loss_trace_csv(trace));
  json outputs = {{"checkpoint", ckpt.string()},
                  {"loss_csv", loss.string()},
                  {"first_step", trace.rows.empty() ? 0 : trace.rows.front().step},
                  {"final_step", model.step},
                  {"first_loss", trace.first_loss},
                  {"last_loss", trace.last_loss}};
  if (opt.resume) outputs["resumed_from"] = opt.resume->string();
  auto manifest = run_manifest(c, "train", outputs, seconds_since(t0));
  write_file(dir / (prefix + "run_manifest_" + step_tag(model.step) + ".json"), manifest.dump(2) + "\n");
  return manifest;
}

json cmd_classify(const ExperimentConfig& c, const fs::path& checkpoint, const std::vector<fs::path>& inputs,
                  const std::optional<std::string>& positive) {
  c.validate();
  const auto t0 = Clock::now();
  if (inputs.empty()) throw ValidationError("classify: no input files");
  if (!fs::exists(checkpoint)) throw ValidationError("checkpoint not found: " + checkpoint.string());
  const auto model = load_checkpoint(checkpoint);
  check_model(c, model);
  std::optional<int> pos;
  if (positive) pos = class_index(c, *positive);

  const fs::path dir = fs::path(c.output_dir) / "classify";
  json results = json::array();
  for (const auto& path : inputs) {
    const auto pc = load_input(c, path);
    const auto r = classify_object(c, model, pc, path.stem().string(), pos);
    json j = object_json(c, r);
    write_file(dir / (r.object_id + ".json"), j.dump(2) + "\n");
    results.push_back(std::move(j));
  }
  auto manifest = run_manifest(c, "classify", {{"checkpoint", checkpoint.string()}, {"results", results}},
                               seconds_since(t0));
  write_manifest(dir, manifest);
  return manifest;
}

json cmd_eval(const ExperimentConfig& c, const fs::path& checkpoint, const std::string& split) {
  c.validate();
  const auto t0 = Clock::now();
  if (!fs::exists(checkpoint)) throw ValidationError("checkpoint not found: " + checkpoint.string());
  const auto model = load_checkpoint(checkpoint);
  check_model(c, model);
  if (c.classify.mode == "binary") check_binary_support(model);
  const auto items = load_split(c, split);
  std::vector<int> labels;
  for (const auto& item : items) labels.push_back(item.label);

  const Evaluation ev = evaluate(c, items.size(), labels, [&](std::size_t i, std::optional<int> positive) {
    return classify_object(c, model, items[i].cloud, items[i].object_id, positive);
  });

  const fs::path dir = fs::path(c.output_dir) / "eval";
  write_file(dir / "report.csv", report_csv(ev.report));
  write_file(dir / "report.json", report_json(ev.report).dump(2) + "\n");
  std::string lines;
  for (const auto& r : ev.objects) lines += object_json(c, r).dump() + "\n";
  write_file(dir / "predictions.jsonl", lines);
  auto manifest = run_manifest(c, "eval",
                               {{"checkpoint", checkpoint.string()},
                                {"split", split},
                                {"report", report_json(ev.report)},
                                {"files", {(dir / "report.csv").string(), (dir / "report.json").string(),
                                           (dir / "predictions.jsonl").string()}}},
                               seconds_since(t0));
  write_manifest(dir, manifest);
  return manifest;
}

json cmd_render(const ExperimentConfig& c, const std::vector<fs::path>& inputs) {
  c.validate();
  const auto t0 = Clock::now();
  if (inputs.empty()) throw ValidationError("render: no input files");
  const fs::path dir = fs::path(c.output_dir) / "render";
  json files = json::array();
  for (const auto& path : inputs) {
    const auto pc = load_input(c, path);
    for (const auto& img : render_views(c, pc, c.views.image_size, 0)) {
      char name[64];
      std::snprintf(name, sizeof name, "_az%03d.pgm", static_cast<int>(std::lround(img.camera.azimuth_deg)));
      const fs::path out = dir / (path.stem().string() + name);
      write_pgm(img, out);
      files.push_back(out.string());
    }
  }
  auto manifest = run_manifest(c, "render", {{"files", files}}, seconds_since(t0));
  write_manifest(dir, manifest);
  return manifest;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "size,n_views,accuracy,wall_seconds\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f\n", r.size, r.n_views, r.accuracy, r.wall_seconds);
    out += buf;
  }
  return out;
}

json cmd_ablate_views(const ExperimentConfig& c, const std::vector<fs::path>& checkpoints2d,
                      std::vector<AblationRow>* rows_out) {
  c.validate();
  const auto t0 = Clock::now();
  const fs::path dir = fs::path(c.output_dir) / "ablate";
  std::map<std::size_t, ModelParameters> models;
  for (const auto& path : checkpoints2d) {
    if (!fs::exists(path)) throw ValidationError("checkpoint not found: " + path.string());
    auto m = load_checkpoint(path);
    if (!is_image_model(m)) throw ValidationError(path.string() + " is not an image model");
    check_model(c, m);
    models[image_size_of(m)] = std::move(m);
  }

  const auto test = first_per_class(load_split(c, "test"), c.views.test_per_class);
  std::vector<int> labels;
  for (const auto& item : test) labels.push_back(item.label);
  std::vector<DatasetItem> train_items;

  std::vector<AblationRow> rows;
  json trained = json::array();
  for (std::size_t size : c.views.sizes) {
    if (!models.count(size)) {
      if (train_items.empty()) train_items = first_per_class(load_split(c, "train"), c.views.train_per_class);
      const auto tt = Clock::now();
      TrainTrace trace;
      auto m = train_image_model(c, size, train_items, &trace);
      const fs::path ckpt = dir / ("image_S" + std::to_string(size) + ".bin");
      save_checkpoint(m, ckpt);
      trained.push_back({{"size", size},
                         {"checkpoint", ckpt.string()},
                         {"train_seconds", seconds_since(tt)},
                         {"first_loss", trace.first_loss},
                         {"last_loss", trace.last_loss}});
      models[size] = std::move(m);
    }
    const auto& model = models.at(size);
    for (std::size_t n : c.views.view_counts) {
      const auto ts = Clock::now();
      const Evaluation ev = evaluate(c, test.size(), labels, [&](std::size_t i, std::optional<int> positive) {
        return classify_object(c, model, test[i].cloud, test[i].object_id, positive, n);
      });
      rows.push_back({size, n, ev.report.mean, seconds_since(ts)});
    }
  }

  write_file(dir / "ablation.csv", ablation_csv(rows));
  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"size", r.size}, {"n_views", r.n_views}, {"accuracy", r.accuracy}, {"wall_seconds", r.wall_seconds}});
  }
  auto manifest = run_manifest(c, "ablate-views",
                               {{"csv", (dir / "ablation.csv").string()}, {"rows", jrows}, {"trained", trained}},
                               seconds_since(t0));
  write_manifest(dir, manifest);
  if (rows_out) *rows_out = std::move(rows);
  return manifest;
}

}  // namespace shapediff::cli
