#include <cstdio>
#include <set>

#include "experiment.hpp"
#include "shapediff/error.hpp"
#include "shapediff/mesh_io.hpp"
#include "shapediff/rng.hpp"

namespace shapediff::cli {

namespace {

using nlohmann::json;

// Pulls typed fields out of one JSON object and remembers which keys were
// consumed so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError("config: '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = convert<T>(*it);
    } catch (const WrongType&) {
      throw ValidationError("config: " + where(key) + " has the wrong type");
    } catch (const json::exception&) {
      throw ValidationError("config: " + where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("config: unknown key " + where(it.key()));
    }
  }

 private:
  struct WrongType {};

  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  template <class T>
  static T convert(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw WrongType{};
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw WrongType{};
      if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw WrongType{};
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw WrongType{};
      return v.get<T>();
    } else {
      return v.get<T>();
    }
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Section top(j, "");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);

  if (const json* s = top.child("dataset")) {
    Section d(*s, "dataset");
    d.get("classes", c.dataset.classes);
    d.get("train_per_class", c.dataset.train_per_class);
    d.get("test_per_class", c.dataset.test_per_class);
    d.get("points", c.dataset.points);
    d.get("dir", c.dataset.dir);
    d.finish();
  }
  if (const json* s = top.child("model")) {
    Section m(*s, "model");
    m.get("latent_dim", c.model.latent_dim);
    m.get("encoder_hidden", c.model.encoder_hidden);
    m.get("denoiser_hidden", c.model.denoiser_hidden);
    m.get("embed_dim", c.model.embed_dim);
    m.get("time_dim", c.model.time_dim);
    m.get("complement", c.model.complement);
    m.finish();
  }
  if (const json* s = top.child("schedule")) {
    Section m(*s, "schedule");
    m.get("steps", c.schedule.steps);
    m.get("beta_min", c.schedule.beta_min);
    m.get("beta_max", c.schedule.beta_max);
    m.finish();
  }
  if (const json* s = top.child("train")) {
    Section t(*s, "train");
    t.get("steps", c.train.steps);
    t.get("batch_size", c.train.batch_size);
    t.get("learning_rate", c.train.adam.learning_rate);
    t.get("beta1", c.train.adam.beta1);
    t.get("beta2", c.train.adam.beta2);
    t.get("epsilon", c.train.adam.epsilon);
    t.get("weight_decay", c.train.adam.weight_decay);
    t.get("log_every", c.train.log_every);
    t.get("joint_encoder", c.train.joint_encoder);
    t.get("complement_fraction", c.train.complement_fraction);
    t.finish();
  }
  if (const json* s = top.child("classify")) {
    Section k(*s, "classify");
    k.get("n_trials", c.classify.n_trials);
    std::vector<std::array<std::size_t, 2>> stages;
    k.get("stages", stages);
    for (const auto& st : stages) c.classify.stages.push_back({st[0], st[1]});
    k.get("candidates", c.classify.candidates);
    k.get("mode", c.classify.mode);
    k.get("sampling", c.classify.sampling);
    k.finish();
  }
  if (const json* s = top.child("views")) {
    Section v(*s, "views");
    v.get("n_views", c.views.n_views);
    v.get("frontal_only", c.views.frontal_only);
    v.get("image_size", c.views.image_size);
    v.get("elevation", c.views.elevation);
    v.get("point_radius", c.views.point_radius);
    v.get("n_trials", c.views.n_trials);
    v.get("hidden", c.views.hidden);
    v.get("train_steps", c.views.train_steps);
    v.get("batch_size", c.views.batch_size);
    v.get("train_per_class", c.views.train_per_class);
    v.get("test_per_class", c.views.test_per_class);
    v.get("sizes", c.views.sizes);
    v.get("view_counts", c.views.view_counts);
    v.finish();
  }
  top.finish();
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json stages = json::array();
  for (const auto& s : c.classify.stages) stages.push_back({s.trials, s.keep});
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"classes", c.dataset.classes},
        {"train_per_class", c.dataset.train_per_class},
        {"test_per_class", c.dataset.test_per_class},
        {"points", c.dataset.points},
        {"dir", c.dataset.dir}}},
      {"model",
       {{"latent_dim", c.model.latent_dim},
        {"encoder_hidden", c.model.encoder_hidden},
        {"denoiser_hidden", c.model.denoiser_hidden},
        {"embed_dim", c.model.embed_dim},
        {"time_dim", c.model.time_dim},
        {"complement", c.model.complement}}},
      {"schedule", {{"steps", c.schedule.steps}, {"beta_min", c.schedule.beta_min}, {"beta_max", c.schedule.beta_max}}},
      {"train",
       {{"steps", c.train.steps},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.adam.learning_rate},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"epsilon", c.train.adam.epsilon},
        {"weight_decay", c.train.adam.weight_decay},
        {"log_every", c.train.log_every},
        {"joint_encoder", c.train.joint_encoder},
        {"complement_fraction", c.train.complement_fraction}}},
      {"classify",
       {{"n_trials", c.classify.n_trials},
        {"stages", stages},
        {"candidates", c.classify.candidates},
        {"mode", c.classify.mode},
        {"sampling", c.classify.sampling}}},
      {"views",
       {{"n_views", c.views.n_views},
        {"frontal_only", c.views.frontal_only},
        {"image_size", c.views.image_size},
        {"elevation", c.views.elevation},
        {"point_radius", c.views.point_radius},
        {"n_trials", c.views.n_trials},
        {"hidden", c.views.hidden},
        {"train_steps", c.views.train_steps},
        {"batch_size", c.views.batch_size},
        {"train_per_class", c.views.train_per_class},
        {"test_per_class", c.views.test_per_class},
        {"sizes", c.views.sizes},
        {"view_counts", c.views.view_counts}}},
  };
}

void ExperimentConfig::validate() const {
  require(dataset.classes.size() >= 2, "dataset.classes needs at least 2 classes");
  std::set<std::string> names;
  for (const auto& name : dataset.classes) {
    bool known = false;
    for (int f = 0; f < kNumShapeFamilies; ++f) known = known || name == shape_family_name(f);
    require(known, "dataset.classes: unknown shape family '" + name + "'");
    require(names.insert(name).second, "dataset.classes: duplicate class '" + name + "'");
  }
  require(dataset.train_per_class >= 1, "dataset.train_per_class must be >= 1");
  require(dataset.test_per_class >= 1, "dataset.test_per_class must be >= 1");
  require(dataset.points >= 1, "dataset.points must be >= 1");

  require(model.latent_dim >= 1, "model.latent_dim must be >= 1");
  require(model.encoder_hidden >= 1, "model.encoder_hidden must be >= 1");
  require(model.denoiser_hidden >= 1, "model.denoiser_hidden must be >= 1");
  require(model.embed_dim >= 1, "model.embed_dim must be >= 1");
  require(model.time_dim >= 2 && model.time_dim % 2 == 0, "model.time_dim must be even and >= 2");

  make_schedule(schedule.steps, schedule.beta_min, schedule.beta_max);

  TrainConfig tc;
  tc.steps = train.steps;
  tc.batch_size = train.batch_size;
  tc.adam = train.adam;
  tc.log_every = train.log_every;
  tc.complement_fraction = train.complement_fraction;
  tc.validate();
  require(train.adam.learning_rate > 0.0, "train.learning_rate must be > 0");

  require(classify.n_trials >= 1, "classify.n_trials must be >= 1");
  if (!classify.stages.empty()) validate_stages(classify.stages);
  require(classify.mode == "multiclass" || classify.mode == "binary",
          "classify.mode must be 'multiclass' or 'binary'");
  require(classify.sampling == "paired" || classify.sampling == "independent",
          "classify.sampling must be 'paired' or 'independent'");
  require(classify.mode != "binary" || model.complement, "classify.mode 'binary' needs model.complement");
  if (!classify.candidates.empty()) {
    require(classify.candidates.size() >= 2, "classify.candidates needs at least 2 classes");
    std::set<std::string> seen;
    for (const auto& cand : classify.candidates) {
      require(names.count(cand) > 0, "classify.candidates: '" + cand + "' is not a dataset class");
      require(seen.insert(cand).second, "classify.candidates: duplicate '" + cand + "'");
    }
  }
  require(classify.stages.empty() || classify.stages.front().keep < candidate_ids(*this).size(),
          "classify.stages: first keep must be below the candidate count");

  require(views.n_views >= 1, "views.n_views must be >= 1");
  require(views.image_size >= kMinImageSize, "views.image_size must be >= 8");
  require(views.point_radius >= 0.0, "views.point_radius must be >= 0");
  require(views.n_trials >= 1, "views.n_trials must be >= 1");
  require(views.hidden >= 1, "views.hidden must be >= 1");
  require(views.train_steps >= 1, "views.train_steps must be >= 1");
  require(views.batch_size >= 1, "views.batch_size must be >= 1");
  require(!views.sizes.empty() && !views.view_counts.empty(), "views.sizes and views.view_counts must be non-empty");
  for (auto s : views.sizes) require(s >= kMinImageSize, "views.sizes entries must be >= 8");
  const std::size_t n_cams = view_cameras(*this).size();
  require(n_cams >= 1, "views: the camera set is empty");
  for (auto n : views.view_counts) {
    require(n >= 1 && n <= n_cams, "views.view_counts entries must be in 1.." + std::to_string(n_cams));
  }
  require(!output_dir.empty(), "output_dir must be set");
}

std::filesystem::path ExperimentConfig::dataset_dir() const {
  return dataset.dir.empty() ? std::filesystem::path(output_dir) / "data" : std::filesystem::path(dataset.dir);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override key '" + key + "' is malformed");
    if (!node->is_object()) throw ValidationError("override key '" + key + "' does not name a section");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (file) {
    if (!std::filesystem::is_regular_file(*file)) throw ValidationError("config file not found: " + file->string());
    const auto text = read_file(*file);
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ValidationError(file->string() + ": not valid JSON");
    if (!doc.is_object()) throw ValidationError(file->string() + ": top level must be an object");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(c).dump())));
  return buf;
}

Seeds seeds_of(const ExperimentConfig& c) {
  return {derive_seed(c.seed, "dataset"), derive_seed(c.seed, "model-init"), derive_seed(c.seed, "train"),
          derive_seed(c.seed, "classify"), derive_seed(c.seed, "mesh-sample")};
}

std::uint64_t object_seed(const ExperimentConfig& c, const std::string& split, int family, std::size_t index) {
  return derive_seed(seeds_of(c).dataset, split, static_cast<std::uint64_t>(family) * 1000000u + index);
}

std::uint64_t image_model_seed(const ExperimentConfig& c, std::size_t image_size) {
  return derive_seed(c.seed, "image-model-init", image_size);
}

std::uint64_t image_train_seed(const ExperimentConfig& c, std::size_t image_size) {
  return derive_seed(c.seed, "image-train", image_size);
}

}  // namespace shapediff::cli
