#include <bit>
#include <cstring>
#include <string>

#include "shapediff/mesh_io.hpp"
#include "shapediff/train.hpp"

namespace shapediff {

namespace {

constexpr char kMagic[6] = {'D', 'C', '3', 'D', 'O', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  // `what` names the field for truncation errors.
  void bytes(void* p, std::size_t n, std::string_view what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename U>
  U uint(std::string_view what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }
  float f32(std::string_view what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }
  double f64(std::string_view what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
  bool at_end() const { return pos_ == in_.size(); }

  void need(std::size_t n, std::string_view what) {
    if (in_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            "checkpoint truncated while reading " + std::string(what));
    }
  }


 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::vector<const Tensor*> all_tensors(const ModelParameters& m) {
  std::vector<const Tensor*> ts;
  if (m.encoder) ts = m.encoder->tensors();
  for (const auto* t : m.denoiser.tensors()) ts.push_back(t);
  return ts;
}

std::vector<Tensor*> all_tensors(ModelParameters& m) {
  std::vector<Tensor*> ts;
  if (m.encoder) ts = m.encoder->tensors();
  for (auto* t : m.denoiser.tensors()) ts.push_back(t);
  return ts;
}

std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::string serialize_checkpoint(const ModelParameters& m) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint16_t>(kCheckpointVersion);
  w.uint(u32(m.denoiser.latent_dim()));
  w.uint(u32(m.encoder ? m.encoder->hidden() : 0));
  w.uint(u32(m.denoiser.hidden()));
  w.uint(u32(m.denoiser.num_labels()));
  w.uint(u32(m.num_classes));
  w.uint(u32(m.denoiser.embed_dim()));
  w.uint(u32(m.denoiser.time_dim));
  w.uint(u32(static_cast<std::size_t>(m.denoiser.steps)));
  w.uint<std::uint8_t>(m.complement ? 1 : 0);
  w.f64(m.beta_min);
  w.f64(m.beta_max);
  w.uint<std::uint64_t>(m.init_seed);
  w.uint<std::uint64_t>(m.step);
  const auto tensors = all_tensors(m);
  w.uint(u32(tensors.size()));
  for (const auto* t : tensors) {
    w.uint(static_cast<std::uint16_t>(t->name.size()));
    w.bytes(t->name.data(), t->name.size());
    w.uint(u32(t->rows));
    w.uint(u32(t->cols));
    for (double v : t->data) w.f32(static_cast<float>(v));
  }
  return w.take();
}

ModelParameters deserialize_checkpoint(std::string_view bytes) {
  using Kind = CheckpointError::Kind;
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(Kind::kBadMagic, "not a checkpoint: bad magic");
  }
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                                      ", expected " + std::to_string(kCheckpointVersion));
  }
  ModelConfig cfg;
  cfg.latent_dim = r.uint<std::uint32_t>("latent_dim");
  cfg.encoder_hidden = r.uint<std::uint32_t>("encoder_hidden");
  cfg.denoiser_hidden = r.uint<std::uint32_t>("denoiser_hidden");
  const std::size_t num_labels = r.uint<std::uint32_t>("num_labels");
  cfg.num_classes = r.uint<std::uint32_t>("num_classes");
  cfg.embed_dim = r.uint<std::uint32_t>("embed_dim");
  cfg.time_dim = r.uint<std::uint32_t>("time_dim");
  cfg.steps = static_cast<int>(r.uint<std::uint32_t>("steps"));
  cfg.complement = r.uint<std::uint8_t>("complement flag") != 0;
  cfg.beta_min = r.f64("beta_min");
  cfg.beta_max = r.f64("beta_max");
  const auto init_seed = r.uint<std::uint64_t>("init_seed");
  const auto step = r.uint<std::uint64_t>("step");
  if (cfg.num_labels() != num_labels) {
    throw CheckpointError(Kind::kDimensionMismatch,
                          "checkpoint declares " + std::to_string(num_labels) + " labels for " +
                              std::to_string(cfg.num_classes) + " classes");
  }

  ModelParameters m;
  try {
    m = make_model(cfg, init_seed);
  } catch (const ValidationError& e) {
    throw CheckpointError(Kind::kDimensionMismatch, std::string("invalid checkpoint header: ") + e.what());
  }
  m.step = step;
  auto tensors = all_tensors(m);
  const auto count = r.uint<std::uint32_t>("tensor count");
  if (count != tensors.size()) {
    throw CheckpointError(Kind::kDimensionMismatch, "checkpoint holds " + std::to_string(count) +
                                                        " tensors, expected " +
                                                        std::to_string(tensors.size()));
  }
  for (auto* t : tensors) {
    const auto len = r.uint<std::uint16_t>("name of tensor " + t->name);
    std::string name(len, '\0');
    r.bytes(name.data(), len, "name of tensor " + t->name);
    if (name != t->name) {
      throw CheckpointError(Kind::kDimensionMismatch, "expected tensor " + t->name + ", found " + name);
    }
    const auto rows = r.uint<std::uint32_t>("shape of tensor " + name);
    const auto cols = r.uint<std::uint32_t>("shape of tensor " + name);
    if (rows != t->rows || cols != t->cols) {
      throw CheckpointError(Kind::kDimensionMismatch,
                            "tensor " + name + " has shape " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", expected " + std::to_string(t->rows) + "x" +
                                std::to_string(t->cols));
    }
    r.need(t->size() * sizeof(float), "tensor " + name);
    for (auto& v : t->data) v = static_cast<double>(r.f32("tensor"));
  }
  if (!r.at_end()) throw CheckpointError(Kind::kDimensionMismatch, "trailing bytes after last tensor");
  return m;
}

void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path) {
  try {
    write_file(path, serialize_checkpoint(model));
  } catch (const RuntimeError& e) {
    throw CheckpointError(CheckpointError::Kind::kIo, e.what());
  }
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const RuntimeError& e) {
    throw CheckpointError(CheckpointError::Kind::kIo, e.what());
  }
  return deserialize_checkpoint(bytes);
}

}  // namespace shapediff
