#include <doctest.h>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "shapediff/classify.hpp"
#include "shapediff/error.hpp"
#include "shapediff/model.hpp"
#include "shapediff/rng.hpp"
#include "shapediff/train.hpp"
#include "support.hpp"

using namespace shapediff;

namespace {

ModelConfig latent_config(std::size_t classes, std::size_t dim, bool complement = false) {
  ModelConfig mc;
  mc.num_classes = classes;
  mc.complement = complement;
  mc.latent_dim = dim;
  mc.encoder_hidden = 0;
  mc.denoiser_hidden = 64;
  mc.embed_dim = 8;
  mc.time_dim = 8;
  return mc;
}

// Three well separated Gaussian clusters in `dim` dimensions.
void clusters(std::size_t per_class, std::size_t dim, std::uint64_t seed, std::vector<Latent>& out,
              std::vector<int>& labels) {
  Rng rng(seed);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Latent z(dim);
      for (std::size_t d = 0; d < dim; ++d) z[d] = 0.3 * rng.normal();
      z[static_cast<std::size_t>(c)] += 2.0;
      out.push_back(z);
      labels.push_back(c);
    }
  }
}

}  // namespace

TEST_CASE("adam leaves parameters unchanged with zero gradient or zero learning rate") {
  auto m = make_model(latent_config(2, 4), 3);
  const auto before = m.denoiser;
  auto zeros = zeros_like(m.denoiser);
  Adam adam({});
  for (int i = 0; i < 5; ++i) adam.step(m.denoiser.tensors(), std::as_const(zeros).tensors());
  CHECK(m.denoiser == before);

  auto grads = zeros_like(m.denoiser);
  Rng rng(1);
  for (auto* t : grads.tensors()) {
    for (auto& v : t->data) v = rng.normal();
  }
  AdamConfig still;
  still.learning_rate = 0.0;
  Adam frozen(still);
  frozen.step(m.denoiser.tensors(), std::as_const(grads).tensors());
  CHECK(m.denoiser == before);
  CHECK(frozen.iterations() == 1);
}

TEST_CASE("adam first step moves each parameter by the learning rate against the gradient sign") {
  Tensor p("p", 1, 2);
  p.data = {0.5, -0.25};
  Tensor g("g", 1, 2);
  g.data = {2.0, -0.001};
  AdamConfig cfg;
  cfg.learning_rate = 0.0625;
  cfg.epsilon = 0.0;
  Adam adam(cfg);
  adam.step({&p}, {&g});
  CHECK(p.data[0] == 0.5 - 0.0625);
  CHECK(p.data[1] == -0.25 + 0.0625);
}

TEST_CASE("adam rejects invalid settings") {
  AdamConfig bad;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(Adam{bad}, ValidationError);
  bad = {};
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(Adam{bad}, ValidationError);
}

TEST_CASE("training is bitwise deterministic") {
  std::vector<Latent> z;
  std::vector<int> y;
  clusters(10, 6, 4, z, y);
  TrainConfig tc;
  tc.steps = 40;
  tc.batch_size = 16;
  tc.seed = 9;
  tc.log_every = 10;
  auto a = make_model(latent_config(3, 6, true), 2);
  auto b = make_model(latent_config(3, 6, true), 2);
  const auto ta = train_latents(a, tc, z, y);
  const auto tb = train_latents(b, tc, z, y);
  CHECK(a == b);
  REQUIRE(ta.rows.size() == tb.rows.size());
  for (std::size_t i = 0; i < ta.rows.size(); ++i) CHECK(ta.rows[i].loss == tb.rows[i].loss);
  CHECK(a.step == 40);
}

TEST_CASE("single-class constant latent: loss halves within 500 steps") {
  auto m = make_model(latent_config(1, 8), 5);
  std::vector<Latent> z(32, Latent{0.5, -1.0, 0.25, 1.5, -0.75, 0.0, 1.0, -0.5});
  std::vector<int> y(32, 0);
  TrainConfig tc;
  tc.steps = 500;
  tc.batch_size = 64;
  tc.seed = 1;
  tc.log_every = 50;
  const auto trace = train_latents(m, tc, z, y);
  REQUIRE(trace.rows.size() == 10);
  CHECK(trace.rows.back().loss <= 0.5 * trace.rows.front().loss);
}

TEST_CASE("loss trace rows: logging window, final row and csv") {
  std::vector<Latent> z;
  std::vector<int> y;
  clusters(4, 3, 1, z, y);
  auto m = make_model(latent_config(3, 3), 1);
  TrainConfig tc;
  tc.steps = 23;
  tc.batch_size = 4;
  tc.log_every = 10;
  const auto trace = train_latents(m, tc, z, y);
  REQUIRE(trace.rows.size() == 3);
  CHECK(trace.rows[0].step == 10);
  CHECK(trace.rows[1].step == 20);
  CHECK(trace.rows[2].step == 23);
  const auto csv = loss_trace_csv(trace);
  CHECK(csv.rfind("step,loss\n10,", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 4);
}

TEST_CASE("resume continues step numbering and matches one uninterrupted run") {
  std::vector<Latent> z;
  std::vector<int> y;
  clusters(5, 4, 2, z, y);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch_size = 8;
  tc.log_every = 10;
  tc.seed = 3;
  auto split = make_model(latent_config(3, 4), 7);
  train_latents(split, tc, z, y);
  auto restored = deserialize_checkpoint(serialize_checkpoint(split));
  const auto second = train_latents(restored, tc, z, y);
  REQUIRE(second.rows.size() == 2);
  CHECK(second.rows[0].step == 30);
  CHECK(second.rows[1].step == 40);
  CHECK(restored.step == 40);
}

TEST_CASE("training errors") {
  std::vector<Latent> z{{0.0, 1.0}, {1.0, 0.0}};
  auto m = make_model(latent_config(3, 2), 1);
  TrainConfig tc;
  tc.steps = 2;
  SUBCASE("a class with zero samples") {
    const std::vector<int> y{0, 2};
    CHECK_THROWS_WITH_AS(train_latents(m, tc, z, y), doctest::Contains("class 1 has zero samples"),
                         ValidationError);
  }
  SUBCASE("label out of range") {
    std::vector<Latent> z3{{0, 0}, {0, 0}, {0, 0}};
    const std::vector<int> y{0, 1, 3};
    CHECK_THROWS_AS(train_latents(m, tc, z3, y), ValidationError);
  }
  SUBCASE("non-finite loss aborts with the step number") {
    std::vector<Latent> z3{{0, 0}, {0, 0}, {NAN, 0}};
    const std::vector<int> y{0, 1, 2};
    tc.batch_size = 16;
    const auto before = m.denoiser;
    CHECK_THROWS_WITH_AS(train_latents(m, tc, z3, y), doctest::Contains("non-finite loss at step 1"),
                         RuntimeError);
    CHECK(m.denoiser == before);
  }
  SUBCASE("zero steps") {
    tc.steps = 0;
    const std::vector<int> y{0, 1};
    CHECK_THROWS_AS(train_latents(m, tc, z, y), ValidationError);
  }
}

TEST_CASE("checkpoint round trip is exact on 100 probes") {
  auto cfg = latent_config(3, 6, true);
  cfg.encoder_hidden = 16;
  auto m = make_model(cfg, 11);
  std::vector<Latent> z;
  std::vector<int> y;
  clusters(6, 6, 3, z, y);
  TrainConfig tc;
  tc.steps = 15;
  tc.batch_size = 8;
  train_latents(m, tc, z, y);

  const auto bytes = serialize_checkpoint(m);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back == m);
  CHECK(serialize_checkpoint(back) == bytes);

  DenoiserModel a(m.denoiser), b(back.denoiser);
  Rng rng(5);
  std::vector<double> zt(6), oa(6), ob(6);
  for (int probe = 0; probe < 100; ++probe) {
    for (auto& v : zt) v = rng.normal();
    const int t = 1 + static_cast<int>(rng.below(1000));
    const int label = static_cast<int>(rng.below(6));
    a.predict(zt, t, label, oa);
    b.predict(zt, t, label, ob);
    for (int i = 0; i < 6; ++i) REQUIRE(oa[i] == ob[i]);
  }
  const auto pc = testing::random_cloud(50, 2);
  CHECK(encode(*m.encoder, pc) == encode(*back.encoder, pc));
}

TEST_CASE("checkpoint file io") {
  const auto m = make_model(latent_config(2, 3), 4);
  const auto path = std::filesystem::temp_directory_path() / "shapediff_test_ckpt.bin";
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path) == m);
  std::filesystem::remove(path);
  try {
    load_checkpoint(path);
    FAIL("expected an error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::kIo);
  }
}

namespace {

CheckpointError::Kind load_error(const std::string& bytes, std::string* message = nullptr) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("checkpoint unexpectedly loaded");
  return CheckpointError::Kind::kIo;
}

}  // namespace

TEST_CASE("checkpoint corruption is reported by kind") {
  const auto m = make_model(latent_config(2, 3, true), 4);
  const auto good = serialize_checkpoint(m);

  auto bad = good;
  bad[0] = 'X';
  CHECK(load_error(bad) == CheckpointError::Kind::kBadMagic);

  bad = good;
  bad[6] = static_cast<char>(kCheckpointVersion + 1);
  std::string msg;
  CHECK(load_error(bad, &msg) == CheckpointError::Kind::kVersionMismatch);
  CHECK(msg.find("version 2") != std::string::npos);

  // Cut inside the final tensor's values.
  CHECK(load_error(good.substr(0, good.size() - 2), &msg) == CheckpointError::Kind::kTruncated);
  CHECK(msg.find("denoiser.gate.bias") != std::string::npos);
  CHECK(load_error(good.substr(0, 3)) == CheckpointError::Kind::kTruncated);
  CHECK(load_error("") == CheckpointError::Kind::kTruncated);

  // Declared latent_dim disagrees with the stored tensor shapes.
  bad = good;
  bad[8] = 4;
  CHECK(load_error(bad, &msg) == CheckpointError::Kind::kDimensionMismatch);

  CHECK(load_error(good + "x") == CheckpointError::Kind::kDimensionMismatch);
}

TEST_CASE("reverse samples from a trained latent model are classified as their label") {
  std::vector<Latent> z;
  std::vector<int> y;
  clusters(60, 8, 21, z, y);
  auto m = make_model(latent_config(3, 8), 13);
  TrainConfig tc;
  tc.steps = 3000;
  tc.batch_size = 64;
  tc.seed = 2;
  tc.adam.learning_rate = 2e-3;
  train_latents(m, tc, z, y);
  DenoiserModel dm(m.denoiser);
  const auto sched = m.schedule();
  const std::vector<int> cands{0, 1, 2};
  int agree = 0;
  for (int i = 0; i < 100; ++i) {
    const int label = i % 3;
    const auto sample = reverse_sample(dm, label, sched, 100, derive_seed(7, "sample", static_cast<std::uint64_t>(i)));
    const auto r = classify_latent(dm, sample, cands, 32, 100 + static_cast<std::uint64_t>(i), sched);
    agree += r.predicted == label;
  }
  MESSAGE("self-consistency " << agree << "/100");
  CHECK(agree >= 70);
}
