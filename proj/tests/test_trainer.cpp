#include "doctest_torch.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include "shunit/checkpoint.hpp"
#include "shunit/errors.hpp"
#include "shunit/trainer.hpp"
#include "support.hpp"

using namespace shunit;

namespace {

RunConfig toy_config(std::string extra = {}) {
  return RunConfig::parse(R"(
width_scale = 0.125
slots_per_class = 3
synthetic.canvas_size = 16
disc_scales = 1
synthetic.min_rect = 4
synthetic.max_rect = 10
seed = 5
)" + extra);
}

struct ToyData {
  std::vector<DomainSample> x, y;
};

ToyData toy_data(const RunConfig& cfg, int64_t count = 6) {
  return {generate_synthetic(cfg.synthetic, Domain::X, count), generate_synthetic(cfg.synthetic, Domain::Y, count)};
}

std::vector<uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_state(ShunitModel& a, ShunitModel& b) {
  auto sa = a->named_state();
  auto sb = b->named_state();
  if (sa.size() != sb.size()) return false;
  for (size_t i = 0; i < sa.size(); ++i) {
    if (sa[i].first != sb[i].first || !torch::equal(sa[i].second, sb[i].second)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  Trainer a(cfg), b(cfg);
  for (int i = 0; i < 3; ++i) {
    const auto ra = a.step(data.x, data.y);
    const auto rb = b.step(data.x, data.y);
    CHECK(ra.rows() == rb.rows());
  }
  CHECK(same_state(a.model(), b.model()));
  CHECK(a.iteration() == 3);
}

TEST_CASE("optimizers split the parameters into disjoint generator and discriminator sets") {
  Trainer t(toy_config());
  std::set<c10::TensorImpl*> gen, disc;
  for (const auto& p : t.model()->generator_parameters()) gen.insert(p.unsafeGetTensorImpl());
  for (const auto& p : t.model()->discriminator_parameters()) disc.insert(p.unsafeGetTensorImpl());
  for (auto* p : disc) CHECK_FALSE(gen.contains(p));
  for (const auto& p : t.model()->memory(Domain::X)->parameters()) CHECK(gen.contains(p.unsafeGetTensorImpl()));
  for (int64_t i = 0; i < t.model()->generator(Domain::Y)->num_shl(); ++i) {
    CHECK(gen.contains(t.model()->generator(Domain::Y)->shl(i)->alpha_raw().unsafeGetTensorImpl()));
  }
  for (const auto& p : t.model()->perceptual()->parameters()) {
    CHECK_FALSE(gen.contains(p.unsafeGetTensorImpl()));
    CHECK_FALSE(disc.contains(p.unsafeGetTensorImpl()));
  }
}

TEST_CASE("discriminator loss leaves generator-side gradients empty") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  Trainer t(cfg);
  auto [bx, by] = t.sample_batches(data.x, data.y);
  t.discriminator_loss(bx, by).backward();
  CHECK(grad_norm(t.model()->generator_parameters()) == 0.0);
  CHECK(grad_norm(t.model()->discriminator_parameters()) > 0.0);
}

TEST_CASE("a training step moves both sides and reports memory gradients") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  Trainer t(cfg);
  const auto keys_before = t.model()->memory(Domain::Y)->keys().clone();
  const auto disc_before = t.model()->discriminator_parameters()[0].clone();
  const auto report = t.step(data.x, data.y);
  CHECK(report.memory_key_grad_norm > 0.0);
  CHECK(report.memory_value_grad_norm > 0.0);
  CHECK_FALSE(torch::equal(keys_before, t.model()->memory(Domain::Y)->keys()));
  CHECK_FALSE(torch::equal(disc_before, t.model()->discriminator_parameters()[0]));
  CHECK(report.rows().size() == 8);
}

TEST_CASE("update mode refreshes memory without gradients") {
  const auto cfg = toy_config("memory_mode = update\nupdate_rate = 0.5\n");
  const auto data = toy_data(cfg);
  Trainer t(cfg);
  const auto values_before = t.model()->memory(Domain::X)->values().clone();
  const auto report = t.step(data.x, data.y);
  CHECK(report.memory_key_grad_norm == 0.0);
  CHECK(report.memory_value_grad_norm == 0.0);
  CHECK_FALSE(torch::equal(values_before, t.model()->memory(Domain::X)->values()));
  CHECK(torch::isfinite(t.model()->memory(Domain::X)->values()).all().item<bool>());
}

TEST_CASE("checkpoints round trip byte for byte") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  testing::TempDir dir;
  Trainer t(cfg);
  t.step(data.x, data.y);
  t.step(data.x, data.y);
  t.save(dir / "a.ckpt");
  auto loaded = Trainer::load(dir / "a.ckpt");
  CHECK(loaded.iteration() == 2);
  CHECK(same_state(t.model(), loaded.model()));
  loaded.save(dir / "b.ckpt");
  CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  testing::TempDir dir;
  Trainer straight(cfg);
  std::vector<LossReport> want;
  for (int i = 0; i < 4; ++i) want.push_back(straight.step(data.x, data.y));

  Trainer first(cfg);
  first.step(data.x, data.y);
  first.step(data.x, data.y);
  first.save(dir / "mid.ckpt");
  auto resumed = Trainer::load(dir / "mid.ckpt");
  for (int i = 2; i < 4; ++i) CHECK(resumed.step(data.x, data.y).rows() == want[static_cast<size_t>(i)].rows());
  CHECK(same_state(straight.model(), resumed.model()));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto cfg = toy_config();
  testing::TempDir dir;
  Trainer t(cfg);
  t.save(dir / "good.ckpt");
  auto bytes = file_bytes(dir / "good.ckpt");

  auto write = [&](const std::string& name, const std::vector<uint8_t>& b) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  };
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x5a;
  write("flipped.ckpt", flipped);
  write("short.ckpt", std::vector<uint8_t>(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 3)));
  write("empty.ckpt", {});

  CHECK_THROWS_AS(Trainer::load(dir / "flipped.ckpt"), CheckpointError);
  CHECK_THROWS_AS(Trainer::load(dir / "short.ckpt"), CheckpointError);
  CHECK_THROWS_AS(Trainer::load(dir / "empty.ckpt"), CheckpointError);
  CHECK_THROWS_AS(Trainer::load(dir / "absent.ckpt"), CheckpointError);

  // A well-formed file whose arrays do not match the model.
  auto contents = read_checkpoint(dir / "good.ckpt");
  contents.arrays.pop_back();
  write_checkpoint(dir / "missing.ckpt", contents);
  CHECK_THROWS_AS(Trainer::load(dir / "missing.ckpt"), CheckpointError);
}

TEST_CASE("self reconstruction fits a single image") {
  const auto cfg = toy_config("lambda_adv = 0\nlambda_perc = 0\nlr = 0.001\n");
  const auto data = toy_data(cfg, 1);
  Trainer t(cfg);
  std::vector<double> self;
  for (int i = 0; i < 50; ++i) self.push_back(t.step(data.x, data.y).term("self"));
  CHECK(self.back() < self.front());
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += self[static_cast<size_t>(i)];
    late += self[static_cast<size_t>(40 + i)];
  }
  CHECK(late < 0.8 * early);
}

TEST_CASE("non-finite losses abort with the term and iteration") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  Trainer t(cfg);
  auto [bx, by] = t.sample_batches(data.x, data.y);
  bx.images = bx.images.clone();
  bx.images[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.train_step(bx, by);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    CHECK(what.find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("batches are validated") {
  const auto cfg = toy_config();
  const auto data = toy_data(cfg);
  Trainer t(cfg);
  auto [bx, by] = t.sample_batches(data.x, data.y);
  Batch odd{bx.images.narrow(2, 0, 14), bx.masks.narrow(1, 0, 14)};
  CHECK_THROWS_AS(t.train_step(odd, by), ShapeError);
  Batch bad{bx.images, torch::full_like(bx.masks, 5)};
  CHECK_THROWS_AS(t.train_step(bad, by), DataError);
  CHECK_THROWS_AS(t.step({}, data.y), DataError);
  CHECK(t.translate(data.x[0]).sizes() == data.x[0].image.data().sizes());
}
