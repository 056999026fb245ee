#include "doctest_torch.hpp"

#include "shunit/data.hpp"
#include "shunit/errors.hpp"
#include "shunit/png_io.hpp"
#include "support.hpp"

using namespace shunit;

namespace {

DomainSample make_sample(int64_t h, int64_t w, int64_t cls, Domain d, const std::string& name) {
  auto mask = torch::zeros({h, w}, torch::kInt64);
  mask.index_put_({torch::indexing::Slice(0, h / 2)}, cls);
  return DomainSample(ImageTensor(torch::rand({3, h, w}) * 2 - 1), LabelMask(mask, 3), d, name);
}

}  // namespace

TEST_CASE("image tensor validates shape and range") {
  CHECK_NOTHROW(ImageTensor(torch::zeros({3, 8, 8})));
  CHECK_THROWS_AS(ImageTensor(torch::zeros({1, 8, 8})), ShapeError);
  CHECK_THROWS_AS(ImageTensor(torch::zeros({3, 6, 8})), ShapeError);
  CHECK_THROWS_AS(ImageTensor(torch::full({3, 8, 8}, 1.5)), DataError);
  CHECK_THROWS_AS(ImageTensor(torch::full({3, 8, 8}, std::nan(""))), DataError);
}

TEST_CASE("label mask reports the offending pixel") {
  auto m = torch::zeros({4, 4}, torch::kInt64);
  m[2][3] = 2;
  try {
    LabelMask(m, 2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("class index out of range") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("col 3") != std::string::npos);
  }
}

TEST_CASE("domain sample requires matching sizes") {
  CHECK_THROWS_AS(DomainSample(ImageTensor(torch::zeros({3, 8, 8})), LabelMask(torch::zeros({4, 8}), 2), Domain::X),
                  ShapeError);
}

TEST_CASE("load_dataset pairs files by stem in filename order") {
  testing::TempDir dir;
  std::vector<DomainSample> samples;
  for (const char* name : {"c", "a", "b"}) samples.push_back(make_sample(8, 8, 1, Domain::X, name));
  save_dataset(samples, dir.path());

  const auto loaded = load_dataset(dir.path(), Domain::X, 3);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].name == "a");
  CHECK(loaded[1].name == "b");
  CHECK(loaded[2].name == "c");
  CHECK(torch::equal(loaded[2].mask.data(), samples[0].mask.data()));
  CHECK(testing::max_abs_diff(loaded[2].image.data(), samples[0].image.data()) < 1.0 / 127.0);
}

TEST_CASE("load_dataset names orphan files") {
  testing::TempDir dir;
  std::vector<DomainSample> samples{make_sample(8, 8, 1, Domain::Y, "p"), make_sample(8, 8, 1, Domain::Y, "q")};
  save_dataset(samples, dir.path());
  std::filesystem::remove(dir.path() / "y" / "labels" / "q.png");
  try {
    load_dataset(dir.path(), Domain::Y, 3);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("q.png") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects label values beyond N") {
  testing::TempDir dir;
  std::vector<DomainSample> samples{make_sample(8, 8, 2, Domain::X, "s")};
  save_dataset(samples, dir.path());
  CHECK_THROWS_WITH_AS(load_dataset(dir.path(), Domain::X, 2), doctest::Contains("class index out of range"),
                       DataError);
}

TEST_CASE("byte 255 maps to +1 and byte 0 to -1") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "labels");
  png::Image8 img{4, 4, 3, std::vector<uint8_t>(48, 255)};
  img.pixels[0] = 0;
  png::write(dir / "images/s.png", img);
  png::write(dir / "labels/s.png", png::Image8{4, 4, 1, std::vector<uint8_t>(16, 0)});
  const auto loaded = load_pairs(dir.path(), Domain::X, 2);
  REQUIRE(loaded.size() == 1);
  const auto& t = loaded[0].image.data();
  CHECK(t[0][0][0].item<float>() == -1.0f);
  CHECK(t[1][0][0].item<float>() == 1.0f);
  CHECK(t[2][3][3].item<float>() == 1.0f);
}

TEST_CASE("byte round trip stays within 1/127") {
  const auto v = torch::linspace(-1, 1, 1001);
  double worst = 0;
  for (int64_t i = 0; i < v.numel(); ++i) {
    const float x = v[i].item<float>();
    worst = std::max(worst, std::abs(static_cast<double>(byte_to_unit(unit_to_byte(x))) - x));
  }
  CHECK(worst < 1.0 / 127.0);
  CHECK(byte_to_unit(255) == 1.0f);
  CHECK(byte_to_unit(0) == -1.0f);
}

TEST_CASE("one_hot examples") {
  const LabelMask zeros(torch::zeros({3, 5}, torch::kInt64), 2);
  const auto oh = one_hot(zeros);
  CHECK(oh.sizes() == torch::IntArrayRef{2, 3, 5});
  CHECK(torch::equal(oh[0], torch::ones({3, 5})));
  CHECK(torch::equal(oh[1], torch::zeros({3, 5})));

  auto m = torch::zeros({2, 2}, torch::kInt64);
  m[0][0] = 1;
  const auto oh2 = one_hot(LabelMask(m, 2));
  CHECK(oh2[1][0][0].item<float>() == 1.0f);
  CHECK(oh2[0][0][0].item<float>() == 0.0f);
}

TEST_CASE("one_hot partitions unity and argmax recovers the mask") {
  torch::manual_seed(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = torch::randint(0, 5, {7, 9}, torch::kInt64);
    const auto oh = one_hot(LabelMask(m, 5));
    CHECK(torch::equal(oh.sum(0), torch::ones({7, 9})));
    CHECK(torch::equal(oh.argmax(0), m));
  }
}

TEST_CASE("downsample_mask examples") {
  const LabelMask uniform(torch::zeros({4, 4}, torch::kInt64), 2);
  const auto d = downsample_mask(uniform, 2);
  CHECK(d.data().sizes() == torch::IntArrayRef{2, 2});
  CHECK(torch::equal(d.data(), torch::zeros({2, 2}, torch::kInt64)));

  const auto m = torch::randint(0, 3, {8, 8}, torch::kInt64);
  CHECK(torch::equal(downsample_mask(LabelMask(m, 3), 1).data(), m));

  const auto ii = torch::arange(4).view({4, 1});
  const auto jj = torch::arange(4).view({1, 4});
  const auto checker = (ii + jj).remainder(2);
  CHECK(torch::equal(downsample_mask(LabelMask(checker, 2), 2).data(), torch::zeros({2, 2}, torch::kInt64)));

  CHECK_THROWS_AS(downsample_mask(uniform, 3), ShapeError);
}

TEST_CASE("downsample_mask composes") {
  torch::manual_seed(5);
  const auto m = LabelMask(torch::randint(0, 4, {24, 24}, torch::kInt64), 4);
  for (auto [a, b] : {std::pair{2, 3}, std::pair{3, 2}, std::pair{2, 2}, std::pair{4, 6}}) {
    CHECK(torch::equal(downsample_mask(m, a * b).data(), downsample_mask(downsample_mask(m, a), b).data()));
  }
}

TEST_CASE("generate_synthetic is deterministic and matches its intensity spec") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.x = {ClassIntensity{{0.f, 0.f, 0.f}, {0.1f, 0.1f, 0.1f}}, ClassIntensity{{0.8f, 0.8f, 0.8f}, {0.1f, 0.1f, 0.1f}}};
  spec.y = spec.x;
  spec.seed = 42;

  const auto a = generate_synthetic(spec, Domain::X, 64);
  const auto b = generate_synthetic(spec, Domain::X, 64);
  REQUIRE(a.size() == 64);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(torch::equal(a[i].image.data(), b[i].image.data()));
    CHECK(torch::equal(a[i].mask.data(), b[i].mask.data()));
  }

  double sum = 0;
  int64_t count = 0;
  for (const auto& s : a) {
    const auto sel = (s.mask.data() == 1).unsqueeze(0).expand({3, -1, -1});
    sum += s.image.data().masked_select(sel).sum().item<double>();
    count += sel.sum().item<int64_t>();
  }
  const double mean = sum / static_cast<double>(count);
  CHECK(mean >= 0.75);
  CHECK(mean <= 0.85);
  CHECK(std::abs(mean - 0.8) < 3 * 0.1 / std::sqrt(static_cast<double>(count)) + 1e-6);

  CHECK(generate_synthetic(spec, Domain::X, 0).empty());
}

TEST_CASE("synthetic spec rejects bad settings") {
  SyntheticSpec spec;
  spec.num_classes = 1;
  CHECK_THROWS(spec.validate());
  spec.num_classes = 2;
  spec.x.assign(2, ClassIntensity{{1.5f, 0.f, 0.f}, {0.1f, 0.1f, 0.1f}});
  spec.y.assign(2, ClassIntensity{});
  CHECK_THROWS(spec.validate());
}

TEST_CASE("collate stacks samples") {
  std::vector<DomainSample> samples{make_sample(8, 12, 1, Domain::X, "a"), make_sample(8, 12, 2, Domain::X, "b")};
  const auto batch = collate(std::span<const DomainSample>(samples));
  CHECK(batch.images.sizes() == torch::IntArrayRef{2, 3, 8, 12});
  CHECK(batch.masks.sizes() == torch::IntArrayRef{2, 8, 12});
  CHECK((batch.masks.scalar_type() == torch::kInt64));
}
