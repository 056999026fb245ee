#include "doctest_torch.hpp"

#include <random>

#include "shunit/errors.hpp"
#include "shunit/metrics.hpp"
#include "support.hpp"

using namespace shunit;

namespace {

GaussianStats stats(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  GaussianStats s;
  s.count = 100;
  s.mean = std::move(mean);
  s.covariance = std::move(cov);
  return s;
}

std::vector<Eigen::VectorXd> gaussian_samples(int n, const Eigen::VectorXd& mean, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(mean.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = mean[k] + normal(rng);
    out.push_back(v);
  }
  return out;
}

std::vector<DomainSample> random_set(int count, int64_t n, uint64_t seed) {
  torch::manual_seed(seed);
  std::vector<DomainSample> out;
  for (int i = 0; i < count; ++i) {
    auto mask = torch::zeros({16, 16}, torch::kInt64);
    if (n > 1) mask.index_put_({torch::indexing::Slice(4, 12), torch::indexing::Slice(2, 10)}, 1);
    out.emplace_back(ImageTensor(torch::rand({3, 16, 16}) * 2 - 1), LabelMask(mask, n), Domain::Y,
                     "s" + std::to_string(i));
  }
  return out;
}

}  // namespace

TEST_CASE("frechet distance closed forms") {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0;
  m1 << 1;
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  CHECK(std::abs(frechet_distance(stats(m0, one), stats(m1, one)) - 1.0) < 1e-6);

  Eigen::VectorXd a(2), b(2);
  a << 0, 0;
  b << 1, 2;
  Eigen::MatrixXd sa = Eigen::Vector2d(1, 4).asDiagonal();
  Eigen::MatrixXd sb = Eigen::Vector2d(4, 1).asDiagonal();
  CHECK(std::abs(frechet_distance(stats(a, sa), stats(b, sb)) - 7.0) < 1e-5);
  CHECK(std::abs(frechet_distance(stats(a, sa), stats(a, sa))) < 1e-8);
}

TEST_CASE("frechet distance is symmetric and nonnegative on random statistics") {
  std::mt19937_64 rng(1);
  for (int d : {1, 3, 8, 20}) {
    const auto p = GaussianStats::from_samples(gaussian_samples(50, Eigen::VectorXd::Zero(d), rng));
    const auto q = GaussianStats::from_samples(gaussian_samples(40, Eigen::VectorXd::Constant(d, 0.3), rng));
    const double pq = frechet_distance(p, q);
    const double qp = frechet_distance(q, p);
    CHECK(pq >= 0.0);
    CHECK(std::abs(pq - qp) < 1e-6);
    CHECK(frechet_distance(p, p) < 1e-6);
  }
}

TEST_CASE("frechet distance rejects mismatched or non-finite statistics") {
  Eigen::VectorXd m(2);
  m << 0, 0;
  Eigen::VectorXd bad(2);
  bad << std::numeric_limits<double>::infinity(), 0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(frechet_distance(stats(m, eye), stats(bad, eye)), NumericalError);
  Eigen::VectorXd m3 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(frechet_distance(stats(m, eye), stats(m3, Eigen::MatrixXd::Identity(3, 3))), ShapeError);
  auto few = stats(m, eye);
  few.count = 1;
  CHECK_THROWS_AS(frechet_distance(few, stats(m, eye)), MetricUndefinedError);
}

TEST_CASE("gaussian stats use the unbiased covariance") {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 2, 3, 2, 5, 8;
  const auto s = GaussianStats::from_samples(rows);
  CHECK(s.count == 3);
  CHECK(s.mean[0] == doctest::Approx(3.0));
  CHECK(s.covariance(0, 0) == doctest::Approx(4.0));
  CHECK(s.covariance(1, 1) == doctest::Approx(12.0));
  CHECK(s.covariance(0, 1) == doctest::Approx(6.0));
  CHECK((s.covariance - s.covariance.transpose()).norm() <= 1e-8);
  CHECK_THROWS_AS(GaussianStats::from_samples(Eigen::MatrixXd(1, 2)), MetricUndefinedError);
}

TEST_CASE("matrix square root reconstructs random SPD matrices") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int d : {1, 2, 5, 16, 33, 64}) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
    const Eigen::MatrixXd spd = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd r = sqrtm_psd(spd);
    CHECK((r * r - spd).norm() / spd.norm() < 1e-6);
  }
}

TEST_CASE("shifted gaussians match the closed form") {
  std::mt19937_64 rng(3);
  const double delta = 3.0;
  ClassEmbeddingSet gen, ref;
  gen.per_class[1] = gaussian_samples(200, Eigen::VectorXd::Zero(4), rng);
  ref.per_class[1] = gaussian_samples(200, Eigen::VectorXd::Constant(4, delta), rng);
  const auto report = cfid(gen, ref);
  REQUIRE(report.per_class.size() == 1);
  const double want = 4 * delta * delta;
  CHECK(std::abs(report.per_class[0].second - want) / want < 0.1);
}

TEST_CASE("class pooling examples") {
  const auto features = torch::randn({5, 4, 4});
  const auto zeros = torch::zeros({8, 8}, torch::kInt64);
  const auto pooled = pool_class_embeddings(features, zeros, 16);
  REQUIRE(pooled.size() == 1);
  namespace F = torch::nn::functional;
  const auto up = F::interpolate(features.unsqueeze(0).to(torch::kFloat64),
                                 F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{8, 8})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  const auto mean = up.mean({0, 2, 3});
  for (int64_t k = 0; k < 5; ++k) CHECK(std::abs(pooled.at(0)[k] - mean[k].item<double>()) < 1e-12);

  const auto constant = torch::tensor({0.5, -2.0, 3.0}).view({3, 1, 1}).expand({3, 2, 2});
  auto mask = torch::zeros({8, 8}, torch::kInt64);
  mask.index_put_({torch::indexing::Slice(0, 4)}, 1);
  for (const auto& [cls, v] : pool_class_embeddings(constant, mask, 1)) {
    CHECK(std::abs(v[0] - 0.5) < 1e-7);
    CHECK(std::abs(v[1] + 2.0) < 1e-7);
    CHECK(std::abs(v[2] - 3.0) < 1e-7);
  }

  // Classes under min_pixels are dropped.
  auto sparse = torch::zeros({8, 8}, torch::kInt64);
  sparse[0][0] = 2;
  const auto kept = pool_class_embeddings(features, sparse, 16);
  CHECK(kept.size() == 1);
  CHECK(kept.count(2) == 0);
}

TEST_CASE("bilinear 2x2 to 4x4 pooling matches hand weights") {
  // Half-pixel centers: output rows sample source rows at -0.25, 0.25, 0.75, 1.25,
  // clamped at the border.
  const double w[4][2] = {{1.0, 0.0}, {0.75, 0.25}, {0.25, 0.75}, {0.0, 1.0}};
  const double f[2][2] = {{1.0, 2.0}, {3.0, 4.0}};
  const int cls[4][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}};
  double sum[2] = {0, 0};
  int count[2] = {0, 0};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double v = 0;
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) v += w[i][p] * w[j][q] * f[p][q];
      sum[cls[i][j]] += v;
      count[cls[i][j]] += 1;
    }
  }
  const auto features = torch::tensor({{1.0, 2.0}, {3.0, 4.0}}, torch::kFloat64).unsqueeze(0);
  auto mask = torch::zeros({4, 4}, torch::kInt64);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) mask[i][j] = cls[i][j];
  const auto pooled = pool_class_embeddings(features, mask, 1);
  CHECK(std::abs(pooled.at(0)[0] - sum[0] / count[0]) < 1e-12);
  CHECK(std::abs(pooled.at(1)[0] - sum[1] / count[1]) < 1e-12);
  CHECK(std::abs(pooled.at(1)[0] - 2.5) < 1e-12);
}

TEST_CASE("cfid on identical and reordered sets") {
  auto extractor = PerceptualExtractor(PerceptualExtractorImpl::frozen_random(11));
  const auto a = random_set(6, 2, 5);
  const auto report = cfid(a, a, extractor);
  REQUIRE(report.per_class.size() == 2);
  for (const auto& [cls, d] : report.per_class) CHECK(std::abs(d) < 1e-6);
  CHECK(std::abs(report.mean) < 1e-6);

  const auto b = random_set(7, 2, 6);
  std::vector<DomainSample> reversed(b.rbegin(), b.rend());
  const auto r1 = cfid(a, b, extractor);
  const auto r2 = cfid(a, reversed, extractor);
  CHECK(r1.mean > 0);
  CHECK(std::abs(r1.mean - r2.mean) < 1e-9 * std::max(1.0, r1.mean));
}

TEST_CASE("cfid skips classes missing from one side") {
  std::mt19937_64 rng(4);
  ClassEmbeddingSet gen, ref;
  gen.per_class[0] = gaussian_samples(10, Eigen::VectorXd::Zero(3), rng);
  ref.per_class[0] = gaussian_samples(10, Eigen::VectorXd::Zero(3), rng);
  ref.per_class[2] = gaussian_samples(10, Eigen::VectorXd::Zero(3), rng);
  gen.per_class[3] = gaussian_samples(1, Eigen::VectorXd::Zero(3), rng);
  ref.per_class[3] = gaussian_samples(5, Eigen::VectorXd::Zero(3), rng);
  const auto report = cfid(gen, ref);
  REQUIRE(report.per_class.size() == 1);
  CHECK(report.per_class[0].first == 0);
  CHECK(report.skipped == std::vector<int64_t>{2, 3});
  CHECK(report.mean == report.per_class[0].second);

  ClassEmbeddingSet only;
  only.per_class[5] = gaussian_samples(4, Eigen::VectorXd::Zero(3), rng);
  CHECK_THROWS_AS(cfid(gen, only), MetricUndefinedError);
}

TEST_CASE("global fid") {
  auto extractor = PerceptualExtractor(PerceptualExtractorImpl::frozen_random(12));
  const auto a = random_set(5, 1, 7);
  const auto b = random_set(5, 1, 8);
  CHECK(std::abs(global_fid(a, a, extractor)) < 1e-6);
  const double g = global_fid(a, b, extractor);
  const auto c = cfid(a, b, extractor);
  CHECK(std::abs(g - c.mean) < 1e-9 * std::max(1.0, g));
  CHECK_THROWS_AS(global_fid(std::span(a).first(1), b, extractor), MetricUndefinedError);
}
