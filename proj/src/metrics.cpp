#include "shunit/metrics.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "shunit/errors.hpp"

namespace shunit {

namespace F = torch::nn::functional;

GaussianStats GaussianStats::from_samples(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw MetricUndefinedError("covariance needs at least two samples");
  GaussianStats s;
  s.count = rows.rows();
  s.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
  s.covariance = centered.transpose() * centered / static_cast<double>(s.count - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

GaussianStats GaussianStats::from_samples(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw MetricUndefinedError("covariance needs at least two samples");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(samples.size()), samples.front().size());
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != rows.cols()) throw ShapeError("embeddings differ in dimension");
    rows.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }
  return from_samples(rows);
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("sqrtm_psd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("sqrtm_psd: eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& p, const GaussianStats& q, double eps) {
  const auto d = p.mean.size();
  if (q.mean.size() != d || p.covariance.rows() != d || q.covariance.rows() != d) {
    throw ShapeError("frechet_distance: statistics differ in dimension");
  }
  if (p.count < 2 || q.count < 2) throw MetricUndefinedError("frechet_distance: counts must be at least 2");

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd sp = p.covariance + eps * eye;
  const Eigen::MatrixXd sq = q.covariance + eps * eye;
  const Eigen::MatrixXd a = sqrtm_psd(sp);
  Eigen::MatrixXd inner = a * sq * a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value = (p.mean - q.mean).squaredNorm() + sp.trace() + sq.trace() - 2.0 * cross;
  if (!std::isfinite(value)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(sp, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(sq, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "frechet_distance is not finite; eigenvalue range p [" << ep.eigenvalues().minCoeff() << ", "
        << ep.eigenvalues().maxCoeff() << "], q [" << eq.eigenvalues().minCoeff() << ", "
        << eq.eigenvalues().maxCoeff() << "]";
    throw NumericalError(msg.str());
  }
  return std::max(0.0, value);
}

std::map<int64_t, Eigen::VectorXd> pool_class_embeddings(const torch::Tensor& features, const torch::Tensor& mask,
                                                         int64_t min_pixels) {
  if (features.dim() != 3) throw ShapeError("pool_class_embeddings: features must be [D, h, w]");
  if (mask.dim() != 2) throw ShapeError("pool_class_embeddings: mask must be [H, W]");
  const auto h = mask.size(0);
  const auto w = mask.size(1);
  auto up = features.to(torch::kFloat64).unsqueeze(0);
  if (up.size(2) != h || up.size(3) != w) {
    up = F::interpolate(up, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{h, w})
                                .mode(torch::kBilinear)
                                .align_corners(false));
  }
  const auto flat = up.squeeze(0).reshape({features.size(0), h * w});  // [D, HW]
  const auto labels = mask.to(torch::kInt64).reshape({h * w});

  std::map<int64_t, Eigen::VectorXd> out;
  const auto classes = std::get<0>(torch::_unique(labels));
  for (int64_t i = 0; i < classes.numel(); ++i) {
    const auto cls = classes[i].item<int64_t>();
    const auto sel = labels == cls;
    const auto n = sel.sum().item<int64_t>();
    if (n < std::max<int64_t>(min_pixels, 1)) continue;
    const auto mean = flat.index({torch::indexing::Slice(), sel}).mean(1).contiguous();
    out.emplace(cls, Eigen::Map<const Eigen::VectorXd>(mean.data_ptr<double>(), mean.numel()));
  }
  return out;
}

std::map<int64_t, Eigen::VectorXd> extract_class_embeddings(const ImageTensor& image, const LabelMask& mask,
                                                            PerceptualExtractor& extractor, int64_t min_pixels) {
  torch::NoGradGuard no_grad;
  const auto features = extractor->first_block(image.data().to(torch::kFloat32).unsqueeze(0)).squeeze(0);
  return pool_class_embeddings(features, mask.data(), min_pixels);
}

void ClassEmbeddingSet::add(const std::map<int64_t, Eigen::VectorXd>& embeddings) {
  for (const auto& [cls, v] : embeddings) {
    if (!v.allFinite()) throw NumericalError("class " + std::to_string(cls) + " embedding is not finite");
    per_class[cls].push_back(v);
  }
}

bool ClassEmbeddingSet::usable(int64_t cls) const {
  const auto it = per_class.find(cls);
  return it != per_class.end() && it->second.size() >= 2;
}

ClassEmbeddingSet ClassEmbeddingSet::from_samples(std::span<const DomainSample> samples, PerceptualExtractor& extractor,
                                                  int64_t min_pixels) {
  ClassEmbeddingSet set;
  for (const auto& s : samples) set.add(extract_class_embeddings(s.image, s.mask, extractor, min_pixels));
  return set;
}

CfidReport cfid(const ClassEmbeddingSet& generated, const ClassEmbeddingSet& reference, double eps) {
  std::set<int64_t> seen;
  for (const auto& [cls, v] : generated.per_class) seen.insert(cls);
  for (const auto& [cls, v] : reference.per_class) seen.insert(cls);

  CfidReport report;
  double total = 0.0;
  for (const auto cls : seen) {
    if (!generated.usable(cls) || !reference.usable(cls)) {
      report.skipped.push_back(cls);
      continue;
    }
    const double d = frechet_distance(GaussianStats::from_samples(generated.per_class.at(cls)),
                                      GaussianStats::from_samples(reference.per_class.at(cls)), eps);
    report.per_class.emplace_back(cls, d);
    total += d;
  }
  if (report.per_class.empty()) throw MetricUndefinedError("cfid: no class is usable in both sets");
  report.mean = total / static_cast<double>(report.per_class.size());
  return report;
}

CfidReport cfid(std::span<const DomainSample> generated, std::span<const DomainSample> reference,
                PerceptualExtractor& extractor, int64_t min_pixels, double eps) {
  if (generated.empty() || reference.empty()) throw MetricUndefinedError("cfid: both sets must be nonempty");
  return cfid(ClassEmbeddingSet::from_samples(generated, extractor, min_pixels),
              ClassEmbeddingSet::from_samples(reference, extractor, min_pixels), eps);
}

double global_fid(std::span<const DomainSample> generated, std::span<const DomainSample> reference,
                  PerceptualExtractor& extractor, double eps) {
  if (generated.size() < 2 || reference.size() < 2) {
    throw MetricUndefinedError("global_fid: each set needs at least two images");
  }
  auto embed = [&extractor](std::span<const DomainSample> samples) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : samples) {
      const auto whole = torch::zeros({s.mask.height(), s.mask.width()}, torch::kInt64);
      torch::NoGradGuard no_grad;
      const auto features = extractor->first_block(s.image.data().to(torch::kFloat32).unsqueeze(0)).squeeze(0);
      out.push_back(pool_class_embeddings(features, whole, 1).at(0));
    }
    return out;
  };
  return frechet_distance(GaussianStats::from_samples(embed(generated)), GaussianStats::from_samples(embed(reference)),
                          eps);
}

}  // namespace shunit
