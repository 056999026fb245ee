#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "shunit/data.hpp"
#include "shunit/networks.hpp"

namespace shunit {

inline constexpr double kCovarianceEps = 1e-6;
inline constexpr int64_t kMinClassPixels = 16;

// Sample mean and unbiased covariance of a set of embeddings.
struct GaussianStats {
  int64_t count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  // rows: one embedding per row, at least two rows.
  static GaussianStats from_samples(const Eigen::MatrixXd& rows);
  static GaussianStats from_samples(const std::vector<Eigen::VectorXd>& samples);
};

// Principal square root of a symmetric positive semi-definite matrix.
// Negative eigenvalues from round-off are clipped to zero.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

// |mu_p - mu_q|^2 + Tr(S_p + S_q - 2 (S_p S_q)^(1/2)) with S = Sigma + eps I.
// The cross term is evaluated as Tr((A S_q A)^(1/2)), A = S_p^(1/2).
// Result is clipped at 0; throws NumericalError if it is not finite.
double frechet_distance(const GaussianStats& p, const GaussianStats& q, double eps = kCovarianceEps);

// Mean feature per class. features [D, h, w] are bilinearly resized to the
// mask's [H, W]; classes covering fewer than min_pixels are left out.
std::map<int64_t, Eigen::VectorXd> pool_class_embeddings(const torch::Tensor& features, const torch::Tensor& mask,
                                                         int64_t min_pixels = kMinClassPixels);

// First-block features of `image` pooled per class of `mask`.
std::map<int64_t, Eigen::VectorXd> extract_class_embeddings(const ImageTensor& image, const LabelMask& mask,
                                                            PerceptualExtractor& extractor,
                                                            int64_t min_pixels = kMinClassPixels);

// One embedding per (image, class).
struct ClassEmbeddingSet {
  std::map<int64_t, std::vector<Eigen::VectorXd>> per_class;

  void add(const std::map<int64_t, Eigen::VectorXd>& embeddings);
  // A class needs at least two embeddings for a covariance.
  bool usable(int64_t cls) const;

  static ClassEmbeddingSet from_samples(std::span<const DomainSample> samples, PerceptualExtractor& extractor,
                                        int64_t min_pixels = kMinClassPixels);
};

struct CfidReport {
  std::vector<std::pair<int64_t, double>> per_class;  // ascending class id
  std::vector<int64_t> skipped;                       // seen somewhere but not usable in both sets
  double mean = 0.0;
};

// Throws MetricUndefinedError when no class is usable in both sets.
CfidReport cfid(const ClassEmbeddingSet& generated, const ClassEmbeddingSet& reference, double eps = kCovarianceEps);
CfidReport cfid(std::span<const DomainSample> generated, std::span<const DomainSample> reference,
                PerceptualExtractor& extractor, int64_t min_pixels = kMinClassPixels, double eps = kCovarianceEps);

// One spatially averaged first-block embedding per image, single distance.
// Throws MetricUndefinedError with fewer than two images on a side.
double global_fid(std::span<const DomainSample> generated, std::span<const DomainSample> reference,
                  PerceptualExtractor& extractor, double eps = kCovarianceEps);

}  // namespace shunit
