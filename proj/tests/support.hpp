#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <torch/torch.h>

namespace testing {

// Relative error ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, tiny) between the
// autodiff gradient of the scalar f() and central differences, w.r.t. the
// double leaf tensor x.
inline double gradient_check(const std::function<torch::Tensor()>& f, torch::Tensor x, double h = 1e-6) {
  auto out = f();
  const auto auto_grad = torch::autograd::grad({out}, {x}, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                               /*allow_unused=*/true)[0];
  const auto analytic = auto_grad.defined() ? auto_grad.detach().clone() : torch::zeros_like(x);
  auto numeric = torch::zeros_like(x);
  torch::NoGradGuard no_grad;
  auto flat = x.view({-1});
  auto nflat = numeric.view({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i].fill_(orig + h);
    const double up = f().item<double>();
    flat[i].fill_(orig - h);
    const double down = f().item<double>();
    flat[i].fill_(orig);
    nflat[i].fill_((up - down) / (2 * h));
  }
  const double denom = std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), 1e-12});
  return (analytic - numeric).norm().item<double>() / denom;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("shunit_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

}  // namespace testing
