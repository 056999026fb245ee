#pragma once

#include <cmath>
#include <vector>

#include <torch/torch.h>

// Scalar reference implementations used as independent oracles.
namespace oracle {

struct ReadOut {
  std::vector<double> style;    // [B, Cs, h, w] row-major
  std::vector<double> weights;  // [B, U, h, w]; padding slots 0
};

// Loops over pixels and slots: cosine logits against the pixel's own class,
// softmax over that class's first slots[n] entries, weighted sum of values.
inline ReadOut memory_read(const torch::Tensor& content, const torch::Tensor& mask, const torch::Tensor& keys,
                           const torch::Tensor& values, const std::vector<int64_t>& slots, double eps = 1e-8) {
  const auto c = content.to(torch::kFloat64).contiguous();
  const auto m = mask.to(torch::kInt64).contiguous();
  const auto k = keys.to(torch::kFloat64).contiguous();
  const auto v = values.to(torch::kFloat64).contiguous();
  const int64_t b = c.size(0), cc = c.size(1), h = c.size(2), w = c.size(3);
  const int64_t u = k.size(1), cs = v.size(2);
  const double* cp = c.data_ptr<double>();
  const int64_t* mp = m.data_ptr<int64_t>();
  const double* kp = k.data_ptr<double>();
  const double* vp = v.data_ptr<double>();

  ReadOut out;
  out.style.assign(static_cast<size_t>(b * cs * h * w), 0.0);
  out.weights.assign(static_cast<size_t>(b * u * h * w), 0.0);
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const int64_t n = mp[(bi * h + y) * w + x];
        const int64_t un = slots.size() == 1 ? slots[0] : slots[static_cast<size_t>(n)];
        double cnorm = 0;
        for (int64_t ch = 0; ch < cc; ++ch) {
          const double e = cp[((bi * cc + ch) * h + y) * w + x];
          cnorm += e * e;
        }
        cnorm = std::max(std::sqrt(cnorm), eps);
        std::vector<double> logit(static_cast<size_t>(un));
        for (int64_t j = 0; j < un; ++j) {
          double dot = 0, knorm = 0;
          for (int64_t ch = 0; ch < cc; ++ch) {
            const double kv = kp[(n * u + j) * cc + ch];
            dot += cp[((bi * cc + ch) * h + y) * w + x] * kv;
            knorm += kv * kv;
          }
          logit[static_cast<size_t>(j)] = dot / (cnorm * std::max(std::sqrt(knorm), eps));
        }
        double zmax = -1e300;
        for (double l : logit) zmax = std::max(zmax, l);
        double z = 0;
        for (double l : logit) z += std::exp(l - zmax);
        for (int64_t j = 0; j < un; ++j) {
          const double wj = std::exp(logit[static_cast<size_t>(j)] - zmax) / z;
          out.weights[static_cast<size_t>(((bi * u + j) * h + y) * w + x)] = wj;
          for (int64_t ch = 0; ch < cs; ++ch) {
            out.style[static_cast<size_t>(((bi * cs + ch) * h + y) * w + x)] += wj * vp[(n * u + j) * cs + ch];
          }
        }
      }
    }
  }
  return out;
}

// Pixel-wise InfoNCE on [C, h, w] maps, summed over pixels.
inline double info_nce(const torch::Tensor& anchors, const torch::Tensor& positives, double tau, bool normalize) {
  const auto a = anchors.to(torch::kFloat64).reshape({anchors.size(0), -1}).t().contiguous();
  const auto p = positives.to(torch::kFloat64).reshape({positives.size(0), -1}).t().contiguous();
  const int64_t hw = a.size(0), c = a.size(1);
  auto vec = [&](const torch::Tensor& t, int64_t i) {
    std::vector<double> out(static_cast<size_t>(c));
    double norm = 0;
    for (int64_t k = 0; k < c; ++k) {
      out[static_cast<size_t>(k)] = t[i][k].item<double>();
      norm += out[static_cast<size_t>(k)] * out[static_cast<size_t>(k)];
    }
    if (normalize) {
      norm = std::max(std::sqrt(norm), 1e-12);
      for (auto& e : out) e /= norm;
    }
    return out;
  };
  std::vector<std::vector<double>> av, pv;
  for (int64_t i = 0; i < hw; ++i) {
    av.push_back(vec(a, i));
    pv.push_back(vec(p, i));
  }
  double loss = 0;
  for (int64_t i = 0; i < hw; ++i) {
    std::vector<double> logits(static_cast<size_t>(hw));
    for (int64_t j = 0; j < hw; ++j) {
      double dot = 0;
      for (int64_t k = 0; k < c; ++k) dot += av[static_cast<size_t>(j)][static_cast<size_t>(k)] * pv[static_cast<size_t>(i)][static_cast<size_t>(k)];
      logits[static_cast<size_t>(j)] = dot / tau;
    }
    double zmax = -1e300;
    for (double l : logits) zmax = std::max(zmax, l);
    double z = 0;
    for (double l : logits) z += std::exp(l - zmax);
    loss -= logits[static_cast<size_t>(i)] - zmax - std::log(z);
  }
  return loss;
}

}  // namespace oracle
