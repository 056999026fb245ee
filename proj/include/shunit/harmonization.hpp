#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "shunit/layers.hpp"

namespace shunit {

// Per-pixel blend weight: out[b, h, w] = alphas[mask[b, h, w]].
// alphas [N] (already in (0, 1)), mask [B, h, w] -> [B, h, w].
torch::Tensor alpha_mask(const torch::Tensor& alphas, const torch::Tensor& mask);

// gamma * (f - mu) / sigma + beta with per-sample, per-channel spatial
// statistics of f (population variance, sigma floored at eps).
torch::Tensor denormalize(const torch::Tensor& f, const torch::Tensor& gamma, const torch::Tensor& beta,
                          double eps = kInstanceNormEps);

struct Modulation {
  torch::Tensor gamma;
  torch::Tensor beta;
};

// Shared 3x3 conv + ReLU, then separate 3x3 heads for scale and shift.
class ModulationStackImpl : public torch::nn::Module {
 public:
  ModulationStackImpl(int64_t style_channels, int64_t hidden, int64_t feature_channels, PadType pad);

  Modulation forward(const torch::Tensor& style);

  ConvBlock& shared() { return shared_; }
  ConvBlock& gamma() { return gamma_; }
  ConvBlock& beta() { return beta_; }

 private:
  ConvBlock shared_{nullptr};
  ConvBlock gamma_{nullptr};
  ConvBlock beta_{nullptr};
};
TORCH_MODULE(ModulationStack);

struct HarmonizationOptions {
  int64_t feature_channels = 256;
  int64_t component_channels = 128;
  int64_t memory_channels = 128;
  int64_t hidden = 128;
  int64_t num_classes = 2;
  PadType pad = PadType::Reflect;
  double eps = kInstanceNormEps;
};

// Style harmonization layer. The component style and the memory style each
// produce (gamma, beta); a class-wise alpha, broadcast over the label, blends
// them: gamma = a * gamma_comp + (1 - a) * gamma_mem (beta likewise). The
// blended pair denormalizes the instance-normalized input feature.
class StyleHarmonizationImpl : public torch::nn::Module {
 public:
  explicit StyleHarmonizationImpl(const HarmonizationOptions& options);

  // f [B, C, h, w]; comp [B, Cc, h', w']; mem [B, Cm, h', w']; mask [B, h, w].
  // Styles at a different resolution than f are bilinearly resized.
  torch::Tensor forward(const torch::Tensor& f, const torch::Tensor& comp, const torch::Tensor& mem,
                        const torch::Tensor& mask);

  // Blended modulation only (exposed for inspection and tests).
  Modulation modulation(const torch::Tensor& comp, const torch::Tensor& mem, const torch::Tensor& mask,
                        int64_t height, int64_t width);

  // sigmoid(alpha_raw): one blend weight per class, in (0, 1).
  torch::Tensor alphas() const { return torch::sigmoid(alpha_raw_); }
  torch::Tensor& alpha_raw() { return alpha_raw_; }

  ModulationStack& component_stack() { return component_; }
  ModulationStack& memory_stack() { return memory_; }
  const HarmonizationOptions& options() const { return options_; }

 private:
  HarmonizationOptions options_;
  ModulationStack component_{nullptr};
  ModulationStack memory_{nullptr};
  torch::Tensor alpha_raw_;  // [N], init 0 -> alpha 0.5
};
TORCH_MODULE(StyleHarmonization);

// f + Conv(ReLU(SHL_b(Conv(ReLU(SHL_a(f)))))). The two SHLs are owned by the
// caller (the generator registers them under flat names); this module only
// registers its two convolutions.
class SHResBlockImpl : public torch::nn::Module {
 public:
  SHResBlockImpl(int64_t channels, StyleHarmonization first, StyleHarmonization second, PadType pad);

  torch::Tensor forward(const torch::Tensor& f, const torch::Tensor& comp, const torch::Tensor& mem,
                        const torch::Tensor& mask);

  ConvBlock& conv1() { return conv1_; }
  ConvBlock& conv2() { return conv2_; }

 private:
  StyleHarmonization first_;
  StyleHarmonization second_;
  ConvBlock conv1_{nullptr};
  ConvBlock conv2_{nullptr};
};
TORCH_MODULE(SHResBlock);

}  // namespace shunit
