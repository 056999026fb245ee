#include "shunit/harmonization.hpp"

#include <string>

#include "shunit/errors.hpp"

namespace F = torch::nn::functional;

namespace shunit {

torch::Tensor alpha_mask(const torch::Tensor& alphas, const torch::Tensor& mask) {
  if (alphas.dim() != 1) throw ShapeError("alpha_mask: alphas must be a vector");
  const auto idx = mask.to(torch::kInt64);
  if (idx.numel() > 0 && (idx.min().item<int64_t>() < 0 || idx.max().item<int64_t>() >= alphas.size(0))) {
    throw DataError("alpha_mask: class index out of range");
  }
  return alphas.index_select(0, idx.reshape({-1})).view(idx.sizes());
}

torch::Tensor denormalize(const torch::Tensor& f, const torch::Tensor& gamma, const torch::Tensor& beta, double eps) {
  if (f.dim() != 4) throw ShapeError("denormalize: feature must be [B, C, h, w]");
  const auto mu = f.mean({2, 3}, /*keepdim=*/true);
  const auto var = (f - mu).pow(2).mean({2, 3}, /*keepdim=*/true);
  // sqrt(max(var, eps^2)) == max(sigma, eps) with a finite gradient at var = 0.
  const auto sigma = var.clamp_min(eps * eps).sqrt();
  return gamma * ((f - mu) / sigma) + beta;
}

ModulationStackImpl::ModulationStackImpl(int64_t style_channels, int64_t hidden, int64_t feature_channels, PadType pad) {
  shared_ = register_module(
      "shared", ConvBlock(ConvBlockOptions(style_channels, hidden, 3, 1, 1).activation(Activation::ReLU).pad_type(pad)));
  gamma_ = register_module("gamma", ConvBlock(ConvBlockOptions(hidden, feature_channels, 3, 1, 1).pad_type(pad)));
  beta_ = register_module("beta", ConvBlock(ConvBlockOptions(hidden, feature_channels, 3, 1, 1).pad_type(pad)));
}

Modulation ModulationStackImpl::forward(const torch::Tensor& style) {
  const auto hidden = shared_->forward(style);
  return {gamma_->forward(hidden), beta_->forward(hidden)};
}

StyleHarmonizationImpl::StyleHarmonizationImpl(const HarmonizationOptions& options) : options_(options) {
  component_ = register_module("comp", ModulationStack(options_.component_channels, options_.hidden,
                                                       options_.feature_channels, options_.pad));
  memory_ = register_module("mem", ModulationStack(options_.memory_channels, options_.hidden,
                                                   options_.feature_channels, options_.pad));
  alpha_raw_ = register_parameter("alpha_raw", torch::zeros({options_.num_classes}));
  init_conv_normal(*this);
}

namespace {

torch::Tensor resize_to(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

Modulation StyleHarmonizationImpl::modulation(const torch::Tensor& comp, const torch::Tensor& mem,
                                              const torch::Tensor& mask, int64_t height, int64_t width) {
  if (comp.dim() != 4 || mem.dim() != 4 || mask.dim() != 3) {
    throw ShapeError("StyleHarmonization: styles must be [B, C, h, w] and mask [B, h, w]");
  }
  if (mask.size(1) != height || mask.size(2) != width) {
    throw ShapeError("StyleHarmonization: mask size " + std::to_string(mask.size(1)) + "x" +
                     std::to_string(mask.size(2)) + " does not match feature size " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (comp.size(0) != mask.size(0) || mem.size(0) != mask.size(0)) {
    throw ShapeError("StyleHarmonization: batch sizes differ");
  }
  const auto from_comp = component_->forward(resize_to(comp, height, width));
  const auto from_mem = memory_->forward(resize_to(mem, height, width));
  const auto a = alpha_mask(alphas().to(from_comp.gamma.dtype()), mask).unsqueeze(1);  // [B, 1, h, w]
  return {a * from_comp.gamma + (1.0 - a) * from_mem.gamma, a * from_comp.beta + (1.0 - a) * from_mem.beta};
}

torch::Tensor StyleHarmonizationImpl::forward(const torch::Tensor& f, const torch::Tensor& comp,
                                              const torch::Tensor& mem, const torch::Tensor& mask) {
  if (f.dim() != 4 || f.size(1) != options_.feature_channels) {
    throw ShapeError("StyleHarmonization: feature must be [B, " + std::to_string(options_.feature_channels) +
                     ", h, w]");
  }
  const auto mod = modulation(comp, mem, mask, f.size(2), f.size(3));
  return denormalize(f, mod.gamma, mod.beta, options_.eps);
}

SHResBlockImpl::SHResBlockImpl(int64_t channels, StyleHarmonization first, StyleHarmonization second, PadType pad)
    : first_(std::move(first)), second_(std::move(second)) {
  conv1_ = register_module("conv1", ConvBlock(ConvBlockOptions(channels, channels, 3, 1, 1).pad_type(pad)));
  conv2_ = register_module("conv2", ConvBlock(ConvBlockOptions(channels, channels, 3, 1, 1).pad_type(pad)));
  init_conv_normal(*this);
}

torch::Tensor SHResBlockImpl::forward(const torch::Tensor& f, const torch::Tensor& comp, const torch::Tensor& mem,
                                      const torch::Tensor& mask) {
  auto h = conv1_->forward(torch::relu(first_->forward(f, comp, mem, mask)));
  h = conv2_->forward(torch::relu(second_->forward(h, comp, mem, mask)));
  return f + h;
}

}  // namespace shunit
