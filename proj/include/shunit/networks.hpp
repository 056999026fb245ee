#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "shunit/harmonization.hpp"
#include "shunit/layers.hpp"

namespace shunit {

// Decoder: SH ResBlk x blocks at content resolution, then
//   up2 - Conv(C, h1, 5, 1, 2, IN, relu) - up2 - Conv(h1, h2, 5, 1, 2, IN, relu)
//   - Conv(h2, 3, 7, 1, 3, -, tanh).
// Paper widths: C = 256, h1 = 128, h2 = 64, styles 128, SHL hidden 128.
struct GeneratorOptions {
  int64_t feature_channels = 256;
  int64_t component_channels = 128;
  int64_t memory_channels = 128;
  int64_t shl_hidden = 128;
  int64_t head_width1 = 128;
  int64_t head_width2 = 64;
  int64_t blocks = 4;
  int64_t num_classes = 2;
  PadType pad = PadType::Reflect;
};

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorOptions& options);

  // content [B, C, h, w], comp [B, Cc, h, w], mem [B, Cm, h, w], mask [B, h, w]
  // -> image [B, 3, 4h, 4w] in [-1, 1].
  torch::Tensor forward(const torch::Tensor& content, const torch::Tensor& comp, const torch::Tensor& mem,
                        const torch::Tensor& mask);

  int64_t num_shl() const { return static_cast<int64_t>(shl_.size()); }
  StyleHarmonization& shl(int64_t i) { return shl_.at(static_cast<size_t>(i)); }
  torch::nn::Sequential& head() { return head_; }
  const GeneratorOptions& options() const { return options_; }

 private:
  GeneratorOptions options_;
  std::vector<StyleHarmonization> shl_;  // registered as shl0, shl1, ...
  std::vector<SHResBlock> blocks_;       // registered as block0, ...
  torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(Generator);

struct DiscriminatorOptions {
  int64_t in_channels = 3;
  int64_t base_width = 64;
  int64_t scales = 2;
};

inline constexpr int64_t kDiscriminatorMinSize = 16;

// Four stride-2 4x4 convolutions (leaky ReLU 0.2 between them) ending in a
// one-channel patch logit map. No normalization, no final activation.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int64_t in_channels, int64_t base_width);

  torch::Tensor forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential layers_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

class MultiScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit MultiScaleDiscriminatorImpl(const DiscriminatorOptions& options);

  // One logit map per scale; scale s sees the input average-pooled s times
  // (3x3 window, stride 2). Inputs below 16 px at any scale are rejected.
  std::vector<torch::Tensor> forward(const torch::Tensor& image);

  int64_t scales() const { return static_cast<int64_t>(scales_.size()); }

 private:
  std::vector<PatchDiscriminator> scales_;
};
TORCH_MODULE(MultiScaleDiscriminator);

enum class PerceptualVariant { FrozenRandom, Vgg16Relu53 };

PerceptualVariant parse_perceptual_variant(std::string_view name);
std::string_view perceptual_variant_name(PerceptualVariant variant);

// Frozen feature function for the perceptual loss and the class-wise FID.
//
// frozen-random: Conv3x3(3,16)-ReLU-Conv3x3(16,16,s2)-ReLU | Conv3x3(16,32)-ReLU
//   -Conv3x3(32,32,s2)-ReLU, He-normal weights drawn from `seed`. The first
//   block ends after the first stride-2 stage (16 channels, H/2).
// pretrained-vgg16-relu5_3: VGG-16 `features` up to relu5_3 with weights
//   loaded from a torch::save archive of this module; the first block ends
//   after pool1 (64 channels, H/2). Inputs are mapped from [-1, 1] to the
//   ImageNet normalization.
class PerceptualExtractorImpl : public torch::nn::Module {
 public:
  static std::shared_ptr<PerceptualExtractorImpl> frozen_random(uint64_t seed);
  static std::shared_ptr<PerceptualExtractorImpl> vgg16(const std::filesystem::path& weights);

  PerceptualExtractorImpl(PerceptualVariant variant, uint64_t seed);

  torch::Tensor forward(const torch::Tensor& images);      // [B,3,H,W] -> deep features
  torch::Tensor first_block(const torch::Tensor& images);  // [B,3,H,W] -> fine features

  PerceptualVariant variant() const { return variant_; }
  int64_t first_block_channels() const;

 private:
  torch::Tensor prepare(const torch::Tensor& images) const;
  void freeze();

  PerceptualVariant variant_;
  torch::nn::Sequential block1_{nullptr};
  torch::nn::Sequential rest_{nullptr};
};
TORCH_MODULE(PerceptualExtractor);

}  // namespace shunit
