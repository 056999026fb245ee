#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "shunit/config.hpp"
#include "shunit/data.hpp"
#include "shunit/encoders.hpp"
#include "shunit/networks.hpp"
#include "shunit/style_memory.hpp"

namespace shunit {

// Resolution ratio between images and content/style features.
inline constexpr int64_t kFeatureStride = 4;

// Plain container module so children can be registered by name from outside.
class GroupImpl : public torch::nn::Module {
 public:
  template <class M>
  M add(const std::string& name, M module) {
    return register_module(name, std::move(module));
  }
};
TORCH_MODULE(Group);

// Both translation directions. Parameter names follow
//   enc.<d>.content.*, enc.<d>.style.*, memory.<d>.{keys,values},
//   gen.<d>.*, disc.<d>.scale<i>.*, perc.*
// with <d> in {x, y}.
class ShunitModelImpl : public torch::nn::Module {
 public:
  explicit ShunitModelImpl(const ModelConfig& config);

  ContentEncoder& content_encoder(Domain d) { return content_[index(d)]; }
  StyleEncoder& style_encoder(Domain d) { return style_[index(d)]; }
  StyleMemory& memory(Domain d) { return memory_[index(d)]; }
  Generator& generator(Domain d) { return gen_[index(d)]; }
  MultiScaleDiscriminator& discriminator(Domain d) { return disc_[index(d)]; }
  PerceptualExtractor& perceptual() { return perc_; }

  // Encoders, memories (backprop mode only) and generators.
  std::vector<torch::Tensor> generator_parameters();
  std::vector<torch::Tensor> discriminator_parameters();

  // All parameters and buffers, sorted by name.
  std::vector<std::pair<std::string, torch::Tensor>> named_state();

  // Full-resolution images [B, 3, H, W] + masks [B, H, W] from `source`
  // rendered in the other domain: encode, read the target memory, generate.
  torch::Tensor translate(const torch::Tensor& images, const torch::Tensor& masks, Domain source);

  const ModelConfig& config() const { return config_; }

 private:
  static size_t index(Domain d) { return d == Domain::X ? 0 : 1; }

  ModelConfig config_;
  ContentEncoder content_[2]{nullptr, nullptr};
  StyleEncoder style_[2]{nullptr, nullptr};
  StyleMemory memory_[2]{nullptr, nullptr};
  Generator gen_[2]{nullptr, nullptr};
  MultiScaleDiscriminator disc_[2]{nullptr, nullptr};
  PerceptualExtractor perc_{nullptr};
};
TORCH_MODULE(ShunitModel);

PerceptualExtractor make_perceptual(const ModelConfig& config);

}  // namespace shunit
