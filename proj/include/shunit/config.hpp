#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "shunit/data.hpp"
#include "shunit/layers.hpp"
#include "shunit/losses.hpp"
#include "shunit/networks.hpp"
#include "shunit/style_memory.hpp"

namespace shunit {

// paper: published layer widths. toy: every width multiplied by width_scale.
enum class Fidelity { Paper, Toy };

Fidelity parse_fidelity(std::string_view name);
std::string_view fidelity_name(Fidelity f);

struct ModelConfig {
  int64_t num_classes = 2;
  Fidelity fidelity = Fidelity::Toy;
  double width_scale = 0.25;
  std::vector<int64_t> slots{20};
  bool use_label_input = true;
  PadType pad = PadType::Reflect;
  int64_t disc_scales = 2;
  PerceptualVariant perceptual = PerceptualVariant::FrozenRandom;
  std::string perceptual_weights;
  uint64_t perceptual_seed = 1234;
  double init_std = 0.02;
  MemoryMode memory_mode = MemoryMode::Backprop;

  double effective_width_scale() const { return fidelity == Fidelity::Paper ? 1.0 : width_scale; }
};

struct LossConfig {
  LossWeights weights;
  bool use_content_loss = true;
  bool use_style_loss = true;
  ContrastiveMode mode = ContrastiveMode::Contrastive;
  bool normalize = true;
  Reduction reduction = Reduction::Mean;
  bool non_saturating = true;

  // Weights after the on/off switches are applied.
  LossWeights effective_weights() const;
  ContrastiveOptions contrastive() const;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  int64_t iterations = 1000;
  int64_t batch_size = 1;
  uint64_t seed = 0;
  double update_rate = 0.1;  // legacy memory update only
  double grad_clip = 0.0;    // max gradient norm; 0 disables
};

// Flat `key = value` run configuration ('#' starts a comment). Unknown keys
// are rejected. Every key, its default and meaning is listed in README.md.
struct RunConfig {
  std::string data_root = "data";
  std::string output_dir = "run";
  SyntheticSpec synthetic = default_synthetic(2);
  int64_t synthetic_count = 64;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  int64_t preview_every = 0;
  int64_t preview_count = 4;
  int64_t checkpoint_every = 0;
  std::string resume;

  static SyntheticSpec default_synthetic(int64_t num_classes);

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  // Canonical text form; parse(to_text()) reproduces the config exactly.
  std::string to_text() const;

  void validate() const;
};

}  // namespace shunit
