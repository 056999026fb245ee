#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace shunit {

// Backprop: keys/values are trainable parameters updated by the optimizer.
// Update: the legacy write rule moves slots toward input features; the bank
// receives no gradient in this mode.
enum class MemoryMode { Backprop, Update };

MemoryMode parse_memory_mode(std::string_view name);
std::string_view memory_mode_name(MemoryMode mode);

inline constexpr double kCosineEps = 1e-8;

// a.b / (max(|a|, eps) * max(|b|, eps)) along the last dimension, broadcasting.
torch::Tensor cosine_similarity(const torch::Tensor& a, const torch::Tensor& b, double eps = kCosineEps);

struct StyleMemoryOptions {
  int64_t num_classes = 2;
  // Slots per class. A single entry applies to every class; otherwise one
  // entry per class (storage is padded to the largest count).
  std::vector<int64_t> slots{20};
  int64_t key_dim = 256;
  int64_t value_dim = 128;
  double init_std = 0.02;
  MemoryMode mode = MemoryMode::Backprop;
};

struct ReadResult {
  torch::Tensor memory_style;  // [B, value_dim, h, w]
  torch::Tensor weights;       // [B, U, h, w]; slot weights of each pixel's own class
};

// Class-wise key-value style memory of one domain. Each pixel of class n
// attends only over class-n slots: w_j = softmax_j cos(c_i, k_{n,j}), and
// reads s_i = sum_j w_j v_{n,j}.
class StyleMemoryImpl : public torch::nn::Module {
 public:
  explicit StyleMemoryImpl(const StyleMemoryOptions& options);

  // content [B, key_dim, h, w], mask [B, h, w] at feature resolution.
  ReadResult read(const torch::Tensor& content, const torch::Tensor& mask) const;

  // Legacy slot update (Update mode only). For each slot of each class present
  // in `mask`, pixels are weighted by their read attention to that slot
  // (normalized over pixels) and the slot moves toward the weighted mean:
  // k <- (1 - rate) k + rate * mean(content), v likewise with `style`.
  void legacy_update(const torch::Tensor& content, const torch::Tensor& style, const torch::Tensor& mask,
                     double rate);

  void set_mode(MemoryMode mode);
  MemoryMode mode() const { return options_.mode; }

  torch::Tensor& keys() { return keys_; }
  torch::Tensor& values() { return values_; }
  const torch::Tensor& keys() const { return keys_; }
  const torch::Tensor& values() const { return values_; }
  const torch::Tensor& slot_mask() const { return slot_mask_; }

  int64_t num_classes() const { return options_.num_classes; }
  int64_t max_slots() const { return keys_.size(1); }
  int64_t slots(int64_t cls) const;
  const StyleMemoryOptions& options() const { return options_; }

 private:
  StyleMemoryOptions options_;
  torch::Tensor keys_;       // [N, U, key_dim]
  torch::Tensor values_;     // [N, U, value_dim]
  torch::Tensor slot_mask_;  // [N, U] bool buffer; false marks padding slots
};
TORCH_MODULE(StyleMemory);

}  // namespace shunit
