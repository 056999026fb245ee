#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "shunit/layers.hpp"

namespace shunit {

// Channel widths of one encoder branch:
//   Conv(in, base, 7, 1, 3) - Conv(base, 2*base, 4, 2, 1) - Conv(2*base, 4*base, 4, 2, 1)
//   - ResBlk(4*base) x res_blocks - Conv(4*base, out, 1, 1, 0)
// Paper widths are base = 64, out = 128.
struct EncoderOptions {
  int64_t base_width = 64;
  int64_t out_width = 128;
  int64_t res_blocks = 4;
  PadType pad = PadType::Reflect;

  // Multiplies every width by `factor` (rounded, at least 1); layer count is kept.
  EncoderOptions scaled(double factor) const;
};

class EncoderBranchImpl : public torch::nn::Module {
 public:
  EncoderBranchImpl(int64_t in_channels, const EncoderOptions& options, Norm norm);

  // [B, in, H, W] -> [B, out_width, H/4, W/4]
  torch::Tensor forward(const torch::Tensor& x);

  int64_t out_channels() const { return out_channels_; }
  torch::nn::Sequential& layers() { return layers_; }

 private:
  torch::nn::Sequential layers_{nullptr};
  int64_t out_channels_;
};
TORCH_MODULE(EncoderBranch);

// Domain-invariant content encoder: an instance-normalized image branch and an
// instance-normalized one-hot label branch, concatenated along channels.
// With use_label_input = false only the image branch is used.
class ContentEncoderImpl : public torch::nn::Module {
 public:
  ContentEncoderImpl(int64_t num_classes, const EncoderOptions& options, bool use_label_input = true);

  // image [B, 3, H, W], onehot [B, N, H, W] -> [B, out_channels, H/4, W/4]
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& onehot);

  int64_t out_channels() const;
  bool uses_label_input() const { return static_cast<bool>(label_branch_); }

 private:
  int64_t num_classes_;
  EncoderBranch image_branch_{nullptr};
  EncoderBranch label_branch_{nullptr};
};
TORCH_MODULE(ContentEncoder);

// Component-style encoder: same layout as one content branch with every
// normalization layer removed, so the input's own statistics survive.
class StyleEncoderImpl : public torch::nn::Module {
 public:
  explicit StyleEncoderImpl(const EncoderOptions& options);

  torch::Tensor forward(const torch::Tensor& image);

  int64_t out_channels() const { return branch_->out_channels(); }

 private:
  EncoderBranch branch_{nullptr};
};
TORCH_MODULE(StyleEncoder);

}  // namespace shunit
