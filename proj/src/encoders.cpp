#include "shunit/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shunit/errors.hpp"

namespace shunit {

namespace {

int64_t scale_width(int64_t width, double factor) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::lround(static_cast<double>(width) * factor)));
}

void check_image_batch(const torch::Tensor& x, int64_t channels, const char* who) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ShapeError(std::string(who) + ": expected [B, " + std::to_string(channels) + ", H, W], got " +
                     std::to_string(x.dim()) + "-d tensor");
  }
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0) {
    throw ShapeError(std::string(who) + ": H and W must be divisible by 4");
  }
}

}  // namespace

EncoderOptions EncoderOptions::scaled(double factor) const {
  EncoderOptions out = *this;
  out.base_width = scale_width(base_width, factor);
  out.out_width = scale_width(out_width, factor);
  return out;
}

EncoderBranchImpl::EncoderBranchImpl(int64_t in_channels, const EncoderOptions& o, Norm norm)
    : out_channels_(o.out_width) {
  const int64_t c1 = o.base_width;
  const int64_t c2 = 2 * o.base_width;
  const int64_t c3 = 4 * o.base_width;
  torch::nn::Sequential seq;
  seq->push_back(ConvBlock(ConvBlockOptions(in_channels, c1, 7, 1, 3).norm(norm).activation(Activation::ReLU).pad_type(o.pad)));
  seq->push_back(ConvBlock(ConvBlockOptions(c1, c2, 4, 2, 1).norm(norm).activation(Activation::ReLU).pad_type(o.pad)));
  seq->push_back(ConvBlock(ConvBlockOptions(c2, c3, 4, 2, 1).norm(norm).activation(Activation::ReLU).pad_type(o.pad)));
  for (int64_t i = 0; i < o.res_blocks; ++i) seq->push_back(ResBlock(c3, norm, o.pad));
  seq->push_back(ConvBlock(ConvBlockOptions(c3, o.out_width, 1, 1, 0).norm(norm).activation(Activation::ReLU).pad_type(o.pad)));
  layers_ = register_module("layers", seq);
  init_conv_normal(*this);
}

torch::Tensor EncoderBranchImpl::forward(const torch::Tensor& x) { return layers_->forward(x); }

ContentEncoderImpl::ContentEncoderImpl(int64_t num_classes, const EncoderOptions& options, bool use_label_input)
    : num_classes_(num_classes) {
  image_branch_ = register_module("image", EncoderBranch(3, options, Norm::Instance));
  if (use_label_input) label_branch_ = register_module("label", EncoderBranch(num_classes, options, Norm::Instance));
}

int64_t ContentEncoderImpl::out_channels() const {
  return image_branch_->out_channels() + (label_branch_ ? label_branch_->out_channels() : 0);
}

torch::Tensor ContentEncoderImpl::forward(const torch::Tensor& image, const torch::Tensor& onehot) {
  check_image_batch(image, 3, "ContentEncoder image");
  auto from_image = image_branch_->forward(image);
  if (!label_branch_) return from_image;
  check_image_batch(onehot, num_classes_, "ContentEncoder label");
  if (onehot.size(0) != image.size(0) || onehot.size(2) != image.size(2) || onehot.size(3) != image.size(3)) {
    throw ShapeError("ContentEncoder: image and one-hot label sizes differ");
  }
  return torch::cat({from_image, label_branch_->forward(onehot)}, 1);
}

StyleEncoderImpl::StyleEncoderImpl(const EncoderOptions& options) {
  branch_ = register_module("branch", EncoderBranch(3, options, Norm::None));
}

torch::Tensor StyleEncoderImpl::forward(const torch::Tensor& image) {
  check_image_batch(image, 3, "StyleEncoder");
  return branch_->forward(image);
}

}  // namespace shunit
