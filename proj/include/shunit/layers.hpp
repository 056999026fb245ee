#pragma once

#include <cstdint>
#include <string_view>

#include <torch/torch.h>

namespace shunit {

enum class PadType { Reflect, Zero };
enum class Norm { None, Instance };
enum class Activation { None, ReLU, LeakyReLU, Tanh };

PadType parse_pad_type(std::string_view name);
std::string_view pad_type_name(PadType pad);

inline constexpr double kInstanceNormEps = 1e-5;

struct ConvBlockOptions {
  ConvBlockOptions(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = 0)
      : in_channels_(in), out_channels_(out), kernel_size_(kernel), stride_(stride), padding_(padding) {}

  TORCH_ARG(int64_t, in_channels);
  TORCH_ARG(int64_t, out_channels);
  TORCH_ARG(int64_t, kernel_size);
  TORCH_ARG(int64_t, stride);
  TORCH_ARG(int64_t, padding);
  TORCH_ARG(Norm, norm) = Norm::None;
  TORCH_ARG(Activation, activation) = Activation::None;
  TORCH_ARG(PadType, pad_type) = PadType::Reflect;
  TORCH_ARG(double, leaky_slope) = 0.2;
};

// pad -> conv -> [instance norm] -> [activation], the Conv(in, out, k, s, p, norm, act)
// unit used throughout the encoders and generator head.
class ConvBlockImpl : public torch::nn::Module {
 public:
  explicit ConvBlockImpl(const ConvBlockOptions& options);

  torch::Tensor forward(const torch::Tensor& x);

  const ConvBlockOptions& options() const { return options_; }
  torch::nn::Conv2d& conv() { return conv_; }

 private:
  ConvBlockOptions options_;
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(ConvBlock);

// x + Conv3x3(Conv3x3(x)); the first conv has ReLU, both share `norm`.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t channels, Norm norm, PadType pad);

  torch::Tensor forward(const torch::Tensor& x);

 private:
  ConvBlock first_{nullptr};
  ConvBlock second_{nullptr};
};
TORCH_MODULE(ResBlock);

// Non-affine instance normalization with population variance, eps inside the sqrt.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = kInstanceNormEps);

// normal(0, std) on every conv weight, zero biases.
void init_conv_normal(torch::nn::Module& module, double std = 0.02);

double grad_norm(const torch::Tensor& param);
double grad_norm(const std::vector<torch::Tensor>& params);

}  // namespace shunit
