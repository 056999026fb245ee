#include "shunit/layers.hpp"

#include <string>

namespace F = torch::nn::functional;

namespace shunit {

PadType parse_pad_type(std::string_view name) {
  if (name == "reflect") return PadType::Reflect;
  if (name == "zero") return PadType::Zero;
  throw std::invalid_argument("unknown padding '" + std::string(name) + "' (expected reflect or zero)");
}

std::string_view pad_type_name(PadType pad) { return pad == PadType::Reflect ? "reflect" : "zero"; }

ConvBlockImpl::ConvBlockImpl(const ConvBlockOptions& options) : options_(options) {
  const bool reflect = options_.pad_type() == PadType::Reflect;
  conv_ = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(options_.in_channels(), options_.out_channels(),
                                                         options_.kernel_size())
                                    .stride(options_.stride())
                                    .padding(reflect ? 0 : options_.padding())));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
  auto out = x;
  if (options_.pad_type() == PadType::Reflect && options_.padding() > 0) {
    const auto p = options_.padding();
    out = F::pad(out, F::PadFuncOptions({p, p, p, p}).mode(torch::kReflect));
  }
  out = conv_->forward(out);
  if (options_.norm() == Norm::Instance) out = instance_norm(out);
  switch (options_.activation()) {
    case Activation::ReLU:
      return torch::relu(out);
    case Activation::LeakyReLU:
      return F::leaky_relu(out, F::LeakyReLUFuncOptions().negative_slope(options_.leaky_slope()));
    case Activation::Tanh:
      return torch::tanh(out);
    case Activation::None:
      break;
  }
  return out;
}

ResBlockImpl::ResBlockImpl(int64_t channels, Norm norm, PadType pad) {
  first_ = register_module(
      "conv1", ConvBlock(ConvBlockOptions(channels, channels, 3, 1, 1).norm(norm).activation(Activation::ReLU).pad_type(pad)));
  second_ = register_module("conv2", ConvBlock(ConvBlockOptions(channels, channels, 3, 1, 1).norm(norm).pad_type(pad)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) { return x + second_->forward(first_->forward(x)); }

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  return F::instance_norm(x, F::InstanceNormFuncOptions().eps(eps));
}

void init_conv_normal(torch::nn::Module& module, double std) {
  torch::NoGradGuard no_grad;
  auto reset = [std](torch::nn::Module& m) {
    if (auto* conv = m.as<torch::nn::Conv2dImpl>()) {
      conv->weight.normal_(0.0, std);
      if (conv->bias.defined()) conv->bias.zero_();
    }
  };
  reset(module);
  for (auto& child : module.modules(/*include_self=*/false)) reset(*child);
}

double grad_norm(const torch::Tensor& param) {
  if (!param.grad().defined()) return 0.0;
  return param.grad().norm().item<double>();
}

double grad_norm(const std::vector<torch::Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    const double n = grad_norm(p);
    sq += n * n;
  }
  return std::sqrt(sq);
}

}  // namespace shunit
