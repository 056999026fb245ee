#include "shunit/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <string>

#include "shunit/errors.hpp"

namespace F = torch::nn::functional;

namespace shunit {

GeneratorImpl::GeneratorImpl(const GeneratorOptions& o) : options_(o) {
  HarmonizationOptions shl_opts;
  shl_opts.feature_channels = o.feature_channels;
  shl_opts.component_channels = o.component_channels;
  shl_opts.memory_channels = o.memory_channels;
  shl_opts.hidden = o.shl_hidden;
  shl_opts.num_classes = o.num_classes;
  shl_opts.pad = o.pad;

  for (int64_t b = 0; b < o.blocks; ++b) {
    auto first = StyleHarmonization(shl_opts);
    auto second = StyleHarmonization(shl_opts);
    shl_.push_back(register_module("shl" + std::to_string(2 * b), first));
    shl_.push_back(register_module("shl" + std::to_string(2 * b + 1), second));
    blocks_.push_back(register_module("block" + std::to_string(b), SHResBlock(o.feature_channels, first, second, o.pad)));
  }

  torch::nn::Sequential head;
  const auto up = torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest);
  head->push_back(torch::nn::Upsample(up));
  head->push_back(ConvBlock(ConvBlockOptions(o.feature_channels, o.head_width1, 5, 1, 2)
                                .norm(Norm::Instance).activation(Activation::ReLU).pad_type(o.pad)));
  head->push_back(torch::nn::Upsample(up));
  head->push_back(ConvBlock(ConvBlockOptions(o.head_width1, o.head_width2, 5, 1, 2)
                                .norm(Norm::Instance).activation(Activation::ReLU).pad_type(o.pad)));
  head->push_back(ConvBlock(ConvBlockOptions(o.head_width2, 3, 7, 1, 3).activation(Activation::Tanh).pad_type(o.pad)));
  head_ = register_module("head", head);
  init_conv_normal(*head_);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& content, const torch::Tensor& comp,
                                     const torch::Tensor& mem, const torch::Tensor& mask) {
  if (content.dim() != 4 || content.size(1) != options_.feature_channels) {
    throw ShapeError("Generator: content must be [B, " + std::to_string(options_.feature_channels) + ", h, w]");
  }
  auto f = content;
  for (auto& block : blocks_) f = block->forward(f, comp, mem, mask);
  return head_->forward(f);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int64_t in_channels, int64_t base) {
  torch::nn::Sequential seq;
  int64_t c = in_channels;
  for (int64_t i = 0; i < 3; ++i) {
    const int64_t next = base << i;
    seq->push_back(ConvBlock(ConvBlockOptions(c, next, 4, 2, 1).activation(Activation::LeakyReLU).pad_type(PadType::Zero)));
    c = next;
  }
  seq->push_back(ConvBlock(ConvBlockOptions(c, 1, 4, 2, 1).pad_type(PadType::Zero)));
  layers_ = register_module("layers", seq);
  init_conv_normal(*this);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& image) { return layers_->forward(image); }

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(const DiscriminatorOptions& o) {
  if (o.scales < 1) throw std::invalid_argument("MultiScaleDiscriminator: need at least one scale");
  for (int64_t s = 0; s < o.scales; ++s) {
    scales_.push_back(register_module("scale" + std::to_string(s), PatchDiscriminator(o.in_channels, o.base_width)));
  }
}

std::vector<torch::Tensor> MultiScaleDiscriminatorImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4) throw ShapeError("MultiScaleDiscriminator: expected [B, C, H, W]");
  std::vector<torch::Tensor> out;
  out.reserve(scales_.size());
  auto x = image;
  for (size_t s = 0; s < scales_.size(); ++s) {
    if (x.size(2) < kDiscriminatorMinSize || x.size(3) < kDiscriminatorMinSize) {
      throw ShapeError("MultiScaleDiscriminator: scale " + std::to_string(s) + " input " +
                       std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) + " is below the " +
                       std::to_string(kDiscriminatorMinSize) + " px receptive floor");
    }
    out.push_back(scales_[s]->forward(x));
    if (s + 1 < scales_.size()) {
      x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(3).stride(2).padding(1).count_include_pad(false));
    }
  }
  return out;
}

PerceptualVariant parse_perceptual_variant(std::string_view name) {
  if (name == "frozen-random" || name == "random") return PerceptualVariant::FrozenRandom;
  if (name == "pretrained-vgg16-relu5_3" || name == "vgg16") return PerceptualVariant::Vgg16Relu53;
  throw std::invalid_argument("unknown perceptual extractor '" + std::string(name) + "'");
}

std::string_view perceptual_variant_name(PerceptualVariant variant) {
  return variant == PerceptualVariant::FrozenRandom ? "frozen-random" : "pretrained-vgg16-relu5_3";
}

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

void push_vgg_stage(torch::nn::Sequential& seq, int64_t in, int64_t out, int convs, bool pool) {
  for (int i = 0; i < convs; ++i) {
    seq->push_back(conv3x3(i == 0 ? in : out, out));
    seq->push_back(torch::nn::ReLU());
  }
  if (pool) seq->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
}

}  // namespace

PerceptualExtractorImpl::PerceptualExtractorImpl(PerceptualVariant variant, uint64_t seed) : variant_(variant) {
  torch::nn::Sequential block1;
  torch::nn::Sequential rest;
  if (variant == PerceptualVariant::FrozenRandom) {
    block1->push_back(conv3x3(3, 16));
    block1->push_back(torch::nn::ReLU());
    block1->push_back(conv3x3(16, 16, 2));
    block1->push_back(torch::nn::ReLU());
    rest->push_back(conv3x3(16, 32));
    rest->push_back(torch::nn::ReLU());
    rest->push_back(conv3x3(32, 32, 2));
    rest->push_back(torch::nn::ReLU());
  } else {
    push_vgg_stage(block1, 3, 64, 2, true);
    push_vgg_stage(rest, 64, 128, 2, true);
    push_vgg_stage(rest, 128, 256, 3, true);
    push_vgg_stage(rest, 256, 512, 3, true);
    push_vgg_stage(rest, 512, 512, 3, false);  // ends at relu5_3
  }
  block1_ = register_module("block1", block1);
  rest_ = register_module("rest", rest);

  torch::NoGradGuard no_grad;
  auto gen = at::detail::createCPUGenerator(seed);
  for (auto& p : named_parameters()) {
    auto& t = p.value();
    if (t.dim() == 4) {
      const double fan_in = static_cast<double>(t.size(1) * t.size(2) * t.size(3));
      t.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
    } else {
      t.zero_();
    }
  }
  freeze();
}

std::shared_ptr<PerceptualExtractorImpl> PerceptualExtractorImpl::frozen_random(uint64_t seed) {
  return std::make_shared<PerceptualExtractorImpl>(PerceptualVariant::FrozenRandom, seed);
}

std::shared_ptr<PerceptualExtractorImpl> PerceptualExtractorImpl::vgg16(const std::filesystem::path& weights) {
  auto net = std::make_shared<PerceptualExtractorImpl>(PerceptualVariant::Vgg16Relu53, 0);
  if (!std::filesystem::exists(weights)) {
    throw std::invalid_argument("VGG-16 weights not found: " + weights.string());
  }
  torch::serialize::InputArchive archive;
  archive.load_from(weights.string());
  net->load(archive);
  net->freeze();
  return net;
}

void PerceptualExtractorImpl::freeze() {
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
}

int64_t PerceptualExtractorImpl::first_block_channels() const {
  return variant_ == PerceptualVariant::FrozenRandom ? 16 : 64;
}

torch::Tensor PerceptualExtractorImpl::prepare(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("PerceptualExtractor: expected [B, 3, H, W]");
  if (variant_ == PerceptualVariant::FrozenRandom) return images;
  const auto opts = images.options();
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
  const auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
  return ((images + 1.0) * 0.5 - mean) / std;
}

torch::Tensor PerceptualExtractorImpl::first_block(const torch::Tensor& images) {
  return block1_->forward(prepare(images));
}

torch::Tensor PerceptualExtractorImpl::forward(const torch::Tensor& images) {
  return rest_->forward(first_block(images));
}

}  // namespace shunit
