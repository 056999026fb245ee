#include "shunit/model.hpp"

#include <algorithm>
#include <cmath>

#include "shunit/errors.hpp"

namespace shunit {

namespace {

int64_t scaled(int64_t width, double factor) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::lround(static_cast<double>(width) * factor)));
}

}  // namespace

PerceptualExtractor make_perceptual(const ModelConfig& config) {
  if (config.perceptual == PerceptualVariant::Vgg16Relu53) {
    return PerceptualExtractor(PerceptualExtractorImpl::vgg16(config.perceptual_weights));
  }
  return PerceptualExtractor(PerceptualExtractorImpl::frozen_random(config.perceptual_seed));
}

ShunitModelImpl::ShunitModelImpl(const ModelConfig& config) : config_(config) {
  const double s = config.effective_width_scale();
  EncoderOptions enc_opts;
  enc_opts.pad = config.pad;
  enc_opts = enc_opts.scaled(s);

  auto enc = register_module("enc", Group());
  auto mem = register_module("memory", Group());
  auto gen = register_module("gen", Group());
  auto disc = register_module("disc", Group());

  for (Domain d : {Domain::X, Domain::Y}) {
    const auto i = index(d);
    const std::string name(domain_name(d));
    auto pair = enc->add(name, Group());
    content_[i] = pair->add("content", ContentEncoder(config.num_classes, enc_opts, config.use_label_input));
    style_[i] = pair->add("style", StyleEncoder(enc_opts));

    StyleMemoryOptions mem_opts;
    mem_opts.num_classes = config.num_classes;
    mem_opts.slots = config.slots;
    mem_opts.key_dim = content_[i]->out_channels();
    mem_opts.value_dim = style_[i]->out_channels();
    mem_opts.init_std = config.init_std;
    mem_opts.mode = config.memory_mode;
    memory_[i] = mem->add(name, StyleMemory(mem_opts));

    GeneratorOptions gen_opts;
    gen_opts.feature_channels = content_[i]->out_channels();
    gen_opts.component_channels = style_[i]->out_channels();
    gen_opts.memory_channels = style_[i]->out_channels();
    gen_opts.shl_hidden = scaled(128, s);
    gen_opts.head_width1 = scaled(128, s);
    gen_opts.head_width2 = scaled(64, s);
    gen_opts.num_classes = config.num_classes;
    gen_opts.pad = config.pad;
    gen_[i] = gen->add(name, Generator(gen_opts));

    DiscriminatorOptions disc_opts;
    disc_opts.base_width = scaled(64, s);
    disc_opts.scales = config.disc_scales;
    disc_[i] = disc->add(name, MultiScaleDiscriminator(disc_opts));
  }
  perc_ = register_module("perc", make_perceptual(config));
}

std::vector<torch::Tensor> ShunitModelImpl::generator_parameters() {
  std::vector<torch::Tensor> out;
  auto append = [&out](const std::vector<torch::Tensor>& ps) {
    for (const auto& p : ps) {
      if (p.requires_grad()) out.push_back(p);
    }
  };
  for (size_t i = 0; i < 2; ++i) {
    append(content_[i]->parameters());
    append(style_[i]->parameters());
    append(memory_[i]->parameters());
    append(gen_[i]->parameters());
  }
  return out;
}

std::vector<torch::Tensor> ShunitModelImpl::discriminator_parameters() {
  auto out = disc_[0]->parameters();
  auto y = disc_[1]->parameters();
  out.insert(out.end(), y.begin(), y.end());
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> ShunitModelImpl::named_state() {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : named_buffers()) out.emplace_back(b.key(), b.value());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

torch::Tensor ShunitModelImpl::translate(const torch::Tensor& images, const torch::Tensor& masks, Domain source) {
  if (images.dim() != 4 || masks.dim() != 3 || images.size(0) != masks.size(0) || images.size(2) != masks.size(1) ||
      images.size(3) != masks.size(2)) {
    throw ShapeError("translate: images must be [B, 3, H, W] with masks [B, H, W]");
  }
  if (masks.numel() > 0 && (masks.min().item<int64_t>() < 0 || masks.max().item<int64_t>() >= config_.num_classes)) {
    throw DataError("translate: mask contains a class index outside [0, " + std::to_string(config_.num_classes) + ")");
  }
  const auto target = other(source);
  const auto mask_ds = downsample_masks(masks, kFeatureStride);
  const auto content = content_encoder(source)->forward(images, one_hot(masks, config_.num_classes, images.scalar_type()));
  const auto comp = style_encoder(source)->forward(images);
  const auto mem = memory(target)->read(content, mask_ds).memory_style;
  return generator(target)->forward(content, comp, mem, mask_ds);
}

}  // namespace shunit
