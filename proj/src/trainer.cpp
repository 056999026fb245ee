#include "shunit/trainer.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "shunit/checkpoint.hpp"
#include "shunit/errors.hpp"

namespace shunit {

namespace {

// Turns off requires_grad on `params` for the scope's lifetime.
class FreezeScope {
 public:
  explicit FreezeScope(std::vector<torch::Tensor> params) : params_(std::move(params)) {
    for (auto& p : params_) {
      was_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~FreezeScope() {
    for (size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(was_[i]);
  }
  FreezeScope(const FreezeScope&) = delete;
  FreezeScope& operator=(const FreezeScope&) = delete;

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> was_;
};

torch::Tensor zero_term() { return torch::zeros({}); }

torch::optim::AdamOptions adam_options(const TrainConfig& t) {
  return torch::optim::AdamOptions(t.lr).betas({t.beta1, t.beta2}).weight_decay(t.weight_decay);
}

}  // namespace

torch::Tensor GeneratorLosses::weighted_total(const LossWeights& w) const {
  const double lambdas[] = {w.self, w.cycle, w.perc, w.adv, w.content, w.style};
  const auto terms = in_order();
  torch::Tensor total = torch::zeros({});
  for (size_t i = 0; i < terms.size(); ++i) {
    if (lambdas[i] > 0.0) total = total + lambdas[i] * terms[i];
  }
  return total;
}

Trainer::Trainer(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  torch::manual_seed(config_.train.seed);
  model_ = ShunitModel(config_.model);
  opt_g_ = std::make_unique<torch::optim::Adam>(model_->generator_parameters(), adam_options(config_.train));
  opt_d_ = std::make_unique<torch::optim::Adam>(model_->discriminator_parameters(), adam_options(config_.train));
  std::seed_seq seq{config_.train.seed, uint64_t{0x5eed}};
  rng_.seed(seq);
}

void Trainer::check_batch(const Batch& b, const char* which) const {
  if (!b.images.defined() || b.images.dim() != 4 || b.images.size(1) != 3) {
    throw ShapeError(std::string(which) + " batch: images must be [B, 3, H, W]");
  }
  if (!b.masks.defined() || b.masks.dim() != 3 || b.masks.size(0) != b.images.size(0) ||
      b.masks.size(1) != b.images.size(2) || b.masks.size(2) != b.images.size(3)) {
    throw ShapeError(std::string(which) + " batch: masks must be [B, H, W] matching the images");
  }
  if (b.images.size(2) % kFeatureStride != 0 || b.images.size(3) % kFeatureStride != 0) {
    throw ShapeError(std::string(which) + " batch: H and W must be divisible by 4");
  }
  if (b.masks.numel() > 0 && (b.masks.min().item<int64_t>() < 0 ||
                              b.masks.max().item<int64_t>() >= config_.model.num_classes)) {
    throw DataError(std::string(which) + " batch: class index out of range");
  }
}

GeneratorLosses Trainer::generator_losses(const Batch& x, const Batch& y) {
  auto& m = *model_;
  const auto w = config_.loss.effective_weights();
  const auto copts = config_.loss.contrastive();
  const bool l1_mode = config_.loss.mode == ContrastiveMode::L1;
  const int64_t n = config_.model.num_classes;

  const auto& ix = x.images;
  const auto& iy = y.images;
  const auto mx = downsample_masks(x.masks, kFeatureStride);
  const auto my = downsample_masks(y.masks, kFeatureStride);
  const auto ohx = one_hot(x.masks, n, ix.scalar_type());
  const auto ohy = one_hot(y.masks, n, iy.scalar_type());

  const auto cx = m.content_encoder(Domain::X)->forward(ix, ohx);
  const auto sx = m.style_encoder(Domain::X)->forward(ix);
  const auto cy = m.content_encoder(Domain::Y)->forward(iy, ohy);
  const auto sy = m.style_encoder(Domain::Y)->forward(iy);

  GeneratorLosses out;
  out.self = zero_term();
  if (w.self > 0.0) {
    const auto rec_x = m.generator(Domain::X)->forward(cx, sx, m.memory(Domain::X)->read(cx, mx).memory_style, mx);
    const auto rec_y = m.generator(Domain::Y)->forward(cy, sy, m.memory(Domain::Y)->read(cy, my).memory_style, my);
    out.self = reconstruction_l1(ix, rec_x) + reconstruction_l1(iy, rec_y);
  }

  // X -> Y and Y -> X translations.
  const auto fake_y = m.generator(Domain::Y)->forward(cx, sx, m.memory(Domain::Y)->read(cx, mx).memory_style, mx);
  const auto fake_x = m.generator(Domain::X)->forward(cy, sy, m.memory(Domain::X)->read(cy, my).memory_style, my);

  // Re-encode the translations with the target-domain encoders.
  const auto chat_y = m.content_encoder(Domain::Y)->forward(fake_y, ohx);
  const auto comp_y = m.style_encoder(Domain::Y)->forward(fake_y);
  const auto chat_x = m.content_encoder(Domain::X)->forward(fake_x, ohy);
  const auto comp_x = m.style_encoder(Domain::X)->forward(fake_x);

  // Memory styles of the way back, read from the source banks.
  const auto back_x = m.memory(Domain::X)->read(chat_y, mx).memory_style;
  const auto back_y = m.memory(Domain::Y)->read(chat_x, my).memory_style;

  out.cycle = zero_term();
  if (w.cycle > 0.0) {
    const auto cyc_x = m.generator(Domain::X)->forward(chat_y, comp_y, back_x, mx);
    const auto cyc_y = m.generator(Domain::Y)->forward(chat_x, comp_x, back_y, my);
    out.cycle = reconstruction_l1(ix, cyc_x) + reconstruction_l1(iy, cyc_y);
  }

  out.perc = zero_term();
  if (w.perc > 0.0) {
    auto& f = m.perceptual();
    out.perc = reconstruction_l1(f->forward(ix), f->forward(fake_y)) + reconstruction_l1(f->forward(iy), f->forward(fake_x));
  }

  out.adv = zero_term();
  if (w.adv > 0.0) {
    const bool ns = config_.loss.non_saturating;
    out.adv = adversarial_loss({}, m.discriminator(Domain::Y)->forward(fake_y), AdversarialSide::Generator, ns) +
              adversarial_loss({}, m.discriminator(Domain::X)->forward(fake_x), AdversarialSide::Generator, ns);
  }

  out.content = zero_term();
  if (w.content > 0.0) {
    out.content = l1_mode ? reconstruction_l1(cx, chat_y) + reconstruction_l1(cy, chat_x)
                          : content_contrastive(cx, chat_y, copts) + content_contrastive(cy, chat_x, copts);
  }

  out.style = zero_term();
  if (w.style > 0.0) {
    out.style = l1_mode ? reconstruction_l1(sx, back_x) + reconstruction_l1(sy, back_y)
                        : style_contrastive(sx, back_x, copts) + style_contrastive(sy, back_y, copts);
  }
  return out;
}

torch::Tensor Trainer::discriminator_loss(const Batch& x, const Batch& y) {
  auto& m = *model_;
  torch::Tensor fake_x;
  torch::Tensor fake_y;
  {
    torch::NoGradGuard no_grad;
    fake_y = m.translate(x.images, x.masks, Domain::X);
    fake_x = m.translate(y.images, y.masks, Domain::Y);
  }
  auto& dx = m.discriminator(Domain::X);
  auto& dy = m.discriminator(Domain::Y);
  return adversarial_loss(dx->forward(x.images), dx->forward(fake_x), AdversarialSide::Discriminator) +
         adversarial_loss(dy->forward(y.images), dy->forward(fake_y), AdversarialSide::Discriminator);
}

LossReport Trainer::train_step(const Batch& x, const Batch& y) {
  check_batch(x, "X");
  check_batch(y, "Y");
  const auto where = [this] { return " at iteration " + std::to_string(iteration_); };

  // Discriminator update; generator side untouched.
  opt_d_->zero_grad();
  const auto d_loss = discriminator_loss(x, y);
  const double d_value = d_loss.item<double>();
  if (!std::isfinite(d_value)) throw NumericalError("non-finite loss term 'd_adv'" + where());
  d_loss.backward();
  if (config_.train.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(model_->discriminator_parameters(), config_.train.grad_clip);
  }
  opt_d_->step();

  // Generator update (encoders, memories, generators, alphas) with frozen discriminators.
  opt_g_->zero_grad();
  LossReport report;
  {
    FreezeScope freeze(model_->discriminator_parameters());
    const auto losses = generator_losses(x, y);
    std::vector<double> values;
    for (const auto& t : losses.in_order()) values.push_back(t.item<double>());
    try {
      report = total_loss(values, config_.loss.effective_weights());
    } catch (const NumericalError& e) {
      throw NumericalError(e.what() + where());
    }
    const auto total = losses.weighted_total(config_.loss.effective_weights());
    if (total.requires_grad()) total.backward();
  }
  report.discriminator = d_value;
  auto& mem_x = model_->memory(Domain::X);
  auto& mem_y = model_->memory(Domain::Y);
  report.memory_key_grad_norm = grad_norm(std::vector<torch::Tensor>{mem_x->keys(), mem_y->keys()});
  report.memory_value_grad_norm = grad_norm(std::vector<torch::Tensor>{mem_x->values(), mem_y->values()});
  if (config_.train.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(model_->generator_parameters(), config_.train.grad_clip);
  }
  opt_g_->step();

  if (config_.model.memory_mode == MemoryMode::Update) {
    torch::NoGradGuard no_grad;
    for (const auto& [batch, d] : {std::pair{&x, Domain::X}, std::pair{&y, Domain::Y}}) {
      const auto content = model_->content_encoder(d)->forward(
          batch->images, one_hot(batch->masks, config_.model.num_classes, batch->images.scalar_type()));
      const auto style = model_->style_encoder(d)->forward(batch->images);
      model_->memory(d)->legacy_update(content, style, downsample_masks(batch->masks, kFeatureStride),
                                       config_.train.update_rate);
    }
  }
  ++iteration_;
  return report;
}

std::pair<Batch, Batch> Trainer::sample_batches(std::span<const DomainSample> xs, std::span<const DomainSample> ys) {
  if (xs.empty() || ys.empty()) throw DataError("training needs at least one sample per domain");
  auto draw = [this](std::span<const DomainSample> pool) {
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    std::vector<const DomainSample*> chosen;
    for (int64_t i = 0; i < config_.train.batch_size; ++i) chosen.push_back(&pool[pick(rng_)]);
    return collate(std::span<const DomainSample* const>(chosen));
  };
  auto bx = draw(xs);
  auto by = draw(ys);
  return {std::move(bx), std::move(by)};
}

LossReport Trainer::step(std::span<const DomainSample> xs, std::span<const DomainSample> ys) {
  auto [bx, by] = sample_batches(xs, ys);
  return train_step(bx, by);
}

torch::Tensor Trainer::translate(const Batch& batch, Domain source) {
  check_batch(batch, source == Domain::X ? "X" : "Y");
  torch::NoGradGuard no_grad;
  return model_->translate(batch.images, batch.masks, source);
}

torch::Tensor Trainer::translate(const DomainSample& sample) {
  const DomainSample* one[] = {&sample};
  return translate(collate(std::span<const DomainSample* const>(one)), sample.domain).squeeze(0);
}

std::vector<std::pair<std::string, torch::Tensor>> Trainer::optimizer_arrays() {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& [prefix, opt] : {std::pair{"optim.gen.", opt_g_.get()}, std::pair{"optim.disc.", opt_d_.get()}}) {
    auto& state = opt->state();
    for (const auto& [name, tensor] : model_->named_state()) {
      auto it = state.find(tensor.unsafeGetTensorImpl());
      if (it == state.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      out.emplace_back(prefix + name + ".exp_avg", s.exp_avg());
      out.emplace_back(prefix + name + ".exp_avg_sq", s.exp_avg_sq());
      out.emplace_back(prefix + name + ".step", torch::tensor(s.step(), torch::kInt64));
    }
  }
  return out;
}

void Trainer::save(const std::filesystem::path& path) {
  CheckpointContents c;
  c.config_text = config_.to_text();
  c.iteration = iteration_;
  std::ostringstream rng;
  rng << rng_;
  c.rng_state = rng.str();
  c.arrays = model_->named_state();
  auto optim = optimizer_arrays();
  c.arrays.insert(c.arrays.end(), optim.begin(), optim.end());
  write_checkpoint(path, c);
}

Trainer Trainer::load(const std::filesystem::path& path) {
  const auto c = read_checkpoint(path);
  RunConfig config;
  try {
    config = RunConfig::parse(c.config_text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  Trainer t(config);

  std::set<std::string> used;
  torch::NoGradGuard no_grad;
  for (auto& [name, tensor] : t.model_->named_state()) {
    const auto* stored = c.find(name);
    if (!stored) throw CheckpointError("checkpoint is missing array " + name);
    if (!stored->sizes().equals(tensor.sizes()) || stored->scalar_type() != tensor.scalar_type()) {
      throw CheckpointError("checkpoint array " + name + " has the wrong shape or dtype");
    }
    tensor.copy_(*stored);
    used.insert(name);
  }

  for (const auto& [prefix, opt] : {std::pair{std::string("optim.gen."), t.opt_g_.get()},
                                    std::pair{std::string("optim.disc."), t.opt_d_.get()}}) {
    std::set<void*> owned;
    for (const auto& group : opt->param_groups()) {
      for (const auto& p : group.params()) owned.insert(p.unsafeGetTensorImpl());
    }
    for (auto& [name, tensor] : t.model_->named_state()) {
      const auto* avg = c.find(prefix + name + ".exp_avg");
      if (!avg) continue;
      const auto* avg_sq = c.find(prefix + name + ".exp_avg_sq");
      const auto* step = c.find(prefix + name + ".step");
      if (!avg_sq || !step || !owned.contains(tensor.unsafeGetTensorImpl()) || !avg->sizes().equals(tensor.sizes())) {
        throw CheckpointError("checkpoint optimizer state for " + name + " is inconsistent");
      }
      auto s = std::make_unique<torch::optim::AdamParamState>();
      s->step(step->item<int64_t>());
      s->exp_avg(avg->clone());
      s->exp_avg_sq(avg_sq->clone());
      opt->state()[tensor.unsafeGetTensorImpl()] = std::move(s);
      used.insert(prefix + name + ".exp_avg");
      used.insert(prefix + name + ".exp_avg_sq");
      used.insert(prefix + name + ".step");
    }
  }
  for (const auto& [name, tensor] : c.arrays) {
    if (!used.contains(name)) throw CheckpointError("checkpoint has unexpected array " + name);
  }

  std::istringstream rng(c.rng_state);
  rng >> t.rng_;
  if (!rng) throw CheckpointError("checkpoint RNG state is corrupt");
  t.iteration_ = c.iteration;
  return t;
}

}  // namespace shunit
