#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>

#include <torch/torch.h>

#include "shunit/config.hpp"
#include "shunit/data.hpp"
#include "shunit/losses.hpp"
#include "shunit/model.hpp"

namespace shunit {

// Scalar loss tensors of one generator forward pass (both directions summed).
// A disabled term (weight 0) is an undifferentiable zero.
struct GeneratorLosses {
  torch::Tensor self;
  torch::Tensor cycle;
  torch::Tensor perc;
  torch::Tensor adv;
  torch::Tensor content;
  torch::Tensor style;

  std::vector<torch::Tensor> in_order() const { return {self, cycle, perc, adv, content, style}; }
  torch::Tensor weighted_total(const LossWeights& w) const;
};

// Dual-direction training state: model, two Adam optimizers (generator side:
// encoders, memories, generators, alphas; discriminator side: both
// discriminators), the batch-sampling RNG and the iteration counter.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  // One discriminator update followed by one generator update. Throws
  // NumericalError naming the term and iteration on a non-finite loss.
  LossReport train_step(const Batch& x, const Batch& y);

  // Draws batch_size samples (with replacement) per domain, then train_step.
  LossReport step(std::span<const DomainSample> xs, std::span<const DomainSample> ys);
  std::pair<Batch, Batch> sample_batches(std::span<const DomainSample> xs, std::span<const DomainSample> ys);

  GeneratorLosses generator_losses(const Batch& x, const Batch& y);
  torch::Tensor discriminator_loss(const Batch& x, const Batch& y);

  // Inference on one sample; no parameter changes.
  torch::Tensor translate(const DomainSample& sample);
  torch::Tensor translate(const Batch& batch, Domain source);

  void save(const std::filesystem::path& path);
  static Trainer load(const std::filesystem::path& path);

  ShunitModel& model() { return model_; }
  const RunConfig& config() const { return config_; }
  int64_t iteration() const { return iteration_; }
  torch::optim::Adam& generator_optimizer() { return *opt_g_; }
  torch::optim::Adam& discriminator_optimizer() { return *opt_d_; }

 private:
  void check_batch(const Batch& b, const char* which) const;
  std::vector<std::pair<std::string, torch::Tensor>> optimizer_arrays();

  RunConfig config_;
  ShunitModel model_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::mt19937_64 rng_;
  int64_t iteration_ = 0;
};

}  // namespace shunit
