#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace shunit {

// Weights of the joint objective; defaults are the published settings.
struct LossWeights {
  double self = 10.0;
  double cycle = 10.0;
  double perc = 1.0;
  double adv = 1.0;
  double content = 10.0;
  double style = 10.0;
  double tau = 0.7;

  void validate() const;
};

enum class Reduction { Sum, Mean };
// Contrastive: InfoNCE terms. L1: mean absolute difference on the same pairs.
enum class ContrastiveMode { Contrastive, L1 };

Reduction parse_reduction(std::string_view name);
std::string_view reduction_name(Reduction r);
ContrastiveMode parse_contrastive_mode(std::string_view name);
std::string_view contrastive_mode_name(ContrastiveMode m);

struct ContrastiveOptions {
  double tau = 0.7;
  bool normalize = true;
  // Sum over pixels as written in the objective, or the mean (keeps weights
  // resolution-independent; the trainer default).
  Reduction reduction = Reduction::Sum;
  // Above this many pixels each anchor sees a uniform sample of negatives.
  int64_t max_negatives = 4096;
};

// Pixel-wise InfoNCE. Anchors and positives are [C, h, w] (or [B, C, h, w],
// averaged over the batch). For pixel i:
//   -log( exp(a_i . p_i / tau) / sum_j exp(a_j . p_i / tau) ),
// with every other anchor pixel j != i acting as a negative.
torch::Tensor info_nce(const torch::Tensor& anchors, const torch::Tensor& positives, const ContrastiveOptions& options);

// Content contrastive loss: anchors are the source content, positives the
// content re-encoded from the translation (same pixel = positive).
torch::Tensor content_contrastive(const torch::Tensor& source_content, const torch::Tensor& translated_content,
                                  const ContrastiveOptions& options);

// Style contrastive loss: anchors are component styles, positives the memory
// styles read back for the same pixels. Gradients reach the memory bank.
torch::Tensor style_contrastive(const torch::Tensor& component_style, const torch::Tensor& memory_style,
                                const ContrastiveOptions& options);

// Mean absolute difference.
torch::Tensor reconstruction_l1(const torch::Tensor& a, const torch::Tensor& b);

enum class AdversarialSide { Generator, Discriminator };

// Log-sigmoid form of the vanilla GAN objective, averaged over patches and
// then over scales.
//   Discriminator: -[log D(real) + log(1 - D(fake))]  (minimized)
//   Generator, non-saturating: -log D(fake)
//   Generator, saturating:      log(1 - D(fake))
torch::Tensor adversarial_loss(const std::vector<torch::Tensor>& real_logits,
                               const std::vector<torch::Tensor>& fake_logits, AdversarialSide side,
                               bool non_saturating = true);

// Itemized losses of one training iteration.
struct LossReport {
  // Generator-step terms in fixed order: self, cycle, perc, adv, content, style.
  std::vector<std::pair<std::string, double>> terms;
  double generator_total = 0.0;
  double discriminator = 0.0;
  // Diagnostics (not part of the objective).
  double memory_key_grad_norm = 0.0;
  double memory_value_grad_norm = 0.0;

  double term(std::string_view name) const;
  // Rows written to the training log: every term, g_total, d_adv.
  std::vector<std::pair<std::string, double>> rows() const;
};

inline const std::vector<std::string>& generator_term_names() {
  static const std::vector<std::string> names{"self", "cycle", "perc", "adv", "content", "style"};
  return names;
}

// Weighted sum; `terms` are in generator_term_names() order. Throws
// NumericalError naming the first non-finite term.
LossReport total_loss(const std::vector<double>& terms, const LossWeights& weights);

}  // namespace shunit
