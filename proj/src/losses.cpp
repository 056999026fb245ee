#include "shunit/losses.hpp"

#include <cmath>
#include <string>

#include "shunit/errors.hpp"

namespace F = torch::nn::functional;

namespace shunit {

void LossWeights::validate() const {
  for (double w : {self, cycle, perc, adv, content, style}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and >= 0");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive temperature tau must be > 0");
}

Reduction parse_reduction(std::string_view name) {
  if (name == "sum") return Reduction::Sum;
  if (name == "mean") return Reduction::Mean;
  throw std::invalid_argument("unknown reduction '" + std::string(name) + "' (expected sum or mean)");
}

std::string_view reduction_name(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

ContrastiveMode parse_contrastive_mode(std::string_view name) {
  if (name == "contrastive") return ContrastiveMode::Contrastive;
  if (name == "l1") return ContrastiveMode::L1;
  throw std::invalid_argument("unknown contrastive mode '" + std::string(name) + "' (expected contrastive or l1)");
}

std::string_view contrastive_mode_name(ContrastiveMode m) { return m == ContrastiveMode::Contrastive ? "contrastive" : "l1"; }

namespace {

// [B, C, h, w] -> [B, hw, C]
torch::Tensor pixel_rows(const torch::Tensor& x) { return x.flatten(2).transpose(1, 2); }

// Per-pixel losses [B, P] with a uniform sample of `k` negatives per anchor.
torch::Tensor sampled_nce(const torch::Tensor& a, const torch::Tensor& q, double tau, int64_t k) {
  const int64_t b = a.size(0);
  const int64_t p = a.size(1);
  const int64_t chunk = 256;
  std::vector<torch::Tensor> rows;
  for (int64_t start = 0; start < p; start += chunk) {
    const int64_t len = std::min(chunk, p - start);
    const auto qi = q.narrow(1, start, len);                                     // [B, len, C]
    const auto self_idx = torch::arange(start, start + len, torch::kInt64).view({1, len, 1});
    auto neg = torch::randint(0, p - 1, {b, len, k}, torch::kInt64);
    neg = neg + (neg >= self_idx).to(torch::kInt64);                             // skip j == i
    const auto full = torch::bmm(qi, a.transpose(1, 2)) / tau;                   // [B, len, P]
    const auto pos = full.gather(2, self_idx.expand({b, len, 1}));
    const auto negs = full.gather(2, neg);
    const auto logits = torch::cat({pos, negs}, 2);
    rows.push_back(-torch::log_softmax(logits, 2).select(2, 0));
  }
  return torch::cat(rows, 1);
}

}  // namespace

torch::Tensor info_nce(const torch::Tensor& anchors, const torch::Tensor& positives, const ContrastiveOptions& options) {
  if (!(options.tau > 0.0)) throw std::invalid_argument("info_nce: tau must be > 0");
  if (!anchors.sizes().equals(positives.sizes())) throw ShapeError("info_nce: anchors and positives differ in shape");
  if (anchors.dim() != 3 && anchors.dim() != 4) throw ShapeError("info_nce: expected [C, h, w] or [B, C, h, w]");
  const auto a4 = anchors.dim() == 3 ? anchors.unsqueeze(0) : anchors;
  const auto q4 = positives.dim() == 3 ? positives.unsqueeze(0) : positives;
  if (a4.size(2) * a4.size(3) < 1) throw ShapeError("info_nce: need at least one pixel");

  auto a = pixel_rows(a4);
  auto q = pixel_rows(q4);
  if (options.normalize) {
    a = a / a.norm(2, -1, true).clamp_min(1e-12);
    q = q / q.norm(2, -1, true).clamp_min(1e-12);
  }
  const int64_t p = a.size(1);

  torch::Tensor per_pixel;  // [B, P]
  if (p > options.max_negatives) {
    per_pixel = sampled_nce(a, q, options.tau, options.max_negatives);
  } else {
    // logits[b, i, j] = q_i . a_j / tau; the positive for row i is column i.
    const auto logits = torch::bmm(q, a.transpose(1, 2)) / options.tau;
    per_pixel = -torch::log_softmax(logits, 2).diagonal(0, 1, 2);
  }
  const auto per_sample = options.reduction == Reduction::Sum ? per_pixel.sum(1) : per_pixel.mean(1);
  return per_sample.mean();
}

torch::Tensor content_contrastive(const torch::Tensor& source_content, const torch::Tensor& translated_content,
                                  const ContrastiveOptions& options) {
  return info_nce(source_content, translated_content, options);
}

torch::Tensor style_contrastive(const torch::Tensor& component_style, const torch::Tensor& memory_style,
                                const ContrastiveOptions& options) {
  return info_nce(component_style, memory_style, options);
}

torch::Tensor reconstruction_l1(const torch::Tensor& a, const torch::Tensor& b) {
  if (!a.sizes().equals(b.sizes())) throw ShapeError("reconstruction_l1: shapes differ");
  return (a - b).abs().mean();
}

torch::Tensor adversarial_loss(const std::vector<torch::Tensor>& real_logits,
                               const std::vector<torch::Tensor>& fake_logits, AdversarialSide side,
                               bool non_saturating) {
  if (fake_logits.empty()) throw std::invalid_argument("adversarial_loss: no logit maps");
  if (side == AdversarialSide::Discriminator && real_logits.size() != fake_logits.size()) {
    throw std::invalid_argument("adversarial_loss: real and fake scale counts differ");
  }
  torch::Tensor total;
  for (size_t s = 0; s < fake_logits.size(); ++s) {
    torch::Tensor term;
    if (side == AdversarialSide::Discriminator) {
      // -log sigmoid(r) = softplus(-r); -log(1 - sigmoid(f)) = softplus(f)
      term = F::softplus(-real_logits[s]).mean() + F::softplus(fake_logits[s]).mean();
    } else if (non_saturating) {
      term = F::softplus(-fake_logits[s]).mean();
    } else {
      term = -F::softplus(fake_logits[s]).mean();
    }
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(fake_logits.size());
}

double LossReport::term(std::string_view name) const {
  for (const auto& [key, value] : terms) {
    if (key == name) return value;
  }
  throw std::out_of_range("LossReport: no term named " + std::string(name));
}

std::vector<std::pair<std::string, double>> LossReport::rows() const {
  auto out = terms;
  out.emplace_back("g_total", generator_total);
  out.emplace_back("d_adv", discriminator);
  return out;
}

LossReport total_loss(const std::vector<double>& terms, const LossWeights& weights) {
  const auto& names = generator_term_names();
  if (terms.size() != names.size()) throw std::invalid_argument("total_loss: expected six terms");
  const double lambdas[] = {weights.self, weights.cycle, weights.perc, weights.adv, weights.content, weights.style};
  LossReport report;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (!std::isfinite(terms[i])) throw NumericalError("non-finite loss term '" + names[i] + "'");
    report.terms.emplace_back(names[i], terms[i]);
    report.generator_total += lambdas[i] * terms[i];
  }
  return report;
}

}  // namespace shunit
