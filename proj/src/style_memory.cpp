#include "shunit/style_memory.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "shunit/errors.hpp"

namespace shunit {

MemoryMode parse_memory_mode(std::string_view name) {
  if (name == "backprop") return MemoryMode::Backprop;
  if (name == "update") return MemoryMode::Update;
  throw std::invalid_argument("unknown memory mode '" + std::string(name) + "' (expected backprop or update)");
}

std::string_view memory_mode_name(MemoryMode mode) { return mode == MemoryMode::Backprop ? "backprop" : "update"; }

torch::Tensor cosine_similarity(const torch::Tensor& a, const torch::Tensor& b, double eps) {
  const auto na = a.norm(2, -1).clamp_min(eps);
  const auto nb = b.norm(2, -1).clamp_min(eps);
  return (a * b).sum(-1) / (na * nb);
}

namespace {

torch::Tensor unit_rows(const torch::Tensor& x) { return x / x.norm(2, -1, /*keepdim=*/true).clamp_min(kCosineEps); }

}  // namespace

StyleMemoryImpl::StyleMemoryImpl(const StyleMemoryOptions& options) : options_(options) {
  const int64_t n = options_.num_classes;
  if (n < 1) throw std::invalid_argument("StyleMemory: num_classes must be >= 1");
  if (options_.slots.empty()) throw std::invalid_argument("StyleMemory: empty bank (no slots configured)");
  if (options_.slots.size() != 1 && static_cast<int64_t>(options_.slots.size()) != n) {
    throw std::invalid_argument("StyleMemory: slots must have one entry or one per class");
  }
  for (auto u : options_.slots) {
    if (u < 1) throw std::invalid_argument("StyleMemory: empty bank (every class needs at least one slot)");
  }
  const int64_t u_max = *std::max_element(options_.slots.begin(), options_.slots.end());

  keys_ = register_parameter("keys", torch::randn({n, u_max, options_.key_dim}) * options_.init_std);
  values_ = register_parameter("values", torch::randn({n, u_max, options_.value_dim}) * options_.init_std);

  slot_mask_ = torch::zeros({n, u_max}, torch::kBool);
  for (int64_t c = 0; c < n; ++c) {
    slot_mask_.index_put_({c, torch::indexing::Slice(0, slots(c))}, true);
  }
  set_mode(options_.mode);
}

int64_t StyleMemoryImpl::slots(int64_t cls) const {
  return options_.slots.size() == 1 ? options_.slots.front() : options_.slots.at(static_cast<size_t>(cls));
}

void StyleMemoryImpl::set_mode(MemoryMode mode) {
  options_.mode = mode;
  const bool trainable = mode == MemoryMode::Backprop;
  keys_.set_requires_grad(trainable);
  values_.set_requires_grad(trainable);
}

ReadResult StyleMemoryImpl::read(const torch::Tensor& content, const torch::Tensor& mask) const {
  if (content.dim() != 4) throw ShapeError("StyleMemory::read: content must be [B, C, h, w]");
  if (mask.dim() != 3) throw ShapeError("StyleMemory::read: mask must be [B, h, w]");
  if (mask.size(0) != content.size(0) || mask.size(1) != content.size(2) || mask.size(2) != content.size(3)) {
    throw ShapeError("StyleMemory::read: mask size does not match content feature size");
  }
  if (content.size(1) != keys_.size(2)) {
    throw ShapeError("StyleMemory::read: content has " + std::to_string(content.size(1)) +
                     " channels, keys have " + std::to_string(keys_.size(2)));
  }
  const int64_t b = content.size(0);
  const int64_t h = content.size(2);
  const int64_t w = content.size(3);
  const int64_t m = b * h * w;
  const int64_t n = keys_.size(0);
  const int64_t u = keys_.size(1);
  const int64_t cs = values_.size(2);

  const auto idx = mask.reshape({m}).to(torch::kInt64);
  if (m > 0 && (idx.min().item<int64_t>() < 0 || idx.max().item<int64_t>() >= n)) {
    throw DataError("StyleMemory::read: class index out of range");
  }

  const auto keys = keys_.to(content.dtype());
  const auto values = values_.to(content.dtype());

  // Cosine logits against every slot, then keep only the pixel's own class.
  const auto pixels = unit_rows(content.permute({0, 2, 3, 1}).reshape({m, content.size(1)}));
  const auto all_logits = pixels.matmul(unit_rows(keys).reshape({n * u, -1}).t()).view({m, n, u});
  const auto gather_idx = idx.view({m, 1, 1}).expand({m, 1, u});
  auto logits = all_logits.gather(1, gather_idx).squeeze(1);
  const auto valid = slot_mask_.index_select(0, idx);
  logits = logits.masked_fill(valid.logical_not(), -std::numeric_limits<double>::infinity());
  const auto weights = torch::softmax(logits, 1);  // [m, u]

  // Scatter weights back into the class layout so the value read is one matmul;
  // other classes' slots get exact zeros.
  const auto scattered = torch::zeros({m, n, u}, weights.options()).scatter(1, gather_idx, weights.unsqueeze(1));
  const auto style = scattered.view({m, n * u}).matmul(values.reshape({n * u, cs}));

  ReadResult out;
  out.memory_style = style.view({b, h, w, cs}).permute({0, 3, 1, 2});
  out.weights = weights.view({b, h, w, u}).permute({0, 3, 1, 2});
  return out;
}

void StyleMemoryImpl::legacy_update(const torch::Tensor& content, const torch::Tensor& style,
                                    const torch::Tensor& mask, double rate) {
  if (options_.mode != MemoryMode::Update) {
    throw std::logic_error("StyleMemory::legacy_update called while the bank is in backprop mode");
  }
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("StyleMemory::legacy_update: rate must be in [0, 1]");
  if (style.dim() != 4 || style.size(1) != values_.size(2) || style.size(0) != content.size(0) ||
      style.size(2) != content.size(2) || style.size(3) != content.size(3)) {
    throw ShapeError("StyleMemory::legacy_update: style must be [B, value_dim, h, w] matching content");
  }
  torch::NoGradGuard no_grad;
  const auto c = content.detach().to(keys_.dtype());
  const auto s = style.detach().to(values_.dtype());
  const auto read_weights = read(c, mask).weights;  // [B, U, h, w]

  const int64_t u = keys_.size(1);
  const auto w = read_weights.permute({0, 2, 3, 1}).reshape({-1, u});
  const auto cp = c.permute({0, 2, 3, 1}).reshape({-1, c.size(1)});
  const auto sp = s.permute({0, 2, 3, 1}).reshape({-1, s.size(1)});
  const auto idx = mask.reshape({-1}).to(torch::kInt64);

  for (int64_t cls = 0; cls < keys_.size(0); ++cls) {
    const auto sel = (idx == cls).nonzero().squeeze(1);
    if (sel.numel() == 0) continue;
    const auto wn = w.index_select(0, sel);  // [P, U]
    const auto mass = wn.sum(0);             // [U]
    const auto omega = wn / mass.clamp_min(1e-12);
    const auto target_k = omega.t().matmul(cp.index_select(0, sel));
    const auto target_v = omega.t().matmul(sp.index_select(0, sel));
    const auto active = mass.gt(0).logical_and(slot_mask_[cls]).unsqueeze(1);

    auto k = keys_[cls];
    auto v = values_[cls];
    k.copy_(torch::where(active, (1.0 - rate) * k + rate * target_k, k));
    v.copy_(torch::where(active, (1.0 - rate) * v + rate * target_v, v));
  }
}

}  // namespace shunit
