#include "shunit/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <sstream>

#include "shunit/errors.hpp"

namespace shunit {

Fidelity parse_fidelity(std::string_view name) {
  if (name == "paper") return Fidelity::Paper;
  if (name == "toy") return Fidelity::Toy;
  throw std::invalid_argument("unknown fidelity '" + std::string(name) + "' (expected paper or toy)");
}

std::string_view fidelity_name(Fidelity f) { return f == Fidelity::Paper ? "paper" : "toy"; }

LossWeights LossConfig::effective_weights() const {
  LossWeights w = weights;
  if (!use_content_loss) w.content = 0.0;
  if (!use_style_loss) w.style = 0.0;
  return w;
}

ContrastiveOptions LossConfig::contrastive() const {
  ContrastiveOptions o;
  o.tau = weights.tau;
  o.normalize = normalize;
  o.reduction = reduction;
  return o;
}

SyntheticSpec RunConfig::default_synthetic(int64_t num_classes) {
  SyntheticSpec spec;
  spec.num_classes = num_classes;
  spec.x.assign(static_cast<size_t>(std::max<int64_t>(num_classes, 0)), ClassIntensity{});
  spec.y = spec.x;
  for (int64_t n = 1; n < num_classes; ++n) {
    spec.x[static_cast<size_t>(n)].mean = {0.6f, 0.6f, 0.6f};
    spec.y[static_cast<size_t>(n)].mean = {-0.6f, -0.6f, -0.6f};
  }
  return spec;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

int64_t to_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

uint64_t to_uint(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::array<float, 3> to_triplet(const std::string& key, const std::string& v) {
  const auto parts = split_commas(v);
  if (parts.size() == 1) {
    const auto x = static_cast<float>(to_double(key, parts[0]));
    return {x, x, x};
  }
  if (parts.size() != 3) throw ConfigError(key, "expected one value or three comma-separated values");
  return {static_cast<float>(to_double(key, parts[0])), static_cast<float>(to_double(key, parts[1])),
          static_cast<float>(to_double(key, parts[2]))};
}

template <class Fn>
auto wrap(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(float v) { return fmt(static_cast<double>(v)); }

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string fmt_triplet(const std::array<float, 3>& t) {
  if (t[0] == t[1] && t[1] == t[2]) return fmt(t[0]);
  return fmt(t[0]) + "," + fmt(t[1]) + "," + fmt(t[2]);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data_root", [](RunConfig& c, auto&, auto& v) { c.data_root = v; }},
      {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"resume", [](RunConfig& c, auto&, auto& v) { c.resume = v; }},
      {"preview_every", [](RunConfig& c, auto& k, auto& v) { c.preview_every = to_int(k, v); }},
      {"preview_count", [](RunConfig& c, auto& k, auto& v) { c.preview_count = to_int(k, v); }},
      {"checkpoint_every", [](RunConfig& c, auto& k, auto& v) { c.checkpoint_every = to_int(k, v); }},
      // model
      {"fidelity", [](RunConfig& c, auto& k, auto& v) { c.model.fidelity = wrap(k, [&] { return parse_fidelity(v); }); }},
      {"width_scale", [](RunConfig& c, auto& k, auto& v) { c.model.width_scale = to_double(k, v); }},
      {"slots_per_class",
       [](RunConfig& c, auto& k, auto& v) {
         c.model.slots.clear();
         for (const auto& part : split_commas(v)) c.model.slots.push_back(to_int(k, part));
       }},
      {"use_label_input", [](RunConfig& c, auto& k, auto& v) { c.model.use_label_input = to_bool(k, v); }},
      {"padding", [](RunConfig& c, auto& k, auto& v) { c.model.pad = wrap(k, [&] { return parse_pad_type(v); }); }},
      {"disc_scales", [](RunConfig& c, auto& k, auto& v) { c.model.disc_scales = to_int(k, v); }},
      {"perceptual",
       [](RunConfig& c, auto& k, auto& v) { c.model.perceptual = wrap(k, [&] { return parse_perceptual_variant(v); }); }},
      {"perceptual_weights", [](RunConfig& c, auto&, auto& v) { c.model.perceptual_weights = v; }},
      {"perceptual_seed", [](RunConfig& c, auto& k, auto& v) { c.model.perceptual_seed = to_uint(k, v); }},
      {"init_std", [](RunConfig& c, auto& k, auto& v) { c.model.init_std = to_double(k, v); }},
      {"memory_mode",
       [](RunConfig& c, auto& k, auto& v) { c.model.memory_mode = wrap(k, [&] { return parse_memory_mode(v); }); }},
      // losses
      {"lambda_self", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.self = to_double(k, v); }},
      {"lambda_cycle", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.cycle = to_double(k, v); }},
      {"lambda_perc", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.perc = to_double(k, v); }},
      {"lambda_adv", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.adv = to_double(k, v); }},
      {"lambda_content", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.content = to_double(k, v); }},
      {"lambda_style", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.style = to_double(k, v); }},
      {"tau", [](RunConfig& c, auto& k, auto& v) { c.loss.weights.tau = to_double(k, v); }},
      {"use_content_loss", [](RunConfig& c, auto& k, auto& v) { c.loss.use_content_loss = to_bool(k, v); }},
      {"use_style_loss", [](RunConfig& c, auto& k, auto& v) { c.loss.use_style_loss = to_bool(k, v); }},
      {"contrastive_mode",
       [](RunConfig& c, auto& k, auto& v) { c.loss.mode = wrap(k, [&] { return parse_contrastive_mode(v); }); }},
      {"contrastive_normalize", [](RunConfig& c, auto& k, auto& v) { c.loss.normalize = to_bool(k, v); }},
      {"contrastive_reduction",
       [](RunConfig& c, auto& k, auto& v) { c.loss.reduction = wrap(k, [&] { return parse_reduction(v); }); }},
      {"adv_generator",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "nonsaturating") c.loss.non_saturating = true;
         else if (v == "saturating") c.loss.non_saturating = false;
         else throw ConfigError(k, "expected nonsaturating or saturating");
       }},
      // training
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = to_double(k, v); }},
      {"beta1", [](RunConfig& c, auto& k, auto& v) { c.train.beta1 = to_double(k, v); }},
      {"beta2", [](RunConfig& c, auto& k, auto& v) { c.train.beta2 = to_double(k, v); }},
      {"weight_decay", [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = to_double(k, v); }},
      {"iterations", [](RunConfig& c, auto& k, auto& v) { c.train.iterations = to_int(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = to_int(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = to_uint(k, v); }},
      {"update_rate", [](RunConfig& c, auto& k, auto& v) { c.train.update_rate = to_double(k, v); }},
      {"grad_clip", [](RunConfig& c, auto& k, auto& v) { c.train.grad_clip = to_double(k, v); }},
      // synthetic data
      {"synthetic.canvas_size", [](RunConfig& c, auto& k, auto& v) { c.synthetic.canvas_size = to_int(k, v); }},
      {"synthetic.count", [](RunConfig& c, auto& k, auto& v) { c.synthetic_count = to_int(k, v); }},
      {"synthetic.seed", [](RunConfig& c, auto& k, auto& v) { c.synthetic.seed = to_uint(k, v); }},
      {"synthetic.min_rect", [](RunConfig& c, auto& k, auto& v) { c.synthetic.min_rect = to_int(k, v); }},
      {"synthetic.max_rect", [](RunConfig& c, auto& k, auto& v) { c.synthetic.max_rect = to_int(k, v); }},
  };
  return table;
}

const std::regex& class_key_pattern() {
  static const std::regex re(R"(synthetic\.(x|y)\.(mean|std)\.(\d+))");
  return re;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::vector<std::string> order;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(line_no) + ": empty key");
    if (entries.contains(key)) throw ConfigError(key, "duplicate key");
    entries.emplace(key, value);
    order.push_back(key);
  }

  RunConfig cfg;
  if (auto it = entries.find("num_classes"); it != entries.end()) {
    cfg.model.num_classes = to_int("num_classes", it->second);
    if (cfg.model.num_classes < 1) throw ConfigError("num_classes", "must be >= 1");
  }
  cfg.synthetic = default_synthetic(cfg.model.num_classes);

  const auto& table = setters();
  for (const auto& key : order) {
    if (key == "num_classes") continue;
    const auto& value = entries.at(key);
    if (auto it = table.find(key); it != table.end()) {
      it->second(cfg, key, value);
      continue;
    }
    std::smatch m;
    if (std::regex_match(key, m, class_key_pattern())) {
      const auto cls = to_int(key, m[3].str());
      if (cls >= cfg.model.num_classes) throw ConfigError(key, "class index exceeds num_classes");
      auto& dom = m[1].str() == "x" ? cfg.synthetic.x : cfg.synthetic.y;
      auto& entry = dom[static_cast<size_t>(cls)];
      (m[2].str() == "mean" ? entry.mean : entry.stddev) = to_triplet(key, value);
      continue;
    }
    throw ConfigError(key, "unknown config key");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::validate() const {
  const auto& m = model;
  if (m.num_classes < 1) throw ConfigError("num_classes", "must be >= 1");
  if (!(m.width_scale > 0.0 && m.width_scale <= 1.0)) throw ConfigError("width_scale", "must be in (0, 1]");
  if (m.slots.empty()) throw ConfigError("slots_per_class", "must not be empty");
  if (m.slots.size() != 1 && static_cast<int64_t>(m.slots.size()) != m.num_classes) {
    throw ConfigError("slots_per_class", "needs one value or one value per class");
  }
  for (auto u : m.slots) {
    if (u < 1) throw ConfigError("slots_per_class", "every class needs at least one slot");
  }
  if (m.disc_scales < 1) throw ConfigError("disc_scales", "must be >= 1");
  if (!(m.init_std > 0.0)) throw ConfigError("init_std", "must be > 0");
  if (m.perceptual == PerceptualVariant::Vgg16Relu53 && m.perceptual_weights.empty()) {
    throw ConfigError("perceptual_weights", "required for the pretrained VGG-16 extractor");
  }
  try {
    loss.weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("lambda_*/tau", e.what());
  }
  if (!(train.lr > 0.0)) throw ConfigError("lr", "must be > 0");
  if (!(train.beta1 >= 0.0 && train.beta1 < 1.0)) throw ConfigError("beta1", "must be in [0, 1)");
  if (!(train.beta2 >= 0.0 && train.beta2 < 1.0)) throw ConfigError("beta2", "must be in [0, 1)");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
  if (train.iterations < 1) throw ConfigError("iterations", "must be >= 1");
  if (train.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(train.update_rate >= 0.0 && train.update_rate <= 1.0)) throw ConfigError("update_rate", "must be in [0, 1]");
  if (!(train.grad_clip >= 0.0)) throw ConfigError("grad_clip", "must be >= 0");
  if (preview_every < 0) throw ConfigError("preview_every", "must be >= 0");
  if (preview_count < 1) throw ConfigError("preview_count", "must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every", "must be >= 0");
  if (synthetic_count < 0) throw ConfigError("synthetic.count", "must be >= 0");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  auto kv = [&out](const std::string& k, const std::string& v) { out << k << " = " << v << "\n"; };
  kv("data_root", data_root);
  kv("output_dir", output_dir);
  kv("num_classes", std::to_string(model.num_classes));
  kv("fidelity", std::string(fidelity_name(model.fidelity)));
  kv("width_scale", fmt(model.width_scale));
  std::string slots;
  for (size_t i = 0; i < model.slots.size(); ++i) slots += (i ? "," : "") + std::to_string(model.slots[i]);
  kv("slots_per_class", slots);
  kv("use_label_input", fmt_bool(model.use_label_input));
  kv("padding", std::string(pad_type_name(model.pad)));
  kv("disc_scales", std::to_string(model.disc_scales));
  kv("perceptual", std::string(perceptual_variant_name(model.perceptual)));
  if (!model.perceptual_weights.empty()) kv("perceptual_weights", model.perceptual_weights);
  kv("perceptual_seed", std::to_string(model.perceptual_seed));
  kv("init_std", fmt(model.init_std));
  kv("memory_mode", std::string(memory_mode_name(model.memory_mode)));
  kv("lambda_self", fmt(loss.weights.self));
  kv("lambda_cycle", fmt(loss.weights.cycle));
  kv("lambda_perc", fmt(loss.weights.perc));
  kv("lambda_adv", fmt(loss.weights.adv));
  kv("lambda_content", fmt(loss.weights.content));
  kv("lambda_style", fmt(loss.weights.style));
  kv("tau", fmt(loss.weights.tau));
  kv("use_content_loss", fmt_bool(loss.use_content_loss));
  kv("use_style_loss", fmt_bool(loss.use_style_loss));
  kv("contrastive_mode", std::string(contrastive_mode_name(loss.mode)));
  kv("contrastive_normalize", fmt_bool(loss.normalize));
  kv("contrastive_reduction", std::string(reduction_name(loss.reduction)));
  kv("adv_generator", loss.non_saturating ? "nonsaturating" : "saturating");
  kv("lr", fmt(train.lr));
  kv("beta1", fmt(train.beta1));
  kv("beta2", fmt(train.beta2));
  kv("weight_decay", fmt(train.weight_decay));
  kv("iterations", std::to_string(train.iterations));
  kv("batch_size", std::to_string(train.batch_size));
  kv("seed", std::to_string(train.seed));
  kv("update_rate", fmt(train.update_rate));
  kv("grad_clip", fmt(train.grad_clip));
  kv("preview_every", std::to_string(preview_every));
  kv("preview_count", std::to_string(preview_count));
  kv("checkpoint_every", std::to_string(checkpoint_every));
  if (!resume.empty()) kv("resume", resume);
  kv("synthetic.canvas_size", std::to_string(synthetic.canvas_size));
  kv("synthetic.count", std::to_string(synthetic_count));
  kv("synthetic.seed", std::to_string(synthetic.seed));
  kv("synthetic.min_rect", std::to_string(synthetic.min_rect));
  kv("synthetic.max_rect", std::to_string(synthetic.max_rect));
  for (const auto& [name, dom] : {std::pair{"x", &synthetic.x}, std::pair{"y", &synthetic.y}}) {
    for (size_t n = 0; n < dom->size(); ++n) {
      kv(std::string("synthetic.") + name + ".mean." + std::to_string(n), fmt_triplet((*dom)[n].mean));
      kv(std::string("synthetic.") + name + ".std." + std::to_string(n), fmt_triplet((*dom)[n].stddev));
    }
  }
  return out.str();
}

}  // namespace shunit
