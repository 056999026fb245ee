#include "shunit/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "shunit/checkpoint.hpp"
#include "shunit/config.hpp"
#include "shunit/errors.hpp"
#include "shunit/metrics.hpp"
#include "shunit/trainer.hpp"

namespace shunit {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& workdir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : workdir / path;
}

std::string padded(int64_t v, int width = 6) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << v;
  return s.str();
}

Domain parse_direction(const std::string& d) {
  if (d == "x2y" || d == "X->Y" || d == "x->y") return Domain::X;
  if (d == "y2x" || d == "Y->X" || d == "y->x") return Domain::Y;
  throw std::invalid_argument("unknown direction '" + d + "' (expected x2y or y2x)");
}

void write_previews(Trainer& trainer, std::span<const DomainSample> xs, const fs::path& dir, int64_t count) {
  fs::create_directories(dir);
  const auto n = std::min<int64_t>(count, static_cast<int64_t>(xs.size()));
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = xs[static_cast<size_t>(i)];
    const auto name = s.name.empty() ? padded(i, 4) : s.name;
    write_image_png(trainer.translate(s), dir / ("iter_" + padded(trainer.iteration()) + "_" + name + ".png"));
  }
}

int cmd_train(const fs::path& workdir, const std::string& config_path) {
  auto config = RunConfig::load(resolve(workdir, config_path));
  config.validate();

  std::vector<DomainSample> xs;
  std::vector<DomainSample> ys;
  if (config.data_root == "synthetic") {
    xs = generate_synthetic(config.synthetic, Domain::X, config.synthetic_count);
    ys = generate_synthetic(config.synthetic, Domain::Y, config.synthetic_count);
  } else {
    const auto root = resolve(workdir, config.data_root);
    xs = load_dataset(root, Domain::X, config.model.num_classes);
    ys = load_dataset(root, Domain::Y, config.model.num_classes);
  }
  if (xs.empty() || ys.empty()) throw DataError("dataset has no samples in one of the domains");

  const auto out_dir = resolve(workdir, config.output_dir);
  fs::create_directories(out_dir);

  std::unique_ptr<Trainer> trainer;
  if (!config.resume.empty()) {
    trainer = std::make_unique<Trainer>(Trainer::load(resolve(workdir, config.resume)));
  } else {
    trainer = std::make_unique<Trainer>(config);
  }

  const auto log_path = out_dir / "losses.csv";
  const bool append = !config.resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + log_path.string());
  if (!append) log << "iter,term,value\n";
  log << std::setprecision(9);

  while (trainer->iteration() < config.train.iterations) {
    const auto report = trainer->step(xs, ys);
    const auto it = trainer->iteration();
    for (const auto& [name, value] : report.rows()) log << it << ',' << name << ',' << value << '\n';
    log.flush();
    if (config.preview_every > 0 && it % config.preview_every == 0) {
      write_previews(*trainer, xs, out_dir / "previews", config.preview_count);
    }
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
      trainer->save(out_dir / ("checkpoint_" + padded(it) + ".ckpt"));
    }
  }
  trainer->save(out_dir / "checkpoint.ckpt");
  std::cout << "trained to iteration " << trainer->iteration() << "; checkpoint " << (out_dir / "checkpoint.ckpt").string()
            << '\n';
  return kExitOk;
}

int cmd_translate(const fs::path& workdir, const std::string& checkpoint, const std::string& input,
                  const std::string& direction, const std::string& output) {
  const auto source = parse_direction(direction);
  auto trainer = Trainer::load(resolve(workdir, checkpoint));
  const auto samples = load_pairs(resolve(workdir, input), source, trainer.config().model.num_classes);
  if (samples.empty()) throw DataError("no input images in " + input);

  const auto out = resolve(workdir, output);
  fs::create_directories(out / "images");
  fs::create_directories(out / "labels");
  for (const auto& s : samples) {
    write_image_png(trainer.translate(s), out / "images" / (s.name + ".png"));
    write_mask_png(s.mask, out / "labels" / (s.name + ".png"));
  }
  std::cout << "translated " << samples.size() << " images (" << domain_name(source) << " -> "
            << domain_name(other(source)) << ")\n";
  return kExitOk;
}

struct EvalOptions {
  std::string generated;
  std::string reference;
  std::string extractor = "frozen-random";
  uint64_t seed = 1234;
  std::string weights;
  std::string report = "cfid_report.csv";
  int64_t num_classes = 256;
  int64_t min_pixels = kMinClassPixels;
};

int cmd_eval_cfid(const fs::path& workdir, const EvalOptions& o) {
  const auto gen = load_pairs(resolve(workdir, o.generated), Domain::Y, o.num_classes);
  const auto ref = load_pairs(resolve(workdir, o.reference), Domain::Y, o.num_classes);
  if (gen.empty()) throw DataError("no images in " + o.generated);
  if (ref.empty()) throw DataError("no images in " + o.reference);

  const auto variant = parse_perceptual_variant(o.extractor);
  PerceptualExtractor extractor = variant == PerceptualVariant::Vgg16Relu53
                                      ? PerceptualExtractor(PerceptualExtractorImpl::vgg16(resolve(workdir, o.weights)))
                                      : PerceptualExtractor(PerceptualExtractorImpl::frozen_random(o.seed));
  const auto report = cfid(gen, ref, extractor, o.min_pixels);

  const auto report_path = resolve(workdir, o.report);
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  std::ofstream out(report_path);
  if (!out) throw DataError("cannot write " + report_path.string());
  out << std::setprecision(10);
  for (const auto& [cls, d] : report.per_class) out << cls << ',' << d << '\n';
  out << "mean," << report.mean << '\n';

  if (!report.skipped.empty()) {
    std::cout << "skipped classes:";
    for (auto c : report.skipped) std::cout << ' ' << c;
    std::cout << '\n';
  }
  std::cout << "cfid mean " << std::setprecision(10) << report.mean << '\n';
  return kExitOk;
}

int cmd_gen_synthetic(const fs::path& workdir, const std::string& config_path, const std::string& output,
                      std::optional<int64_t> count, std::optional<uint64_t> seed) {
  RunConfig config;
  if (!config_path.empty()) config = RunConfig::load(resolve(workdir, config_path));
  auto spec = config.synthetic;
  if (seed) spec.seed = *seed;
  const auto n = count.value_or(config.synthetic_count);
  if (n < 1) throw std::invalid_argument("--count must be >= 1");
  spec.validate();
  const auto root = resolve(workdir, output);
  for (Domain d : {Domain::X, Domain::Y}) {
    const auto samples = generate_synthetic(spec, d, n);
    save_dataset(samples, root);
  }
  std::cout << "wrote " << n << " samples per domain to " << root.string() << '\n';
  return kExitOk;
}

int cmd_inspect(const fs::path& workdir, const std::string& checkpoint) {
  auto trainer = Trainer::load(resolve(workdir, checkpoint));
  auto& model = trainer.model();
  torch::NoGradGuard no_grad;
  std::cout << "iteration " << trainer.iteration() << '\n';
  std::cout << "layer,class,alpha\n" << std::fixed << std::setprecision(6);
  for (Domain d : {Domain::X, Domain::Y}) {
    auto& gen = model->generator(d);
    for (int64_t i = 0; i < gen->num_shl(); ++i) {
      const auto alphas = gen->shl(i)->alphas();
      for (int64_t n = 0; n < alphas.numel(); ++n) {
        std::cout << "gen." << domain_name(d) << ".shl" << i << ',' << n << ',' << alphas[n].item<double>() << '\n';
      }
    }
  }
  std::cout << "memory,class,key_norm,value_norm\n";
  for (Domain d : {Domain::X, Domain::Y}) {
    auto& mem = model->memory(d);
    for (int64_t n = 0; n < mem->num_classes(); ++n) {
      const auto u = mem->slots(n);
      const auto k = mem->keys()[n].narrow(0, 0, u).norm().item<double>();
      const auto v = mem->values()[n].narrow(0, 0, u).norm().item<double>();
      std::cout << "memory." << domain_name(d) << ',' << n << ',' << k << ',' << v << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"SHUNIT: unpaired image translation with style harmonization"};
  app.require_subcommand(1);
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Base directory for relative paths");

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train from a run config");
  train->add_option("config", config_path, "Run config file")->required();

  std::string checkpoint, input, direction = "x2y", output;
  auto* translate = app.add_subcommand("translate", "Translate a directory of image/label pairs");
  translate->add_option("--checkpoint", checkpoint)->required();
  translate->add_option("--input", input, "Directory with images/ and labels/")->required();
  translate->add_option("--direction", direction, "x2y or y2x");
  translate->add_option("--output", output)->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval-cfid", "Class-wise FID between two image/label directories");
  eval_cmd->add_option("--generated", eval.generated)->required();
  eval_cmd->add_option("--reference", eval.reference)->required();
  eval_cmd->add_option("--extractor", eval.extractor, "frozen-random or pretrained-vgg16-relu5_3");
  eval_cmd->add_option("--seed", eval.seed, "Seed of the frozen-random extractor");
  eval_cmd->add_option("--weights", eval.weights, "VGG-16 weights archive");
  eval_cmd->add_option("--report", eval.report, "Report file");
  eval_cmd->add_option("--num-classes", eval.num_classes, "Upper bound on label values");
  eval_cmd->add_option("--min-pixels", eval.min_pixels, "Minimum class area per image");

  std::string synth_config, synth_output;
  std::optional<int64_t> synth_count;
  std::optional<uint64_t> synth_seed;
  auto* synth = app.add_subcommand("gen-synthetic", "Write the synthetic rectangles dataset");
  synth->add_option("--config", synth_config, "Run config supplying the synthetic.* keys");
  synth->add_option("--output", synth_output)->required();
  synth->add_option("--count", synth_count, "Images per domain");
  synth->add_option("--seed", synth_seed);

  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect", "Print per-class alphas and memory norms");
  inspect->add_option("checkpoint", inspect_ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  const fs::path wd(workdir);
  try {
    if (*train) return cmd_train(wd, config_path);
    if (*translate) return cmd_translate(wd, checkpoint, input, direction, output);
    if (*eval_cmd) return cmd_eval_cfid(wd, eval);
    if (*synth) return cmd_gen_synthetic(wd, synth_config, synth_output, synth_count, synth_seed);
    if (*inspect) return cmd_inspect(wd, inspect_ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const MetricUndefinedError& e) {
    std::cerr << "metric undefined: " << e.what() << '\n';
    return kExitMetric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace shunit
