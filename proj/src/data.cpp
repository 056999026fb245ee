#include "shunit/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "shunit/errors.hpp"
#include "shunit/png_io.hpp"

namespace fs = std::filesystem;

namespace shunit {

std::string_view domain_name(Domain domain) { return domain == Domain::X ? "x" : "y"; }

Domain parse_domain(std::string_view name) {
  if (name == "x" || name == "X") return Domain::X;
  if (name == "y" || name == "Y") return Domain::Y;
  throw std::invalid_argument("unknown domain '" + std::string(name) + "' (expected x or y)");
}

ImageTensor::ImageTensor(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 3 || data_.size(0) != 3) {
    throw ShapeError("ImageTensor expects shape [3, H, W]");
  }
  if (data_.size(1) % 4 != 0 || data_.size(2) % 4 != 0) {
    throw ShapeError("ImageTensor height and width must be divisible by 4");
  }
  if (!data_.is_floating_point()) {
    throw ShapeError("ImageTensor must hold floating-point values");
  }
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw DataError("ImageTensor contains non-finite values");
  }
  if (data_.numel() > 0 && data_.abs().max().item<double>() > 1.0) {
    throw DataError("ImageTensor values must lie in [-1, 1]");
  }
}

LabelMask::LabelMask(torch::Tensor data, int64_t num_classes)
    : data_(std::move(data)), num_classes_(num_classes) {
  if (num_classes_ < 1) throw std::invalid_argument("LabelMask: num_classes must be >= 1");
  if (data_.dim() != 2) throw ShapeError("LabelMask expects shape [H, W]");
  data_ = data_.to(torch::kInt64).contiguous();
  if (data_.numel() == 0) return;
  const auto bad = (data_ < 0).logical_or(data_ >= num_classes_);
  if (bad.any().item<bool>()) {
    const auto flat = bad.flatten().nonzero()[0].item<int64_t>();
    const int64_t row = flat / data_.size(1);
    const int64_t col = flat % data_.size(1);
    std::ostringstream msg;
    msg << "class index out of range: value " << data_[row][col].item<int64_t>() << " at (row "
        << row << ", col " << col << ") with " << num_classes_ << " classes";
    throw DataError(msg.str());
  }
}

DomainSample::DomainSample(ImageTensor image_, LabelMask mask_, Domain domain_, std::string name_)
    : image(std::move(image_)), mask(std::move(mask_)), domain(domain_), name(std::move(name_)) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw ShapeError("DomainSample: image and mask spatial sizes differ");
  }
}

Batch collate(std::span<const DomainSample* const> samples) {
  if (samples.empty()) throw std::invalid_argument("collate: empty batch");
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> masks;
  images.reserve(samples.size());
  masks.reserve(samples.size());
  for (const auto* s : samples) {
    images.push_back(s->image.data());
    masks.push_back(s->mask.data());
  }
  return Batch{torch::stack(images), torch::stack(masks)};
}

Batch collate(std::span<const DomainSample> samples) {
  std::vector<const DomainSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  return collate(std::span<const DomainSample* const>(ptrs));
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SyntheticSpec: num_classes must be >= 2");
  if (canvas_size < 4 || canvas_size % 4 != 0) {
    throw std::invalid_argument("SyntheticSpec: canvas_size must be a positive multiple of 4");
  }
  if (static_cast<int64_t>(x.size()) != num_classes || static_cast<int64_t>(y.size()) != num_classes) {
    throw std::invalid_argument("SyntheticSpec: need one intensity entry per class per domain");
  }
  for (const auto* dom : {&x, &y}) {
    for (const auto& c : *dom) {
      for (int ch = 0; ch < 3; ++ch) {
        if (c.mean[ch] < -1.f || c.mean[ch] > 1.f) {
          throw std::invalid_argument("SyntheticSpec: intensity means must lie in [-1, 1]");
        }
        if (!(c.stddev[ch] >= 0.f)) throw std::invalid_argument("SyntheticSpec: stddev must be >= 0");
      }
    }
  }
  if (min_rect < 1 || max_rect < min_rect || max_rect > canvas_size) {
    throw std::invalid_argument("SyntheticSpec: need 1 <= min_rect <= max_rect <= canvas_size");
  }
}

float byte_to_unit(uint8_t value) { return static_cast<float>(value) / 127.5f - 1.f; }

uint8_t unit_to_byte(float value) {
  const float scaled = std::round((std::clamp(value, -1.f, 1.f) + 1.f) * 127.5f);
  return static_cast<uint8_t>(std::clamp(scaled, 0.f, 255.f));
}

namespace {

std::map<std::string, fs::path> png_files_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.emplace(entry.path().stem().string(), entry.path());
    }
  }
  return out;
}

ImageTensor read_image(const fs::path& path) {
  const auto img = png::read(path, 3);
  auto bytes = torch::from_blob(const_cast<uint8_t*>(img.pixels.data()), {img.height, img.width, 3},
                                torch::kUInt8);
  auto unit = bytes.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
  try {
    return ImageTensor(unit);
  } catch (const ShapeError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

LabelMask read_mask(const fs::path& path, int64_t num_classes) {
  const auto img = png::read(path, 1);
  auto bytes = torch::from_blob(const_cast<uint8_t*>(img.pixels.data()), {img.height, img.width},
                                torch::kUInt8);
  try {
    return LabelMask(bytes.to(torch::kInt64), num_classes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<DomainSample> load_pairs(const fs::path& dir, Domain domain, int64_t num_classes) {
  const auto images = png_files_by_stem(dir / "images");
  const auto labels = png_files_by_stem(dir / "labels");
  for (const auto& [stem, path] : images) {
    if (!labels.contains(stem)) throw DataError("orphan image without label: " + path.string());
  }
  for (const auto& [stem, path] : labels) {
    if (!images.contains(stem)) throw DataError("orphan label without image: " + path.string());
  }

  std::vector<DomainSample> out;
  out.reserve(images.size());
  for (const auto& [stem, image_path] : images) {  // std::map: ordered by filename
    auto image = read_image(image_path);
    auto mask = read_mask(labels.at(stem), num_classes);
    if (image.height() != mask.height() || image.width() != mask.width()) {
      throw DataError("image/label size mismatch for " + stem);
    }
    out.emplace_back(std::move(image), std::move(mask), domain, stem);
  }
  return out;
}

std::vector<DomainSample> load_dataset(const fs::path& root, Domain domain, int64_t num_classes) {
  return load_pairs(root / std::string(domain_name(domain)), domain, num_classes);
}

torch::Tensor image_to_bytes(const torch::Tensor& image) {
  auto unit = image.detach().to(torch::kFloat32).clamp(-1.0, 1.0);
  return unit.add(1.0).mul(127.5).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

void write_image_png(const torch::Tensor& image, const fs::path& path) {
  if (image.dim() != 3 || image.size(0) != 3) throw ShapeError("write_image_png expects [3, H, W]");
  const auto bytes = image_to_bytes(image);
  png::Image8 img;
  img.height = image.size(1);
  img.width = image.size(2);
  img.channels = 3;
  img.pixels.assign(bytes.data_ptr<uint8_t>(), bytes.data_ptr<uint8_t>() + bytes.numel());
  png::write(path, img);
}

void write_mask_png(const LabelMask& mask, const fs::path& path) {
  if (mask.num_classes() > 256) throw DataError("masks with more than 256 classes cannot be stored as 8-bit PNG");
  const auto bytes = mask.data().to(torch::kUInt8).contiguous();
  png::Image8 img;
  img.height = mask.height();
  img.width = mask.width();
  img.channels = 1;
  img.pixels.assign(bytes.data_ptr<uint8_t>(), bytes.data_ptr<uint8_t>() + bytes.numel());
  png::write(path, img);
}

void save_pairs(std::span<const DomainSample> samples, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::string stem = s.name;
    if (stem.empty()) {
      std::ostringstream name;
      name << std::setw(5) << std::setfill('0') << i;
      stem = name.str();
    }
    write_image_png(s.image.data(), dir / "images" / (stem + ".png"));
    write_mask_png(s.mask, dir / "labels" / (stem + ".png"));
  }
}

void save_dataset(std::span<const DomainSample> samples, const fs::path& root) {
  if (samples.empty()) return;
  save_pairs(samples, root / std::string(domain_name(samples.front().domain)));
}

torch::Tensor one_hot(const torch::Tensor& masks, int64_t num_classes, torch::Dtype dtype) {
  return torch::one_hot(masks.to(torch::kInt64), num_classes).movedim(-1, -3).to(dtype).contiguous();
}

torch::Tensor one_hot(const LabelMask& mask) { return one_hot(mask.data(), mask.num_classes(), torch::kFloat32); }

torch::Tensor downsample_masks(const torch::Tensor& masks, int64_t factor) {
  using torch::indexing::Slice;
  if (factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
  const auto h = masks.size(-2);
  const auto w = masks.size(-1);
  if (h % factor != 0 || w % factor != 0) {
    throw ShapeError("downsample factor " + std::to_string(factor) + " does not divide mask size " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  return masks.index({"...", Slice(0, h, factor), Slice(0, w, factor)}).contiguous();
}

LabelMask downsample_mask(const LabelMask& mask, int64_t factor) {
  return LabelMask(downsample_masks(mask.data(), factor), mask.num_classes());
}

std::vector<DomainSample> generate_synthetic(const SyntheticSpec& spec, Domain domain, int64_t count) {
  spec.validate();
  if (count < 0) throw std::invalid_argument("generate_synthetic: count must be >= 0");
  const auto& classes = domain == Domain::X ? spec.x : spec.y;
  std::seed_seq seq{static_cast<uint64_t>(spec.seed), static_cast<uint64_t>(domain == Domain::X ? 1 : 2)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<float> unit_normal(0.f, 1.f);
  std::uniform_int_distribution<int64_t> rect_size(spec.min_rect, spec.max_rect);

  const int64_t side = spec.canvas_size;
  std::vector<DomainSample> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    auto mask = torch::zeros({side, side}, torch::kInt64);
    auto m = mask.accessor<int64_t, 2>();
    for (int64_t cls = 1; cls < spec.num_classes; ++cls) {
      const int64_t rh = rect_size(rng);
      const int64_t rw = rect_size(rng);
      const int64_t top = std::uniform_int_distribution<int64_t>(0, side - rh)(rng);
      const int64_t left = std::uniform_int_distribution<int64_t>(0, side - rw)(rng);
      for (int64_t r = top; r < top + rh; ++r)
        for (int64_t c = left; c < left + rw; ++c) m[r][c] = cls;
    }
    auto image = torch::empty({3, side, side}, torch::kFloat32);
    auto px = image.accessor<float, 3>();
    for (int64_t r = 0; r < side; ++r) {
      for (int64_t c = 0; c < side; ++c) {
        const auto& dist = classes[static_cast<size_t>(m[r][c])];
        for (int ch = 0; ch < 3; ++ch) {
          const float v = dist.mean[ch] + dist.stddev[ch] * unit_normal(rng);
          px[ch][r][c] = std::clamp(v, -1.f, 1.f);
        }
      }
    }
    std::ostringstream name;
    name << domain_name(domain) << "_" << std::setw(5) << std::setfill('0') << i;
    out.emplace_back(ImageTensor(image), LabelMask(mask, spec.num_classes), domain, name.str());
  }
  return out;
}

}  // namespace shunit
