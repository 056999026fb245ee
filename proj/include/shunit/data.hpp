#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace shunit {

enum class Domain { X, Y };

std::string_view domain_name(Domain domain);  // "x" / "y"
Domain parse_domain(std::string_view name);
inline Domain other(Domain domain) { return domain == Domain::X ? Domain::Y : Domain::X; }

// [3, H, W] float image with values in [-1, 1]; H and W divisible by 4.
class ImageTensor {
 public:
  explicit ImageTensor(torch::Tensor data);

  const torch::Tensor& data() const { return data_; }
  int64_t height() const { return data_.size(1); }
  int64_t width() const { return data_.size(2); }

 private:
  torch::Tensor data_;
};

// [H, W] int64 class indices in [0, num_classes).
class LabelMask {
 public:
  LabelMask(torch::Tensor data, int64_t num_classes);

  const torch::Tensor& data() const { return data_; }
  int64_t num_classes() const { return num_classes_; }
  int64_t height() const { return data_.size(0); }
  int64_t width() const { return data_.size(1); }

 private:
  torch::Tensor data_;
  int64_t num_classes_;
};

struct DomainSample {
  DomainSample(ImageTensor image, LabelMask mask, Domain domain, std::string name = {});

  ImageTensor image;
  LabelMask mask;
  Domain domain;
  std::string name;  // file stem, used when writing outputs
};

// A stacked minibatch: images [B, 3, H, W], masks [B, H, W] (int64).
struct Batch {
  torch::Tensor images;
  torch::Tensor masks;

  int64_t size() const { return images.size(0); }
};

Batch collate(std::span<const DomainSample> samples);
Batch collate(std::span<const DomainSample* const> samples);

struct ClassIntensity {
  std::array<float, 3> mean{0.f, 0.f, 0.f};
  std::array<float, 3> stddev{0.1f, 0.1f, 0.1f};
};

// Axis-aligned rectangles (one per non-background class) on a class-0 canvas.
struct SyntheticSpec {
  int64_t canvas_size = 32;
  int64_t num_classes = 2;
  std::vector<ClassIntensity> x;  // per class, domain X
  std::vector<ClassIntensity> y;  // per class, domain Y
  int64_t min_rect = 8;
  int64_t max_rect = 20;
  uint64_t seed = 0;

  void validate() const;
};

// Byte <-> [-1, 1] mapping used for all PNG I/O.
float byte_to_unit(uint8_t value);
uint8_t unit_to_byte(float value);

// Reads <root>/<domain>/{images,labels}/*.png, paired by stem, sorted by filename.
std::vector<DomainSample> load_dataset(const std::filesystem::path& root, Domain domain,
                                       int64_t num_classes);

// Reads a flat pair of directories (images/, labels/) under `dir`.
std::vector<DomainSample> load_pairs(const std::filesystem::path& dir, Domain domain,
                                     int64_t num_classes);

// Writes samples in the load_dataset layout under <root>/<domain>/.
void save_dataset(std::span<const DomainSample> samples, const std::filesystem::path& root);
void save_pairs(std::span<const DomainSample> samples, const std::filesystem::path& dir);

torch::Tensor image_to_bytes(const torch::Tensor& image);  // [3,H,W] -> uint8 [H,W,3]
void write_image_png(const torch::Tensor& image, const std::filesystem::path& path);
void write_mask_png(const LabelMask& mask, const std::filesystem::path& path);

// [N, H, W] float; output[n, h, w] = 1 iff mask[h, w] == n.
torch::Tensor one_hot(const LabelMask& mask);
// Batched form: masks [B, H, W] -> [B, N, H, W].
torch::Tensor one_hot(const torch::Tensor& masks, int64_t num_classes, torch::Dtype dtype = torch::kFloat32);

// Nearest-neighbour subsampling anchored at the top-left pixel of each block.
LabelMask downsample_mask(const LabelMask& mask, int64_t factor);
// Batched / unchecked form over [..., H, W].
torch::Tensor downsample_masks(const torch::Tensor& masks, int64_t factor);

std::vector<DomainSample> generate_synthetic(const SyntheticSpec& spec, Domain domain, int64_t count);

}  // namespace shunit
