#include "shunit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "shunit/errors.hpp"

namespace shunit {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'U', 'N', 'I', 'T', 'C', 'K'};

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kBool: return 3;
    default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_code(uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kBool;
    default: throw CheckpointError("corrupt checkpoint: unknown dtype code " + std::to_string(code));
  }
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<uint64_t>(s.size());
    buf_.append(s);
  }
  void raw(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& buf, size_t end) : buf_(buf), end_(end) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const char* take(size_t n) {
    need(n);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(size_t n) const {
    if (n > end_ - pos_) throw CheckpointError("corrupt checkpoint: truncated data");
  }
  const std::string& buf_;
  size_t end_;
  size_t pos_ = 0;
};

}  // namespace

const torch::Tensor* CheckpointContents::find(const std::string& name) const {
  for (const auto& [key, value] : arrays) {
    if (key == name) return &value;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointContents& c) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<uint32_t>(c.version);
  w.str(c.config_text);
  w.pod<int64_t>(c.iteration);
  w.str(c.rng_state);
  w.pod<uint64_t>(c.arrays.size());
  for (const auto& [name, tensor] : c.arrays) {
    const auto t = tensor.detach().cpu().contiguous();
    w.str(name);
    w.pod<uint8_t>(dtype_code(t.scalar_type()));
    w.pod<uint32_t>(static_cast<uint32_t>(t.dim()));
    for (auto d : t.sizes()) w.pod<int64_t>(d);
    w.raw(t.data_ptr(), t.numel() * t.element_size());
  }
  const auto checksum = fnv1a(w.bytes());
  w.pod<uint64_t>(checksum);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic): " + path.string());
  }
  const size_t body = buf.size() - sizeof(uint64_t);
  uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (fnv1a(buf.substr(0, body)) != stored) {
    throw CheckpointError("corrupt checkpoint (checksum mismatch): " + path.string());
  }

  Reader r(buf, body);
  r.take(sizeof(kMagic));
  CheckpointContents c;
  c.version = r.pod<uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  c.config_text = r.str();
  c.iteration = r.pod<int64_t>();
  c.rng_state = r.str();
  const auto count = r.pod<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto dtype = dtype_from_code(r.pod<uint8_t>());
    const auto ndim = r.pod<uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = r.pod<int64_t>();
      if (d < 0) throw CheckpointError("corrupt checkpoint: negative dimension in " + name);
    }
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    const auto bytes = static_cast<size_t>(t.numel()) * t.element_size();
    std::memcpy(t.data_ptr(), r.take(bytes), bytes);
    c.arrays.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return c;
}

}  // namespace shunit
