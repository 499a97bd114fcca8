#include "svc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "svc/audio.hpp"

namespace svc {
namespace {

constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::vector<char>& out, T v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(std::span<const char> bytes) : bytes_(bytes) {}

  template <typename T> T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void copy(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw ValidationError("truncated checkpoint: need " + std::to_string(pos_ + n) +
                            " bytes, have " + std::to_string(bytes_.size()));
    }
  }

  std::span<const char> bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<char> Checkpoint::encode() const {
  std::vector<char> out;
  out.insert(out.end(), {'S', 'V', 'C', 'K'});
  put<uint32_t>(out, kVersion);
  const std::string json = meta.dump();
  put<uint64_t>(out, json.size());
  out.insert(out.end(), json.begin(), json.end());
  put<uint32_t>(out, static_cast<uint32_t>(blobs.size()));
  for (const auto& [name, tensor] : blobs) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const auto t = tensor.detach().to(torch::kFloat32).contiguous();
    put<uint32_t>(out, static_cast<uint32_t>(t.dim()));
    for (auto d : t.sizes()) put<int64_t>(out, d);
    const auto* p = reinterpret_cast<const char*>(t.data_ptr<float>());
    out.insert(out.end(), p, p + t.numel() * sizeof(float));
  }
  return out;
}

Checkpoint Checkpoint::decode(std::span<const char> bytes) {
  Cursor c(bytes);
  if (c.str(4) != "SVCK") throw ValidationError("not a checkpoint file (bad magic)");
  const auto version = c.get<uint32_t>();
  if (version != kVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto json_bytes = c.get<uint64_t>();
  try {
    ckpt.meta = Json::parse(c.str(json_bytes));
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  const auto count = c.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    const auto name = c.str(c.get<uint32_t>());
    const auto ndim = c.get<uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = c.get<int64_t>();
      if (d < 0) throw ValidationError("negative dimension in blob " + name);
    }
    auto t = torch::empty(dims, torch::kFloat32);
    c.copy(t.data_ptr<float>(), t.numel() * sizeof(float));
    ckpt.blobs.emplace(name, std::move(t));
  }
  if (!c.done()) throw ValidationError("trailing bytes after checkpoint blobs");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return decode(bytes);
}

const torch::Tensor& Checkpoint::blob(const std::string& name) const {
  auto it = blobs.find(name);
  if (it == blobs.end()) throw ValidationError("checkpoint has no blob '" + name + "'");
  return it->second;
}

void store_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(true)) {
    ckpt.blobs[prefix + "." + p.key()] = p.value().detach().clone();
  }
}

void restore_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.named_parameters(true)) {
    const auto name = prefix + "." + p.key();
    const auto& src = ckpt.blob(name);
    if (!src.sizes().equals(p.value().sizes())) {
      throw ValidationError("blob '" + name + "' has the wrong shape for this model");
    }
    p.value().copy_(src);
  }
}

}  // namespace svc
