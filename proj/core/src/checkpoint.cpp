#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fpfgnn/pipeline.hpp"

namespace fpfgnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'P', 'F', 'G', 'N', 'N', 'C', 'K'};
constexpr std::uint8_t kFloat32Tag = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string str(std::size_t n) { return std::string(take(n), n); }
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  const nlohmann::json meta = {{"model", to_json(c.model_config)},
                               {"train", to_json(c.train_config)},
                               {"epoch", c.epoch},
                               {"train_loss", c.train_loss},
                               {"val_iou_micro", c.val_iou_micro}};
  const std::string text = meta.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const auto& name = c.params.names[i];
    const auto& v = c.params.values[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, kFloat32Tag);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.cols()));
    out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(float));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof(kMagic) || std::memcmp(in.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != Checkpoint::kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto text = in.str(in.get<std::uint32_t>());
  Checkpoint c;
  try {
    const auto meta = nlohmann::json::parse(text);
    c.model_config = model_config_from_json(meta.at("model"));
    c.train_config = train_config_from_json(meta.at("train"));
    c.epoch = meta.at("epoch").get<int>();
    c.train_loss = meta.at("train_loss").get<std::vector<double>>();
    c.val_iou_micro = meta.at("val_iou_micro").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint metadata invalid: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.str(in.get<std::uint32_t>());
    if (in.get<std::uint8_t>() != kFloat32Tag) throw std::runtime_error("unsupported tensor precision for " + name);
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    nn::Matrix<float> m(rows, cols);
    const std::size_t n = static_cast<std::size_t>(rows) * cols * sizeof(float);
    std::memcpy(m.data(), in.take(n), n);
    c.params.add(std::move(name), std::move(m));
  }
  if (!in.done()) throw std::runtime_error("trailing bytes after checkpoint tensors");
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  Model m = init_params(c.model_config, 0);
  if (m.params.size() != c.params.size())
    throw std::runtime_error("checkpoint has " + std::to_string(c.params.size()) + " tensors, config expects " +
                             std::to_string(m.params.size()));
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const int slot = c.params.find(m.params.names[i]);
    if (slot < 0) throw std::runtime_error("checkpoint lacks tensor " + m.params.names[i]);
    const auto& v = c.params.values[static_cast<std::size_t>(slot)];
    if (v.rows() != m.params.values[i].rows() || v.cols() != m.params.values[i].cols())
      throw std::runtime_error("shape mismatch for tensor " + m.params.names[i]);
    m.params.values[i] = v;
  }
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

}  // namespace fpfgnn
