#include "plantcast/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"

namespace plantcast {

namespace {

constexpr char kMagic[4] = {'L', 'L', 'W', '1'};
constexpr const char* kMetaLags = "meta.lags";
constexpr const char* kMetaConfig = "meta.config";

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorCode::FormatError, "weights file truncated at byte " + std::to_string(pos_));
    }
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_llw(const nn::ParamMap& tensors) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw Error(ErrorCode::FormatError, "tensor name too long: " + name.substr(0, 32));
    if (t.rank() > 0xFF) throw Error(ErrorCode::FormatError, "tensor rank too large: " + name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<unsigned char>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

nn::ParamMap decode_llw(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::FormatError, "not an LLW1 weights file (bad magic)");
  }
  Reader r(bytes);
  r.text(4);
  const std::uint32_t count = r.get<std::uint32_t>();
  nn::ParamMap out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.get<std::uint16_t>();
    std::string name = r.text(len);
    const std::uint8_t rank = r.get<std::uint8_t>();
    std::vector<std::size_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.get<std::uint32_t>();
      n *= d;
    }
    std::vector<double> vals(n);
    for (double& v : vals) v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>()));
    if (!out.emplace(name, nn::Tensor(std::move(dims), std::move(vals))).second) {
      throw Error(ErrorCode::FormatError, "duplicate tensor '" + name + "' in weights file");
    }
  }
  if (!r.done()) throw Error(ErrorCode::FormatError, "trailing bytes after tensor " + std::to_string(count));
  return out;
}

void write_llw(const nn::ParamMap& tensors, const std::filesystem::path& path) {
  csv::write_atomic_binary(path, encode_llw(tensors));
}

nn::ParamMap read_llw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_llw(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_model(const ModelConfig& cfg, const Weights& w, const std::filesystem::path& path) {
  check_weights(cfg, w);
  nn::ParamMap all = w;
  std::vector<double> lags(cfg.lag_set.lags.begin(), cfg.lag_set.lags.end());
  all[kMetaLags] = nn::Tensor::vector(std::move(lags));
  all[kMetaConfig] = nn::Tensor::vector({static_cast<double>(cfg.d_model), static_cast<double>(cfg.n_heads),
                                         static_cast<double>(cfg.M), static_cast<double>(cfg.n_covariates),
                                         cfg.dropout_p, cfg.rope_base,
                                         cfg.loss_mode == LossMode::StudentTNll ? 0.0 : 1.0,
                                         cfg.positional_encoding == PositionalEncoding::Rotary ? 0.0 : 1.0});
  write_llw(all, path);
}

std::pair<ModelConfig, Weights> load_model(const std::filesystem::path& path) {
  Weights w = read_llw(path);
  const auto lags = w.find(kMetaLags);
  const auto meta = w.find(kMetaConfig);
  if (lags == w.end() || meta == w.end() || meta->second.size() != 8) {
    throw Error(ErrorCode::FormatError, path.string() + ": model file lacks meta.lags/meta.config");
  }
  ModelConfig cfg;
  cfg.lag_set.lags.clear();
  for (double l : lags->second.values()) cfg.lag_set.lags.push_back(static_cast<std::size_t>(l));
  const auto m = meta->second.values();
  cfg.d_model = static_cast<std::size_t>(m[0]);
  cfg.n_heads = static_cast<std::size_t>(m[1]);
  cfg.M = static_cast<std::size_t>(m[2]);
  cfg.n_covariates = static_cast<std::size_t>(m[3]);
  cfg.dropout_p = static_cast<double>(static_cast<float>(m[4]));
  cfg.rope_base = m[5];
  cfg.loss_mode = m[6] == 0.0 ? LossMode::StudentTNll : LossMode::MseOnMean;
  cfg.positional_encoding = m[7] == 0.0 ? PositionalEncoding::Rotary : PositionalEncoding::Sinusoidal;
  w.erase(kMetaLags);
  w.erase(kMetaConfig);
  cfg.validate();
  check_weights(cfg, w);
  return {cfg, std::move(w)};
}

Weights quantize_f32(const Weights& w) {
  Weights out = w;
  for (auto& [_, t] : out) {
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

}  // namespace plantcast
