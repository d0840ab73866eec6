#include "plantcast/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "plantcast/csv.hpp"
#include "plantcast/error.hpp"

namespace plantcast {

namespace fs = std::filesystem;

Frame::Frame(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), pixels(w * h, fill) {}

Mask::Mask(std::size_t w, std::size_t h, bool fill) : width(w), height(h), bits(w * h, fill ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

namespace {

struct Netpbm {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<unsigned char> data;
};

// Reads the header tokens (with '#' comments) followed by exactly one
// whitespace byte and the raster.
Netpbm read_netpbm(const fs::path& path, std::string_view expected_magic, std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) {
    return Error(ErrorCode::FormatError, path.string() + ": " + what);
  };
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    if (tok.empty()) throw fail("truncated header");
    return tok;
  };
  auto to_size = [&](const std::string& tok) {
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw fail("bad header field '" + tok + "'");
    }
    return static_cast<std::size_t>(std::stoull(tok));
  };

  Netpbm img;
  img.magic = next_token();
  if (img.magic != expected_magic) {
    throw fail("expected " + std::string(expected_magic) + ", found '" + img.magic + "'");
  }
  img.width = to_size(next_token());
  img.height = to_size(next_token());
  const std::size_t maxval = to_size(next_token());
  if (maxval != 255) throw fail("maxval must be 255");
  if (img.width == 0 || img.height == 0) throw fail("zero image dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing raster separator");
  ++pos;
  const std::size_t need = img.width * img.height * channels;
  if (bytes.size() - pos < need) throw fail("truncated raster");
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

std::vector<unsigned char> header(std::string_view magic, std::size_t w, std::size_t h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

}  // namespace

Frame read_ppm(const fs::path& path) {
  Netpbm img = read_netpbm(path, "P6", 3);
  Frame f(img.width, img.height);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    f.pixels[i] = Rgb{img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]};
  }
  return f;
}

std::vector<unsigned char> encode_ppm(const Frame& frame) {
  std::vector<unsigned char> out = header("P6", frame.width, frame.height);
  out.reserve(out.size() + frame.pixels.size() * 3);
  for (const Rgb& p : frame.pixels) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

void write_ppm(const fs::path& path, const Frame& frame) { csv::write_atomic_binary(path, encode_ppm(frame)); }

Mask read_pgm_mask(const fs::path& path) {
  Netpbm img = read_netpbm(path, "P5", 1);
  Mask m(img.width, img.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = img.data[i] != 0 ? 1 : 0;
  return m;
}

void write_pgm_mask(const fs::path& path, const Mask& mask) {
  std::vector<unsigned char> out = header("P5", mask.width, mask.height);
  for (auto b : mask.bits) out.push_back(b ? 255 : 0);
  csv::write_atomic_binary(path, out);
}

}  // namespace plantcast
