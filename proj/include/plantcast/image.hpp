#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "plantcast/timeutil.hpp"

namespace plantcast {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major RGB image; pixels.size() == width * height.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;
  Timestamp timestamp{};

  Frame() = default;
  Frame(std::size_t w, std::size_t h, Rgb fill = {});

  Rgb& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  const Rgb& at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// Binary membership mask, one byte per pixel (0 or 1).
struct Mask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t w, std::size_t h, bool fill = false);

  bool test(std::size_t row, std::size_t col) const { return bits[row * width + col] != 0; }
  void set(std::size_t row, std::size_t col, bool on = true) { bits[row * width + col] = on ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

// Binary PPM (P6, maxval 255).
Frame read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Frame& frame);
std::vector<unsigned char> encode_ppm(const Frame& frame);

// Binary PGM (P5, maxval 255); any nonzero sample is a member.
Mask read_pgm_mask(const std::filesystem::path& path);
void write_pgm_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace plantcast
