#include "fedem/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedem {
namespace {

unsigned char to_byte(double v) {
  if (v < 0) v = 0;
  if (v > 1) v = 1;
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

void write_netpbm(const std::string& path, const char* magic, const std::vector<double>& px,
                  std::size_t h, std::size_t w, std::size_t channels) {
  if (px.size() != h * w * channels)
    throw std::invalid_argument("image buffer size does not match geometry: " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << magic << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> bytes(px.size());
  // Planar in, interleaved out.
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        bytes[(y * w + x) * channels + c] = to_byte(px[c * h * w + y * w + x]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace

void write_pgm(const std::string& path, const std::vector<double>& pixels, std::size_t height,
               std::size_t width) {
  write_netpbm(path, "P5", pixels, height, width, 1);
}

void write_ppm(const std::string& path, const std::vector<double>& planar, std::size_t height,
               std::size_t width) {
  write_netpbm(path, "P6", planar, height, width, 3);
}

void write_image(const std::string& path_base, const std::vector<double>& planar,
                 std::size_t channels, std::size_t height, std::size_t width) {
  if (channels == 1) write_pgm(path_base + ".pgm", planar, height, width);
  else if (channels == 3) write_ppm(path_base + ".ppm", planar, height, width);
  else throw std::invalid_argument("write_image: unsupported channel count");
}

bool make_dirs(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
  return true;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fedem
