#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedem {

/// Writes pixels in [0,1] as binary PGM (1 channel) or PPM (3 channels,
/// planar input). Values are clamped then rounded to a byte.
void write_pgm(const std::string& path, const std::vector<double>& pixels, std::size_t height,
               std::size_t width);
void write_ppm(const std::string& path, const std::vector<double>& planar, std::size_t height,
               std::size_t width);

/// Routes to PGM or PPM by channel count.
void write_image(const std::string& path_base, const std::vector<double>& planar,
                 std::size_t channels, std::size_t height, std::size_t width);

bool make_dirs(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace fedem
