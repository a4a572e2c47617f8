#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specprint/tensor.hpp"

namespace specprint {

namespace fs = std::filesystem;

/// Binary PGM (P5, one channel) or PPM (P6, RGB), maxval 1..255. Values become v / maxval.
Tensor3 load_image(const fs::path& path);
Tensor3 decode_image(std::string_view bytes);
/// One channel writes P5, three write P6; values are clamped to [0, 1] and stored as
/// floor(255 v + 0.5).
void save_image(const Tensor3& img, const fs::path& path);
std::string encode_image(const Tensor3& img);

/// Every .pgm/.ppm file directly inside `dir`, sorted by file name.
std::vector<fs::path> list_images(const fs::path& dir);
std::vector<Tensor3> load_images(const fs::path& dir);
/// Subdirectories of `dir` that contain images, sorted by name.
std::vector<fs::path> list_image_sets(const fs::path& dir);

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

/// "FPT1", dtype byte, rank byte, rank x u32 dims, row-major payload; all little endian.
struct TensorFile {
  DType dtype = DType::f64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  std::size_t element_count() const;
  static TensorFile from(const Tensor3& t);
  static TensorFile from(const Matrix& m);
  static TensorFile from(std::vector<double> v);
  Tensor3 to_tensor3() const;
  Matrix to_matrix() const;
};

std::string encode_tensor(const TensorFile& t);
TensorFile decode_tensor(std::string_view bytes);
void save_tensor(const TensorFile& t, const fs::path& path);
TensorFile load_tensor(const fs::path& path);

std::string read_file(const fs::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_file(const fs::path& path, std::string_view bytes);

/// Shortest representation that reads back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Comma-separated cells; no quoting (callers never write commas inside cells).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace specprint
