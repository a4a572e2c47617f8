#include "specprint/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "specprint/error.hpp"

namespace specprint {

namespace {

// Header fields of a PNM file: magic, then width, height, maxval separated by whitespace
// with '#' comments; exactly one whitespace byte before the raster.
struct PnmHeader {
  int channels = 0;
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(std::string_view b) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6'))
    throw DataError("malformed image header: expected P5 or P6 magic");
  PnmHeader h;
  h.channels = b[1] == '5' ? 1 : 3;
  std::size_t i = 2;
  std::size_t fields[3];
  for (auto& f : fields) {
    for (;;) {
      if (i >= b.size()) throw DataError("malformed image header: truncated");
      if (b[i] == '#') {
        while (i < b.size() && b[i] != '\n') ++i;
      } else if (std::isspace(static_cast<unsigned char>(b[i]))) {
        ++i;
      } else {
        break;
      }
    }
    const std::size_t start = i;
    while (i < b.size() && std::isdigit(static_cast<unsigned char>(b[i]))) ++i;
    if (i == start) throw DataError("malformed image header: expected a number");
    const auto [p, ec] = std::from_chars(b.data() + start, b.data() + i, f);
    if (ec != std::errc() || f > 1'000'000) throw DataError("malformed image header: number out of range");
  }
  if (i >= b.size() || !std::isspace(static_cast<unsigned char>(b[i])))
    throw DataError("malformed image header: missing separator before raster");
  h.width = fields[0];
  h.height = fields[1];
  if (h.width == 0 || h.height == 0) throw DataError("malformed image header: zero dimension");
  if (fields[2] == 0 || fields[2] > 255)
    throw DataError("unsupported maxval " + std::to_string(fields[2]) + " (8-bit images only)");
  h.maxval = static_cast<unsigned>(fields[2]);
  h.data_offset = i + 1;
  return h;
}

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view b, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return static_cast<T>(v);
}

bool is_image(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm";
}

}  // namespace

Tensor3 decode_image(std::string_view bytes) {
  const PnmHeader h = parse_pnm_header(bytes);
  const std::size_t n = h.width * h.height * static_cast<std::size_t>(h.channels);
  if (bytes.size() - h.data_offset < n)
    throw DataError("truncated image payload: expected " + std::to_string(n) + " bytes, found " +
                    std::to_string(bytes.size() - h.data_offset));
  Tensor3 img(static_cast<std::size_t>(h.channels), h.height, h.width);
  const double inv = 1.0 / static_cast<double>(h.maxval);
  for (std::size_t y = 0; y < h.height; ++y)
    for (std::size_t x = 0; x < h.width; ++x)
      for (std::size_t c = 0; c < static_cast<std::size_t>(h.channels); ++c) {
        const auto v = static_cast<unsigned char>(bytes[h.data_offset + (y * h.width + x) * h.channels + c]);
        if (v > h.maxval) throw DataError("pixel value exceeds maxval");
        img.at(c, y, x) = v * inv;
      }
  return img;
}

Tensor3 load_image(const fs::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string encode_image(const Tensor3& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw DataError("images must have 1 or 3 channels, got " + std::to_string(img.channels()));
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) {
        const double v = img.at(c, y, x);
        if (!std::isfinite(v)) throw DataError("cannot save a non-finite pixel");
        const double q = std::floor(255.0 * std::clamp(v, 0.0, 1.0) + 0.5);
        out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
      }
  return out;
}

void save_image(const Tensor3& img, const fs::path& path) { write_file(path, encode_image(img)); }

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Tensor3> load_images(const fs::path& dir) {
  std::vector<Tensor3> out;
  for (const auto& p : list_images(dir)) out.push_back(load_image(p));
  if (out.empty()) throw DataError("no .pgm or .ppm images in " + dir.string());
  return out;
}

std::vector<fs::path> list_image_sets(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && !list_images(e.path()).empty()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t TensorFile::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

TensorFile TensorFile::from(const Tensor3& t) {
  return {DType::f64,
          {static_cast<std::uint32_t>(t.channels()), static_cast<std::uint32_t>(t.height()),
           static_cast<std::uint32_t>(t.width())},
          t.storage()};
}

TensorFile TensorFile::from(const Matrix& m) {
  return {DType::f64, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
          std::vector<double>(m.values().begin(), m.values().end())};
}

TensorFile TensorFile::from(std::vector<double> v) {
  const auto n = static_cast<std::uint32_t>(v.size());
  return {DType::f64, {n}, std::move(v)};
}

Tensor3 TensorFile::to_tensor3() const {
  if (dims.size() != 3) throw DataError("expected a rank-3 tensor, got rank " + std::to_string(dims.size()));
  return Tensor3(dims[0], dims[1], dims[2], values);
}

Matrix TensorFile::to_matrix() const {
  if (dims.size() != 2) throw DataError("expected a rank-2 tensor, got rank " + std::to_string(dims.size()));
  return Matrix(dims[0], dims[1], values);
}

std::string encode_tensor(const TensorFile& t) {
  if (t.dims.size() > 255) throw DataError("tensor rank above 255");
  if (t.values.size() != t.element_count()) throw DataError("tensor values do not match its dims");
  std::string out = "FPT1";
  out.push_back(static_cast<char>(t.dtype));
  out.push_back(static_cast<char>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint32_t>(out, d);
  for (double v : t.values) {
    if (t.dtype == DType::f64)
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    else
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

TensorFile decode_tensor(std::string_view b) {
  if (b.size() < 6 || b.substr(0, 4) != "FPT1") throw DataError("bad magic: not a tensor file");
  TensorFile t;
  const auto code = static_cast<unsigned char>(b[4]);
  if (code > 1) throw DataError("unknown dtype code " + std::to_string(code));
  t.dtype = static_cast<DType>(code);
  const std::size_t rank = static_cast<unsigned char>(b[5]);
  if (b.size() < 6 + 4 * rank) throw DataError("length mismatch: truncated tensor dims");
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    t.dims.push_back(get_le<std::uint32_t>(b, 6 + 4 * i));
    count *= t.dims.back();
    if (count > (std::uint64_t{1} << 40)) throw DataError("dim overflow: tensor too large");
  }
  const std::size_t width = t.dtype == DType::f64 ? 8 : 4;
  const std::size_t offset = 6 + 4 * rank;
  if (b.size() - offset != count * width)
    throw DataError("length mismatch: payload has " + std::to_string(b.size() - offset) + " bytes, dims need " +
                    std::to_string(count * width));
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    t.values[i] = t.dtype == DType::f64
                      ? std::bit_cast<double>(get_le<std::uint64_t>(b, offset + 8 * i))
                      : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(b, offset + 4 * i)));
  return t;
}

void save_tensor(const TensorFile& t, const fs::path& path) { write_file(path, encode_tensor(t)); }

TensorFile load_tensor(const fs::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("not a number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace specprint
