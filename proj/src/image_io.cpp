#include "nasaswin/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace nasaswin {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor from_interleaved(const std::vector<unsigned char>& px, std::size_t h, std::size_t w, std::size_t channels) {
  std::vector<double> out(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = channels >= 3 ? c : 0;
        out[(c * h + y) * w + x] = px[(y * w + x) * channels + src] / 255.0;
      }
  return Tensor::from({3, h, w}, std::move(out));
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Tensor read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IngestionError("cannot open image " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestionError("libpng initialization failed");
  }
  std::vector<unsigned char> px;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestionError("cannot decode PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t channels = png_get_channels(png, info);
  px.resize(h * w * channels);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = px.data() + y * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (h == 0 || w == 0) throw IngestionError("empty image " + path.string());
  return from_interleaved(px, h, w, channels);
}

void write_png(const std::filesystem::path& path, const std::vector<unsigned char>& px, std::size_t h, std::size_t w,
               int color_type, std::size_t channels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IngestionError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IngestionError("libpng initialization failed");
  }
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IngestionError("cannot encode PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(px.data() + y * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comments in a netpbm header.
std::size_t read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  std::size_t v = 0;
  if (!(in >> v)) throw IngestionError("malformed PNM header");
  return v;
}

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open image " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6" && magic != "P5") throw IngestionError("unsupported PNM type in " + path.string());
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const std::size_t w = read_pnm_int(in);
  const std::size_t h = read_pnm_int(in);
  const std::size_t maxval = read_pnm_int(in);
  if (maxval != 255 || w == 0 || h == 0) throw IngestionError("only non-empty 8-bit PNM supported: " + path.string());
  in.get();
  std::vector<unsigned char> px(h * w * channels);
  if (!in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()))) {
    throw IngestionError("truncated PNM " + path.string());
  }
  return from_interleaved(px, h, w, channels);
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw IngestionError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Tensor& rgb) {
  if (rgb.dim() != 3 || rgb.size(0) != 3) throw DimensionError("write_image expects [3,h,w], got " + to_string(rgb.shape()));
  const std::size_t h = rgb.size(1), w = rgb.size(2);
  auto d = rgb.data();
  std::vector<unsigned char> px(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) px[i * 3 + c] = to_byte(d[c * h * w + i]);
  const auto ext = lower_ext(path);
  if (ext == ".png") {
    write_png(path, px, h, w, PNG_COLOR_TYPE_RGB, 3);
  } else if (ext == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
    out << "P6\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  } else {
    throw IngestionError("unsupported output format: " + path.string());
  }
}

void write_pgm_heatmap(const std::filesystem::path& path, const Tensor& map) {
  if (map.dim() != 2) throw DimensionError("heatmap expects [h,w], got " + to_string(map.shape()));
  const std::size_t h = map.size(0), w = map.size(1);
  auto d = map.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double span = *hi - *lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  out << "P5\n" << w << ' ' << h << "\n255\n";
  for (double v : d) {
    const double t = span > 0.0 ? (v - *lo) / span : 0.0;
    out.put(static_cast<char>(to_byte(t)));
  }
}

}  // namespace nasaswin
