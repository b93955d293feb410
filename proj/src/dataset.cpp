#include "nasaswin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "nasaswin/parallel.hpp"

namespace nasaswin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::vector<std::string> DatasetManifest::sources() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (std::find(out.begin(), out.end(), e.source) == out.end()) out.push_back(e.source);
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  DatasetManifest m;
  m.split = split;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cols = split_csv(line);
    if (!header_seen) {
      if (cols.size() != 3 || cols[0] != "path" || cols[1] != "label" || cols[2] != "source") {
        throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": expected header 'path,label,source'");
      }
      header_seen = true;
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (cols.size() != 3) throw IngestionError(where + "expected 3 columns");
    if (cols[1] != "0" && cols[1] != "1") throw IngestionError(where + "label must be 0 or 1, got '" + cols[1] + "'");
    if (cols[2].empty()) throw IngestionError(where + "empty source tag");
    std::filesystem::path p = cols[0];
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) throw IngestionError(where + "missing file " + p.string());
    if (!seen.insert(p.lexically_normal().string()).second) ++m.duplicate_paths;
    m.entries.push_back({p, cols[1] == "1" ? 1 : 0, cols[2]});
  }
  if (m.entries.empty()) throw IngestionError("empty manifest: " + path.string());
  return m;
}

ImageRecord load_record(const ManifestEntry& entry) {
  ImageRecord r;
  r.rgb = read_image(entry.path);
  r.label = entry.label;
  r.source = entry.source;
  r.stem = entry.path.stem().string();
  return r;
}

Tensor center_crop_square(const Tensor& rgb) {
  if (rgb.dim() != 3) throw DimensionError("center_crop_square expects [c,h,w], got " + to_string(rgb.shape()));
  const std::size_t c = rgb.size(0), h = rgb.size(1), w = rgb.size(2);
  if (h == 0 || w == 0) throw IngestionError("image must be at least 1x1");
  const std::size_t side = std::min(h, w);
  const std::size_t oy = (h - side) / 2, ox = (w - side) / 2;
  if (side == h && side == w) return rgb;
  auto d = rgb.data();
  std::vector<double> out(c * side * side);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) out[(ch * side + y) * side + x] = d[(ch * h + oy + y) * w + ox + x];
  return Tensor::from({c, side, side}, std::move(out));
}

Tensor resize_bilinear(const Tensor& img, std::size_t height, std::size_t width) {
  if (img.dim() != 3) throw DimensionError("resize_bilinear expects [c,h,w], got " + to_string(img.shape()));
  const std::size_t c = img.size(0), h = img.size(1), w = img.size(2);
  if (h == height && w == width) return img;
  auto d = img.data();
  const double sy = static_cast<double>(h) / static_cast<double>(height);
  const double sx = static_cast<double>(w) / static_cast<double>(width);
  auto coord = [](double pos, std::size_t n, std::size_t& i0, std::size_t& i1, double& t) {
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = std::min(i0 + 1, n - 1);
    t = pos - static_cast<double>(i0);
  };
  std::vector<double> out(c * height * width);
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double ty;
    coord((static_cast<double>(y) + 0.5) * sy - 0.5, h, y0, y1, ty);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double tx;
      coord((static_cast<double>(x) + 0.5) * sx - 0.5, w, x0, x1, tx);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = d.data() + ch * h * w;
        const double top = p[y0 * w + x0] + (p[y0 * w + x1] - p[y0 * w + x0]) * tx;
        const double bot = p[y1 * w + x0] + (p[y1 * w + x1] - p[y1 * w + x0]) * tx;
        out[(ch * height + y) * width + x] = top + (bot - top) * ty;
      }
    }
  }
  return Tensor::from({c, height, width}, std::move(out));
}

FusedInput preprocess(const ImageRecord& record, std::size_t height, std::size_t width, const DenoiserSpec& denoiser) {
  Tensor rgb = resize_bilinear(center_crop_square(record.rgb), height, width);
  Tensor res;
  if (record.residual && record.residual->shape() == rgb.shape()) {
    res = *record.residual;
  } else {
    res = residual(rgb, denoise(rgb, denoiser, record.stem));
  }
  auto rv = rgb.to_vector();
  for (auto& v : rv) v = 2.0 * v - 1.0;
  auto nv = res.to_vector();
  for (auto& v : nv) v = std::clamp(v * kResidualScale, -1.0, 1.0);
  return interleave(Tensor::from(rgb.shape(), std::move(rv)), Tensor::from(res.shape(), std::move(nv)));
}

std::vector<Sample> prepare_samples(const DatasetManifest& manifest, std::size_t height, std::size_t width,
                                    const DenoiserSpec& denoiser, std::size_t workers) {
  std::vector<Sample> out(manifest.entries.size());
  parallel_for(out.size(), workers, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    ImageRecord r = load_record(e);
    out[i] = {preprocess(r, height, width, denoiser), e.label, e.source};
  });
  return out;
}

}  // namespace nasaswin
