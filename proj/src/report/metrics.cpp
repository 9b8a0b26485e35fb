// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/report/metrics.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "krnet/error.hpp"

namespace krnet::report {

ReconstructionMetrics reconstruction_metrics(const FeatureCorpus& replayed, const FeatureCorpus& original) {
  replayed.validate();
  original.validate();
  if (replayed.size() != original.size()) {
    throw ValidationError("corpus misalignment: " + std::to_string(replayed.size()) + " replayed vs " +
                          std::to_string(original.size()) + " original samples");
  }
  if (!replayed.empty() && replayed.feature_shape() != original.feature_shape()) {
    throw ValidationError("corpus misalignment: feature shapes " + replayed.feature_shape().to_string() + " and " +
                          original.feature_shape().to_string());
  }
  std::unordered_map<SampleId, std::size_t> row;
  for (std::size_t i = 0; i < original.size(); ++i) row[original.ids[i]] = i;
  ReconstructionMetrics m;
  m.samples = replayed.size();
  if (m.samples == 0) return m;
  const std::size_t d = original.features.row_size();
  std::map<ClassLabel, std::pair<double, std::size_t>> per_class;
  double total = 0.0;
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    const auto it = row.find(replayed.ids[i]);
    if (it == row.end()) {
      throw ValidationError("corpus misalignment: sample " + std::to_string(replayed.ids[i]) + " has no original");
    }
    const float* a = replayed.features.data() + i * d;
    const float* b = original.features.data() + it->second * d;
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
      acc += diff * diff;
      m.max_abs_error = std::max(m.max_abs_error, std::abs(diff));
    }
    total += acc;
    auto& cls = per_class[original.labels[it->second]];
    cls.first += acc;
    cls.second += d;
  }
  m.mse = total / static_cast<double>(m.samples * d);
  for (const auto& [label, acc] : per_class) m.per_class_mse[label] = acc.first / static_cast<double>(acc.second);
  return m;
}

void write_reconstruction_csv(const ReconstructionMetrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", metrics.mse);
  out << "class,samples,mse\n";
  out << "all," << metrics.samples << ',' << buf << '\n';
  for (const auto& [label, mse] : metrics.per_class_mse) {
    std::snprintf(buf, sizeof(buf), "%.9g", mse);
    out << label << ",," << buf << '\n';
  }
}

void write_curves_csv(const std::vector<AccuracyCurve>& curves, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "method,step,classes_seen,accuracy\n";
  char buf[32];
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      std::snprintf(buf, sizeof(buf), "%.6f", p.accuracy);
      out << c.method << ',' << p.step << ',' << p.classes_seen << ',' << buf << '\n';
    }
  }
}

std::vector<AccuracyCurve> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "method,step,classes_seen,accuracy") throw ValidationError("unexpected curve header in " + path.string());
  std::vector<AccuracyCurve> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream s(line);
    std::string method, step, seen, acc;
    if (!std::getline(s, method, ',') || !std::getline(s, step, ',') || !std::getline(s, seen, ',') ||
        !std::getline(s, acc)) {
      throw ValidationError("malformed curve row: " + line);
    }
    if (out.empty() || out.back().method != method) out.push_back({method, {}});
    out.back().points.push_back({std::stoul(step), std::stoul(seen), std::stod(acc)});
  }
  return out;
}

namespace {

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h) : w_(w), h_(h), px_(w * h * 3, 255) {}

  void set(long x, long y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(w_) || y >= static_cast<long>(h_)) return;
    std::copy(c.begin(), c.end(), px_.begin() + static_cast<std::ptrdiff_t>((y * w_ + x) * 3));
  }

  void dot(long x, long y, const Rgb& c, int r) {
    for (long dy = -r; dy <= r; ++dy)
      for (long dx = -r; dx <= r; ++dx) set(x + dx, y + dy, c);
  }

  // Bresenham, drawn two pixels wide.
  void line(long x0, long y0, long x1, long y1, const Rgb& c) {
    const long dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const long dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
      set(x0, y0, c);
      set(x0 + 1, y0, c);
      set(x0, y0 + 1, c);
      if (x0 == x1 && y0 == y1) break;
      const long e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void write(const std::filesystem::path& path) const {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (fp == nullptr) throw RuntimeFailure("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png == nullptr ? nullptr : png_create_info_struct(png);
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw RuntimeFailure("libpng failed while writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < h_; ++y) {
      png_write_row(png, const_cast<png_bytep>(px_.data() + y * w_ * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }

 private:
  std::size_t w_, h_;
  std::vector<std::uint8_t> px_;
};

constexpr std::array<Rgb, 8> kPalette{{{31, 119, 180},
                                      {255, 127, 14},
                                      {44, 160, 44},
                                      {214, 39, 40},
                                      {148, 103, 189},
                                      {140, 86, 75},
                                      {227, 119, 194},
                                      {127, 127, 127}}};

}  // namespace

void plot_curves_png(const std::vector<AccuracyCurve>& curves, const std::filesystem::path& path, std::size_t width,
                     std::size_t height) {
  if (width < 64 || height < 64) throw ValidationError("plot must be at least 64x64 pixels");
  Canvas canvas(width, height);
  const long left = 48, right = static_cast<long>(width) - 16, top = 16, bottom = static_cast<long>(height) - 40;
  const Rgb axis{0, 0, 0}, grid{225, 225, 225};
  for (int k = 1; k <= 4; ++k) {
    const long y = bottom - (bottom - top) * k / 4;
    canvas.line(left, y, right, y, grid);
  }
  canvas.line(left, bottom, right, bottom, axis);
  canvas.line(left, top, left, bottom, axis);

  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      lo = std::min(lo, p.classes_seen);
      hi = std::max(hi, p.classes_seen);
    }
  if (lo == SIZE_MAX) lo = hi = 0;
  const double span = hi > lo ? static_cast<double>(hi - lo) : 1.0;
  auto px = [&](std::size_t seen) {
    return left + static_cast<long>(std::lround((static_cast<double>(seen - lo) / span) * (right - left)));
  };
  auto py = [&](double acc) {
    return bottom - static_cast<long>(std::lround(std::clamp(acc, 0.0, 1.0) * (bottom - top)));
  };
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const Rgb& colour = kPalette[i % kPalette.size()];
    const auto& pts = curves[i].points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      canvas.dot(px(pts[k].classes_seen), py(pts[k].accuracy), colour, 3);
      if (k > 0) {
        canvas.line(px(pts[k - 1].classes_seen), py(pts[k - 1].accuracy), px(pts[k].classes_seen),
                    py(pts[k].accuracy), colour);
      }
    }
    // key swatch
    for (long x = 0; x < 18; ++x)
      for (long y = 0; y < 8; ++y) canvas.set(left + 8 + x, top + 8 + static_cast<long>(i) * 14 + y, colour);
  }
  canvas.write(path);
}

}  // namespace krnet::report
