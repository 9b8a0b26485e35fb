// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "krnet/experiment/datasets.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace krnet::experiment {

namespace {

constexpr SampleId kTestIdOffset = 1000000;

}  // namespace

FeatureCorpus make_synthetic_features(const SyntheticFeatureSpec& spec) {
  if (spec.samples == 0 || spec.classes == 0 || spec.shape.numel() == 0) {
    throw ValidationError("synthetic feature spec needs samples, classes and a non-empty shape");
  }
  if (spec.zero_fraction < 0.0 || spec.zero_fraction >= 1.0) {
    throw ValidationError("zero_fraction must lie in [0, 1)");
  }
  const std::size_t d = spec.shape.numel();
  nn::Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> basis(spec.rank * d);
  for (auto& v : basis) v = normal(rng);
  std::vector<double> means(spec.classes * d);
  for (auto& v : means) v = spec.class_spread * normal(rng);

  std::vector<double> raw(spec.samples * d);
  FeatureCorpus corpus;
  corpus.ids.resize(spec.samples);
  corpus.labels.resize(spec.samples);
  std::vector<double> coeff(spec.rank);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = i % spec.classes;
    corpus.ids[i] = i;
    corpus.labels[i] = static_cast<ClassLabel>(c);
    for (auto& a : coeff) a = spec.sample_spread * normal(rng);
    double* row = raw.data() + i * d;
    for (std::size_t k = 0; k < d; ++k) {
      double v = means[c * d + k] + spec.noise * normal(rng);
      for (std::size_t r = 0; r < spec.rank; ++r) v += coeff[r] * basis[r * d + k];
      row[k] = v;
    }
  }

  // Shift so the requested fraction falls below zero, rectify, scale to [0, 1].
  std::vector<double> sorted = raw;
  const auto q = static_cast<std::ptrdiff_t>(spec.zero_fraction * static_cast<double>(sorted.size()));
  std::nth_element(sorted.begin(), sorted.begin() + q, sorted.end());
  const double shift = spec.zero_fraction > 0.0 ? sorted[static_cast<std::size_t>(q)] : *std::min_element(raw.begin(), raw.end());
  double top = 0.0;
  for (auto& v : raw) {
    v = std::max(0.0, v - shift);
    top = std::max(top, v);
  }
  corpus.features = Tensor<float>(spec.shape.batch_shape(spec.samples));
  for (std::size_t i = 0; i < raw.size(); ++i) corpus.features[i] = static_cast<float>(top > 0.0 ? raw[i] / top : 0.0);
  return corpus;
}

ImageSet ImageSet::subset(std::span<const std::size_t> rows) const {
  ImageSet out;
  out.images = gather_rows(images, rows);
  for (std::size_t r : rows) {
    out.ids.push_back(ids.at(r));
    out.labels.push_back(labels.at(r));
  }
  return out;
}

ImageSet ImageSet::filter_classes(std::span<const ClassLabel> classes) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) rows.push_back(i);
  }
  return subset(rows);
}

ImageDataset make_synthetic_images(const SyntheticImageSpec& spec) {
  if (spec.classes == 0 || spec.train_per_class == 0 || spec.size == 0 || spec.channels == 0) {
    throw ValidationError("synthetic image spec needs classes, samples and a non-empty image");
  }
  const std::size_t s = spec.size;
  const std::size_t plane = s * s;
  const std::size_t numel = spec.channels * plane;
  nn::Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> prototypes(spec.classes * numel, 0.0);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (int blob = 0; blob < 3; ++blob) {
      const double cy = unit(rng) * static_cast<double>(s);
      const double cx = unit(rng) * static_cast<double>(s);
      const double sigma = 1.5 + 2.5 * unit(rng);
      for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        const double amp = 2.0 * unit(rng) - 1.0;
        for (std::size_t y = 0; y < s; ++y) {
          for (std::size_t x = 0; x < s; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            prototypes[c * numel + ch * plane + y * s + x] += amp * std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
          }
        }
      }
    }
  }

  std::uniform_int_distribution<int> shift(-static_cast<int>(spec.max_shift), static_cast<int>(spec.max_shift));
  auto draw = [&](std::size_t per_class, SampleId id_base) {
    ImageSet set;
    const std::size_t n = per_class * spec.classes;
    set.images = Tensor<float>({n, spec.channels, s, s});
    set.ids.resize(n);
    set.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % spec.classes;
      set.ids[i] = id_base + i;
      set.labels[i] = static_cast<ClassLabel>(c);
      const int sy = shift(rng);
      const int sx = shift(rng);
      const double amp = 0.7 + 0.6 * unit(rng);
      float* out = set.images.data() + i * numel;
      for (std::size_t ch = 0; ch < spec.channels; ++ch) {
        for (std::size_t y = 0; y < s; ++y) {
          for (std::size_t x = 0; x < s; ++x) {
            const long py = static_cast<long>(y) - sy;
            const long px = static_cast<long>(x) - sx;
            double v = 0.0;
            if (py >= 0 && px >= 0 && py < static_cast<long>(s) && px < static_cast<long>(s)) {
              v = amp * prototypes[c * numel + ch * plane + static_cast<std::size_t>(py) * s + static_cast<std::size_t>(px)];
            }
            v += spec.noise * normal(rng);
            out[ch * plane + y * s + x] = static_cast<float>(std::clamp(0.5 + 0.5 * v, 0.0, 1.0));
          }
        }
      }
    }
    return set;
  };

  ImageDataset ds;
  ds.name = "synthetic-images";
  ds.num_classes = spec.classes;
  ds.image_size = s;
  ds.train = draw(spec.train_per_class, 0);
  ds.test = draw(spec.test_per_class, kTestIdOffset);
  return ds;
}

namespace {

ImageSet read_cifar_file(const std::filesystem::path& path, SampleId id_base) {
  constexpr std::size_t kRecord = 2 + 3072;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing CIFAR-100 file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kRecord != 0) {
    throw ValidationError(path.string() + " is not a CIFAR-100 binary file (size " + std::to_string(bytes.size()) + ")");
  }
  const std::size_t n = bytes.size() / kRecord;
  ImageSet set;
  set.images = Tensor<float>({n, 3, 32, 32});
  set.ids.resize(n);
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kRecord;
    set.ids[i] = id_base + i;
    set.labels[i] = rec[1];
    for (std::size_t k = 0; k < 3072; ++k) set.images[i * 3072 + k] = static_cast<float>(rec[2 + k]) / 255.0f;
  }
  return set;
}

}  // namespace

ImageDataset load_cifar100(const std::filesystem::path& root) {
  ImageDataset ds;
  ds.name = "cifar100";
  ds.num_classes = 100;
  ds.image_size = 32;
  ds.train = read_cifar_file(root / "train.bin", 0);
  ds.test = read_cifar_file(root / "test.bin", kTestIdOffset);
  return ds;
}

void write_imagenet_subset_manifest(const std::filesystem::path& root, std::size_t num_classes, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root / "train")) throw ValidationError("no train/ directory under " + root.string());
  std::vector<std::string> wnids;
  for (const auto& entry : fs::directory_iterator(root / "train")) {
    if (entry.is_directory()) wnids.push_back(entry.path().filename().string());
  }
  std::sort(wnids.begin(), wnids.end());
  if (wnids.size() < num_classes) {
    throw ValidationError("requested " + std::to_string(num_classes) + " classes but found " +
                          std::to_string(wnids.size()));
  }
  nn::Rng rng(seed);
  std::shuffle(wnids.begin(), wnids.end(), rng);
  wnids.resize(num_classes);
  fs::create_directories(out_dir);
  for (const std::string split : {"train", "val"}) {
    std::ofstream out(out_dir / (split + ".txt"));
    if (!out) throw RuntimeFailure("cannot write manifest in " + out_dir.string());
    for (std::size_t c = 0; c < wnids.size(); ++c) {
      const fs::path dir = root / split / wnids[c];
      if (!fs::is_directory(dir)) throw ValidationError("missing class directory " + dir.string());
      std::vector<std::string> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), root).generic_string());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out << f << ' ' << c << '\n';
    }
  }
  std::ofstream classes(out_dir / "classes.txt");
  for (const auto& w : wnids) classes << w << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.path >> e.label)) throw ValidationError("malformed manifest line: " + line);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void on_jpeg_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  std::longjmp(err->jump, 1);
}

// Decoded RGB image, HWC bytes.
struct RgbImage {
  std::size_t height = 0, width = 0;
  std::vector<unsigned char> pixels;
};

RgbImage decode_jpeg(const std::filesystem::path& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (file == nullptr) throw ValidationError("cannot open image " + path.string());
  jpeg_decompress_struct info{};
  JpegError err{};
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  RgbImage img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    std::fclose(file);
    throw ValidationError("corrupt JPEG " + path.string());
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file);
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  img.height = info.output_height;
  img.width = info.output_width;
  img.pixels.resize(img.height * img.width * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = img.pixels.data() + static_cast<std::size_t>(info.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  std::fclose(file);
  return img;
}

}  // namespace

Tensor<float> load_jpeg_center_crop(const std::filesystem::path& path, std::size_t resize, std::size_t crop) {
  if (crop == 0 || crop > resize) throw ValidationError("center crop must be in (0, resize]");
  const RgbImage img = decode_jpeg(path);
  const double scale = static_cast<double>(resize) / static_cast<double>(std::min(img.height, img.width));
  const auto out_h = std::max<std::size_t>(resize, static_cast<std::size_t>(std::lround(img.height * scale)));
  const auto out_w = std::max<std::size_t>(resize, static_cast<std::size_t>(std::lround(img.width * scale)));
  const std::size_t top = (out_h - crop) / 2;
  const std::size_t left = (out_w - crop) / 2;
  Tensor<float> out({3, crop, crop});
  for (std::size_t y = 0; y < crop; ++y) {
    const double sy = std::clamp((static_cast<double>(y + top) + 0.5) / scale - 0.5, 0.0, img.height - 1.0);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < crop; ++x) {
      const double sx = std::clamp((static_cast<double>(x + left) + 0.5) / scale - 0.5, 0.0, img.width - 1.0);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        auto px = [&](std::size_t yy, std::size_t xx) { return img.pixels[(yy * img.width + xx) * 3 + c] / 255.0; };
        const double v = (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) + fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
        out[(c * crop + y) * crop + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

ImageDataset load_imagenet_subset(const std::filesystem::path& root, const std::filesystem::path& manifest_dir,
                                  std::size_t image_size, std::size_t max_per_class) {
  const std::size_t resize = image_size * 8 / 7;
  auto load = [&](const std::string& split, SampleId id_base) {
    auto entries = read_manifest(manifest_dir / (split + ".txt"));
    if (max_per_class > 0) {
      std::map<ClassLabel, std::size_t> seen;
      std::erase_if(entries, [&](const ManifestEntry& e) { return ++seen[e.label] > max_per_class; });
    }
    ImageSet set;
    set.images = Tensor<float>({entries.size(), 3, image_size, image_size});
    const std::size_t numel = 3 * image_size * image_size;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Tensor<float> img = load_jpeg_center_crop(root / entries[i].path, resize, image_size);
      std::copy(img.storage().begin(), img.storage().end(), set.images.data() + i * numel);
      set.ids.push_back(id_base + i);
      set.labels.push_back(entries[i].label);
    }
    return set;
  };
  ImageDataset ds;
  ds.name = "imagenet-subset";
  ds.image_size = image_size;
  ds.train = load("train", 0);
  ds.test = load("val", kTestIdOffset);
  ClassLabel top = -1;
  for (ClassLabel l : ds.train.labels) top = std::max(top, l);
  ds.num_classes = static_cast<std::size_t>(top + 1);
  return ds;
}

void augment_pad_crop_flip(Tensor<float>& batch, std::size_t pad, nn::Rng& rng) {
  if (batch.rank() != 4) throw ValidationError("augmentation expects [B, C, H, W]");
  const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  std::uniform_int_distribution<int> offset(0, static_cast<int>(2 * pad));
  std::bernoulli_distribution flip(0.5);
  std::vector<float> src(c * h * w);
  for (std::size_t i = 0; i < n; ++i) {
    float* img = batch.data() + i * c * h * w;
    std::copy_n(img, src.size(), src.data());
    const long oy = offset(rng) - static_cast<long>(pad);
    const long ox = offset(rng) - static_cast<long>(pad);
    const bool mirror = flip(rng);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const long sy = static_cast<long>(y) + oy;
          long sx = static_cast<long>(x) + ox;
          if (mirror) sx = static_cast<long>(w) - 1 - sx;
          const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<long>(h) && sx < static_cast<long>(w);
          img[(ch * h + y) * w + x] =
              inside ? src[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] : 0.0f;
        }
      }
    }
  }
}

}  // namespace krnet::experiment
