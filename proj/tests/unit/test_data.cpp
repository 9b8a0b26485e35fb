// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "krnet/archive.hpp"
#include "krnet/corpus.hpp"
#include "krnet/experiment/datasets.hpp"
#include "krnet/experiment/feature_cache.hpp"
#include "krnet/normalization.hpp"
#include "test_util.hpp"

using namespace krnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("krnet_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_jpeg(const fs::path& path, std::size_t w, std::size_t h, unsigned char base) {
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 100, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<unsigned char> row(w * 3, base);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW r = row.data();
    jpeg_write_scanlines(&cinfo, &r, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("normalisation maps each channel onto [0, 1] and back") {
  Tensor<float> x({2, 2, 1, 2}, {0, 2, 5, 5, 1, 4, 5, 5});
  const auto stats = NormalizationStats::compute(x);
  CHECK(stats.min == std::vector<float>{0, 5});
  CHECK(stats.max == std::vector<float>{4, 5});
  CHECK(stats.scale(1) == 0.0);
  const auto n = stats.normalize(x);
  CHECK(n[0] == 0.0f);
  CHECK(n[1] == doctest::Approx(0.5));
  CHECK(n[5] == doctest::Approx(1.0));
  CHECK(n[2] == 0.0f);  // degenerate channel
  const auto back = stats.denormalize(n);
  CHECK(testing::max_abs_diff(back, x) < 1e-6);
  const auto g = stats.denormalize_grad(Tensor<float>({1, 2, 1, 2}, {1, 1, 1, 1}));
  CHECK(g[0] == doctest::Approx(4.0));
  CHECK(g[2] == 0.0f);
  CHECK(NormalizationStats::from_interleaved(stats.interleaved()).interleaved() == stats.interleaved());
  CHECK(stats.interleaved() == std::vector<float>{0, 4, 5, 5});
}

TEST_CASE("archive round trip and kind checks") {
  const auto dir = scratch("archive");
  Archive a;
  a.add_json("meta.json", {{"x", 1}});
  a.add_floats("w", {2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  a.write(dir / "a.krna");
  const Archive b = Archive::read(dir / "a.krna");
  CHECK(b.json("meta.json")["x"] == 1);
  CHECK(b.floats("w").shape() == Shape{2, 3});
  CHECK(b.floats("w")[5] == 6.0f);
  CHECK_THROWS_AS(b.floats("meta.json"), ValidationError);
  CHECK_THROWS_AS(b.json("missing"), ValidationError);
  std::ofstream(dir / "junk.krna") << "not an archive";
  CHECK_THROWS(Archive::read(dir / "junk.krna"));
  CHECK_THROWS(Archive::read(dir / "absent.krna"));
}

TEST_CASE("corpus subset, filter and merge keep rows aligned") {
  FeatureCorpus c;
  c.features = testing::random_tensor<float>({4, 1, 1, 2}, 3);
  c.ids = {10, 11, 12, 13};
  c.labels = {0, 1, 0, 1};
  c.validate();
  const std::vector<ClassLabel> keep{1};
  const auto odd = c.filter_classes(keep);
  CHECK(odd.ids == std::vector<SampleId>{11, 13});
  CHECK(odd.features[2] == c.features[6]);
  FeatureCorpus other = odd;
  other.ids = {20, 21};
  const auto merged = merge_corpora(c, other);
  CHECK(merged.size() == 6);
  CHECK_THROWS_AS(merge_corpora(c, odd), ValidationError);
  FeatureCorpus dup = c;
  dup.ids[1] = 10;
  CHECK_THROWS_AS(dup.validate(), ValidationError);
}

TEST_CASE("synthetic feature corpus matches its preset") {
  const experiment::SyntheticFeatureSpec spec;
  const auto c = experiment::make_synthetic_features(spec);
  CHECK(c.size() == 2048);
  CHECK(c.feature_shape() == FeatureShape{16, 4, 4});
  std::set<ClassLabel> labels(c.labels.begin(), c.labels.end());
  CHECK(labels.size() == 8);
  CHECK(experiment::zero_fraction(c.features) == doctest::Approx(0.21).epsilon(0.02));
  float lo = 1, hi = 0;
  for (float v : c.features.storage()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == doctest::Approx(1.0));
  const auto again = experiment::make_synthetic_features(spec);
  CHECK(testing::max_abs_diff(again.features, c.features) == 0.0);
}

TEST_CASE("synthetic image dataset layout") {
  experiment::SyntheticImageSpec spec;
  spec.train_per_class = 4;
  spec.test_per_class = 2;
  const auto ds = experiment::make_synthetic_images(spec);
  CHECK(ds.train.images.shape() == Shape{40, 3, 16, 16});
  CHECK(ds.test.size() == 20);
  CHECK(ds.test.ids.front() == 1000000);
  for (float v : ds.train.images.storage()) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
  const std::vector<ClassLabel> two{2, 7};
  CHECK(ds.train.filter_classes(two).size() == 8);
}

TEST_CASE("CIFAR-100 binary reader") {
  const auto dir = scratch("cifar");
  {
    std::ofstream tr(dir / "train.bin", std::ios::binary);
    for (int i = 0; i < 3; ++i) {
      tr.put(1);
      tr.put(static_cast<char>(40 + i));
      for (int k = 0; k < 3072; ++k) tr.put(static_cast<char>(k == 0 ? 255 : 0));
    }
    std::ofstream te(dir / "test.bin", std::ios::binary);
    te.put(0);
    te.put(99);
    for (int k = 0; k < 3072; ++k) te.put(0);
  }
  const auto ds = experiment::load_cifar100(dir);
  CHECK(ds.num_classes == 100);
  CHECK(ds.train.size() == 3);
  CHECK(ds.train.labels == std::vector<ClassLabel>{40, 41, 42});
  CHECK(ds.train.images[0] == 1.0f);
  CHECK(ds.test.labels == std::vector<ClassLabel>{99});
  std::ofstream(dir / "test.bin", std::ios::binary) << "short";
  CHECK_THROWS_AS(experiment::load_cifar100(dir), ValidationError);
  CHECK_THROWS_AS(experiment::load_cifar100(dir / "nowhere"), ValidationError);
}

TEST_CASE("ImageNet subset manifest and centre-crop loader") {
  const auto root = scratch("imagenet");
  const std::vector<std::string> wnids{"n001", "n002", "n003", "n004"};
  for (std::size_t c = 0; c < wnids.size(); ++c) {
    for (const std::string split : {"train", "val"}) {
      fs::create_directories(root / split / wnids[c]);
      write_jpeg(root / split / wnids[c] / "a.JPEG", 20, 12, static_cast<unsigned char>(50 * c));
    }
  }
  const auto out = root / "manifest";
  experiment::write_imagenet_subset_manifest(root, 2, 1993, out);
  const auto train = experiment::read_manifest(out / "train.txt");
  CHECK(train.size() == 2);
  CHECK(train[0].label == 0);
  CHECK(train[1].label == 1);
  experiment::write_imagenet_subset_manifest(root, 2, 1993, root / "again");
  CHECK(experiment::read_manifest(root / "again" / "train.txt")[0].path == train[0].path);
  CHECK_THROWS_AS(experiment::write_imagenet_subset_manifest(root, 9, 1993, out), ValidationError);

  const auto img = experiment::load_jpeg_center_crop(root / "train" / "n003" / "a.JPEG", 9, 8);
  CHECK(img.shape() == Shape{3, 8, 8});
  CHECK(img[0] == doctest::Approx(100.0 / 255.0).epsilon(0.03));
  const auto ds = experiment::load_imagenet_subset(root, out, 8);
  CHECK(ds.num_classes == 2);
  CHECK(ds.train.images.shape() == Shape{2, 3, 8, 8});
  CHECK(ds.test.size() == 2);
}

TEST_CASE("pad-crop-flip augmentation keeps shape and value range") {
  auto batch = testing::random_tensor<float>({3, 2, 6, 6}, 5, 0.0, 1.0);
  const auto before = batch;
  nn::Rng rng(1);
  experiment::augment_pad_crop_flip(batch, 2, rng);
  CHECK(batch.shape() == before.shape());
  for (float v : batch.storage()) REQUIRE((v >= 0.0f && v <= 1.0f));
  experiment::augment_pad_crop_flip(batch, 0, rng);
  CHECK(batch.shape() == before.shape());
}
