// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "krnet/krnet_model.hpp"
#include "krnet/report/metrics.hpp"
#include "krnet/report/storage.hpp"
#include "test_util.hpp"

using namespace krnet;
using namespace krnet::report;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("krnet_report_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

FeatureCorpus corpus(std::vector<float> values, std::vector<SampleId> ids, std::vector<ClassLabel> labels) {
  FeatureCorpus c;
  const std::size_t n = ids.size();
  const std::size_t d = values.size() / n;
  c.features = Tensor<float>({n, d, 1, 1}, std::move(values));
  c.ids = std::move(ids);
  c.labels = std::move(labels);
  return c;
}

}  // namespace

TEST_CASE("ImageNet storage table cells") {
  const FeatureShape shape{256, 14, 14};
  const auto reports = storage_table(imagenet_storage_rows(), 512, shape, 0, 1024);
  const std::vector<std::array<std::string, 3>> expected{
      {"12.12 GB", "253.19 MB", "0.59 MB"}, {"24.19 GB", "505.45 MB", "1.17 MB"},
      {"36.30 GB", "758.66 MB", "1.76 MB"}, {"47.71 GB", "996.97 MB", "2.34 MB"},
      {"59.78 GB", "1.22 GB", "2.93 MB"}};
  REQUIRE(reports.size() == expected.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    CAPTURE(r.num_classes);
    CHECK(format_binary_size(r.bytes_raw) == expected[i][0]);
    CHECK(format_binary_size(r.bytes_ae_latent) == expected[i][1]);
    CHECK(format_binary_size(r.bytes_krnet_latent) == expected[i][2]);
    // independent arithmetic: fp32 maps, 1024-d AE codes, 2H values per group
    CHECK(r.bytes_raw == r.num_samples * 256 * 14 * 14 * 4);
    CHECK(r.bytes_ae_latent == r.num_samples * 1024 * 4);
    CHECK(r.bytes_krnet_latent == r.num_groups * 2 * 512 * 4);
    CHECK(r.num_groups == 3 * r.num_classes);
  }
  const std::string md = storage_markdown(reports);
  CHECK(md.find("| 150 | 194,217 | 36.30 GB | 758.66 MB | 1.76 MB |") != std::string::npos);
}

TEST_CASE("group counts follow per-class ceilings") {
  const std::map<ClassLabel, std::size_t> counts{{0, 1}, {1, 512}, {2, 513}};
  const auto r = storage_report(counts, 512, {1, 1, 1}, 0);
  CHECK(r.num_groups == 1 + 1 + 2);
  CHECK(r.ae_latent_dim == 1024);
  const auto one = storage_report({{7, 1}}, 4, {2, 2, 2}, 100);
  CHECK(one.num_groups == 1);
  CHECK(one.bytes_raw == 32);
  CHECK(one.bytes_krnet_latent == 32);
  CHECK(one.compression_ratio_overall == doctest::Approx(32.0 / 132.0));
  const auto even = even_class_counts(3, 10);
  CHECK(even.at(0) == 4);
  CHECK(even.at(2) == 3);
}

TEST_CASE("compression ratio grows with the dataset") {
  const std::uint64_t weights = decoder_parameter_count(DecoderConfig::imagenet_subset()) * 4;
  const auto reports = storage_table(imagenet_storage_rows(), 512, {256, 14, 14}, weights, 1024);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    CHECK(reports[i].compression_ratio_overall > reports[i - 1].compression_ratio_overall);
  }
  CHECK(reports.front().compression_ratio_overall > 1.0);
}

TEST_CASE("analytic decoder parameter count matches the built model") {
  for (const auto& cfg : {DecoderConfig::tiny(), DecoderConfig::desk(), DecoderConfig::cifar100()}) {
    nn::Rng rng(1);
    FeatureDecoder<float> decoder(cfg, rng);
    std::vector<nn::Parameter<float>*> params;
    decoder.collect_parameters(params);
    std::size_t n = 0;
    for (const auto* p : params) n += p->value.size();
    CHECK(decoder_parameter_count(cfg) == n);
  }
}

TEST_CASE("reconstruction metrics") {
  const auto original = corpus({0, 1, 2, 3, 4, 5}, {1, 2, 3}, {0, 1, 1});
  const auto same = reconstruction_metrics(original, original);
  CHECK(same.mse == 0.0);
  CHECK(same.samples == 3);

  // rows in a different order, every value off by 0.1
  auto shifted = corpus({2.1f, 3.1f, 0.1f, 1.1f, 4.1f, 5.1f}, {2, 1, 3}, {1, 0, 1});
  const auto m = reconstruction_metrics(shifted, original);
  CHECK(m.mse == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(m.max_abs_error == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(m.per_class_mse.at(1) == doctest::Approx(0.01).epsilon(1e-4));

  auto missing = shifted;
  missing.ids[0] = 9;
  CHECK_THROWS_AS(reconstruction_metrics(missing, original), ValidationError);

  const auto dir = scratch("recon");
  write_reconstruction_csv(m, dir / "r.csv");
  const auto text = slurp(dir / "r.csv");
  CHECK(text.rfind("class,samples,mse\nall,3,", 0) == 0);
}

TEST_CASE("accuracy curves CSV and plot") {
  const auto dir = scratch("curves");
  write_curves_csv({}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == "method,step,classes_seen,accuracy\n");
  CHECK(read_curves_csv(dir / "empty.csv").empty());

  const std::vector<AccuracyCurve> curves{{"kril", {{0, 50, 0.8}, {1, 60, 0.7}}}, {"joint", {{0, 50, 0.8}}}};
  write_curves_csv(curves, dir / "c.csv");
  const auto back = read_curves_csv(dir / "c.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].method == "kril");
  CHECK(back[0].points[1].classes_seen == 60);
  CHECK(back[0].points[1].accuracy == doctest::Approx(0.7));

  plot_curves_png(curves, dir / "c.png");
  std::ifstream png(dir / "c.png", std::ios::binary);
  char sig[8] = {};
  png.read(sig, 8);
  CHECK(std::string(sig + 1, 3) == "PNG");
  plot_curves_png({}, dir / "empty.png");
  CHECK(fs::exists(dir / "empty.png"));
}
