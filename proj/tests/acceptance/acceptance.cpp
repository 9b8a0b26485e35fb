// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner. With no arguments every criterion runs in order; with
// --criterion N only that one runs. Each criterion prints exactly one line:
//   AC<N> PASS|FAIL <name>: <measurements> (<seconds>s)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "cli_app.hpp"
#include "krnet/experiment/config.hpp"
#include "krnet/grouping.hpp"
#include "krnet/kril/kril.hpp"
#include "krnet/nn/loss.hpp"
#include "krnet/report/metrics.hpp"
#include "krnet/training.hpp"
#include "oracles.hpp"

using namespace krnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number;
  std::string name;
  double budget_seconds;
  std::function<Outcome(const fs::path&)> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

int krnet_cli(std::vector<std::string> args) {
  std::cout.flush();
  // subcommand chatter goes to the log, not the PASS/FAIL stream
  std::stringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old);
  return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("missing " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::vector<ClassLabel> range(std::size_t n) {
  std::vector<ClassLabel> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<ClassLabel>(i);
  return out;
}

// ------------------------------------------------------------------ AC1

Outcome storage_table(const fs::path& work) {
  const fs::path out = work / "ac1";
  if (krnet_cli({"storage-table", "--output", out.string()}) != 0) return {false, "storage-table failed"};
  const std::vector<std::vector<std::string>> expected{
      {"50", "12.12 GB", "253.19 MB", "0.59 MB"},   {"100", "24.19 GB", "505.45 MB", "1.17 MB"},
      {"150", "36.30 GB", "758.66 MB", "1.76 MB"},  {"200", "47.71 GB", "996.97 MB", "2.34 MB"},
      {"250", "59.78 GB", "1.22 GB", "2.93 MB"}};
  const auto rows = read_csv(out / "metrics.csv");
  std::size_t matched = 0;
  std::string first_miss;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i + 1 >= rows.size()) break;
    const auto& r = rows[i + 1];  // classes,...,raw,ae,krnet
    if (r[0] != expected[i][0]) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      if (r[r.size() - 3 + k] == expected[i][k + 1]) {
        ++matched;
      } else if (first_miss.empty()) {
        first_miss = "; first mismatch " + r[r.size() - 3 + k] + " vs " + expected[i][k + 1];
      }
    }
  }
  return {matched == 15, std::to_string(matched) + "/15 cells exact" + first_miss};
}

// ------------------------------------------------------------------ AC2

std::vector<double> matrix_rule_product(std::size_t n, std::size_t h, const std::vector<double>& v) {
  std::vector<double> out(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      const long d = static_cast<long>(i) - static_cast<long>(j);
      if (d == static_cast<long>(n) || -d == static_cast<long>(h - n)) out[j] += v[i];
    }
  }
  return out;
}

Outcome permutation_grouping(const fs::path&) {
  std::size_t failures = 0, checks = 0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  for (std::size_t h : {2, 4, 8, 16}) {
    std::vector<double> x(h);
    for (auto& e : x) e = normal(rng);
    for (std::size_t n = 0; n < h; ++n) {
      const PermutationMatrix p(n, h);
      for (std::size_t i = 0; i < h; ++i) {
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < h; ++j) {
          if (p.at(i, j) > 1 || p.at(j, i) > 1) ++failures;
          row += p.at(i, j);
          col += p.at(j, i);
        }
        failures += (row != 1) + (col != 1);
        ++checks;
      }
      const auto rolled = apply_local_permutation<double>(x, n);
      failures += rolled != p.apply(x);
      failures += rolled != matrix_rule_product(n, h, x);
      checks += 2;
      for (std::size_t m = 0; m < h; ++m) {
        const auto composed = p.compose(PermutationMatrix(m, h));
        const PermutationMatrix wrapped((n + m) % h, h);
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < h; ++j) failures += composed.at(i, j) != wrapped.at(i, j);
        }
        ++checks;
      }
    }
  }
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<ClassLabel, std::size_t> counts;
    const std::size_t classes = 1 + rng() % 20;
    for (std::size_t c = 0; c < classes; ++c) counts[static_cast<ClassLabel>(rng() % 1000)] = 1 + rng() % 300;
    const std::size_t h = std::size_t{1} << (1 + rng() % 4);
    std::size_t expected = 0, total = 0;
    for (auto [c, n] : counts) {
      expected += (n + h - 1) / h;
      total += n;
    }
    const auto index = build_group_index(counts, h);
    failures += index.num_groups() != expected;
    failures += count_groups(counts, h) != expected;
    failures += index.num_samples() != total;
    for (const auto& g : index.groups()) failures += g.count == 0 || g.count > h;
    checks += 4;
  }
  return {failures == 0, std::to_string(checks) + " checks, " + std::to_string(failures) + " failures"};
}

// ------------------------------------------------------------------ AC3

Outcome gradients(const fs::path&) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (double gamma : {0.0, 0.5}) {
    const auto r = testing::kr_gradient_check(gamma);
    worst = std::max({worst, r.parameters.max_rel_error, r.prediction.max_rel_error});
    checked += r.parameters.checked + r.prediction.checked;
  }
  return {worst < 1e-3, "max rel error " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " entries"};
}

// ------------------------------------------------------------------ AC4

struct ReconRow {
  double mse = 0.0;
  std::size_t latent_bytes = 0;
};

std::map<std::string, ReconRow> read_recon(const fs::path& path) {
  std::map<std::string, ReconRow> out;
  const auto rows = read_csv(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    out[rows[i][0]] = {std::stod(rows[i][2]), static_cast<std::size_t>(std::stoull(rows[i][4]))};
  }
  return out;
}

fs::path ac4_dir(const fs::path& work) { return work / "ac4"; }

Outcome memorisation(const fs::path& work) {
  const fs::path out = ac4_dir(work);
  if (krnet_cli({"recon-report", "--scale", "desk", "--seed", "0", "--output", out.string()}) != 0) {
    return {false, "recon-report failed"};
  }
  const auto rows = read_recon(out / "metrics.csv");
  const double kr = rows.at("krnet").mse;
  const double ae = rows.at("ae").mse;
  const double ratio = std::max(ae, kr) / std::min(ae, kr);
  return {kr <= 5e-3 && ratio <= 3.0,
          "krnet mse " + fmt("%.3e", kr) + " (<= 5e-3), ae mse " + fmt("%.3e", ae) + ", ratio " + fmt("%.2f", ratio) +
              " (<= 3)"};
}

// ------------------------------------------------------------------ AC5

Outcome latent_storage(const fs::path& work) {
  const fs::path ckpt = ac4_dir(work) / "checkpoints";
  if (!fs::exists(ckpt / "krnet.krna") || !fs::exists(ckpt / "ae_latents.f32")) {
    const Outcome trained = memorisation(work);
    if (!fs::exists(ckpt / "krnet.krna")) return {false, "no trained checkpoints: " + trained.detail};
  }
  auto model = load_krnet(ckpt / "krnet.krna");
  const auto bank = load_latent_bank(ckpt / "ae_latents.f32");
  const std::size_t m = model.group_index().num_groups();
  const std::size_t h = model.group_size();
  const std::size_t n = bank.size();
  const std::uint64_t kr_bytes =
      (model.embedding().static_vectors().value.size() + model.embedding().dynamic_vectors().value.size()) *
      sizeof(float);
  const std::uint64_t ae_bytes = fs::file_size(ckpt / "ae_latents.f32");
  const bool formula = kr_bytes == 2 * m * h * 4 && ae_bytes == n * 2 * h * 4;
  const double per_group = static_cast<double>(n) / static_cast<double>(m);
  return {formula && per_group >= 40.0 && kr_bytes * 40 < ae_bytes,
          "N=" + std::to_string(n) + " M=" + std::to_string(m) + " H=" + std::to_string(h) + " N/M=" +
              fmt("%.1f", per_group) + ", krnet " + std::to_string(kr_bytes) + " B vs ae " +
              std::to_string(ae_bytes) + " B (ratio 1/" + fmt("%.1f", static_cast<double>(ae_bytes) / kr_bytes) +
              ")"};
}

// ------------------------------------------------------------------ AC6

Outcome kril_ordering(const fs::path& work) {
  const fs::path out = work / "ac6";
  if (krnet_cli({"bounds", "--scale", "desk", "--seed", "0", "--with-kril", "--output", out.string()}) != 0) {
    return {false, "bounds failed"};
  }
  std::map<std::string, double> final;
  for (const auto& c : report::read_curves_csv(out / "curves.csv")) final[c.method] = c.points.back().accuracy;
  const double joint = final.at("joint"), oracle = final.at("oracle"), kr = final.at("kril"),
               ft = final.at("fine_tune");
  const bool pass = joint >= oracle && oracle >= kr && kr >= ft && kr - ft >= 0.05;
  return {pass, "joint " + fmt("%.3f", joint) + " >= oracle " + fmt("%.3f", oracle) + " >= kril " + fmt("%.3f", kr) +
                    " >= fine-tune " + fmt("%.3f", ft) + ", gap " + fmt("%.1f", 100 * (kr - ft)) + " points"};
}

// ------------------------------------------------------------------ AC7

Outcome loss_locality(const fs::path&) {
  std::vector<std::string> broken;
  {
    const auto logits = testing::random_tensor<double>({6, 4}, 1);
    const auto e = testing::random_tensor<double>({6, 5}, 2);
    const auto prev = testing::random_tensor<double>({6, 5}, 3);
    const std::vector<std::size_t> labels{0, 3, 1, 2, 2, 0};
    const std::vector<std::uint8_t> none(6, 0);
    const auto l = kril::incremental_loss<double>(logits, labels, e, &prev, none, 2.0);
    for (double g : l.grad_embedding.storage()) {
      if (g != 0.0) {
        broken.push_back("aux gradient on replay-free batch");
        break;
      }
    }
    const std::vector<std::uint8_t> mixed{1, 0, 1, 0, 0, 1};
    const auto l0 = kril::incremental_loss<double>(logits, labels, e, &prev, mixed, 0.0);
    const auto ce = nn::softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
    if (l0.total != ce.value || testing::max_abs_diff(l0.grad_logits, ce.grad) != 0.0) {
      broken.push_back("lambda=0 differs from cross-entropy");
    }
  }
  {
    const auto pred = testing::random_tensor<double>({3, 2, 2, 2}, 4);
    const auto target = testing::random_tensor<double>({3, 2, 2, 2}, 5);
    auto head = testing::tiny_head(6);
    const NormalizationStats stats{{0.0f, -1.0f}, {1.0f, 2.0f}};
    const auto l = loss_kr<double>(pred, target, &head, stats, 0.0);
    const auto mse = nn::batch_squared_error(pred, target);
    if (std::abs(l.total - mse.value) > 1e-12 * mse.value || testing::max_abs_diff(l.grad, mse.grad) != 0.0) {
      broken.push_back("gamma=0 differs from MSE");
    }
  }
  experiment::SyntheticImageSpec images;
  images.classes = 6;
  images.train_per_class = 10;
  images.test_per_class = 4;
  const auto data = experiment::make_synthetic_images(images);
  const auto tasks = kril::make_task_sequence(range(6), 2, 0);
  kril::KrilConfig config;
  config.decoder = DecoderConfig::desk();
  config.decoder.c0 = 8;
  config.decoder.c1 = 4;
  config.recorder.batch_size = 8;
  config.recorder.warm_iters = 10;
  config.recorder.decay_iters = 10;
  config.base.epochs = 2;
  config.base.batch_size = 16;
  config.incremental = config.base;
  const auto spec = kril::BackboneSpec::desk(3);
  const auto base = kril::train_backbone(data.train, tasks.tasks[0], spec, config.base, 0);
  const auto f1_before = nn::weight_hash(base.f1());
  const auto result = kril::run_kril(data, tasks, spec, config, &base);
  std::size_t frozen_checks = 0;
  for (std::size_t t = 1; t < result.steps.size(); ++t) {
    const auto& s = result.steps[t];
    if (s.f1_hash != f1_before) broken.push_back("F1 hash changed at task " + std::to_string(t));
    if (s.previous_f2_hash_before != s.previous_f2_hash_after) {
      broken.push_back("previous F2 hash changed at task " + std::to_string(t));
    }
    frozen_checks += 2;
  }
  if (frozen_checks != 4) broken.push_back("expected two increments");
  std::string detail = broken.empty() ? "4 loss identities exact, " + std::to_string(frozen_checks) +
                                            " frozen-weight hashes unchanged"
                                      : broken.front();
  return {broken.empty(), detail};
}

// ------------------------------------------------------------------ AC8

Outcome recursive_drift(const fs::path&) {
  experiment::SyntheticFeatureSpec spec;
  spec.samples = 512;
  const FeatureCorpus original = experiment::make_synthetic_features(spec);
  RecorderTrainConfig train;
  train.batch_size = 64;
  train.warm_iters = 600;
  train.decay_iters = 600;
  train.gamma = 0.0;
  const DecoderConfig decoder = DecoderConfig::desk();
  std::vector<double> mse;
  FeatureCorpus targets = original;
  for (int generation = 0; generation < 3; ++generation) {
    train.seed = 100 + generation;
    const auto fit = fit_krnet<float>(targets, 64, decoder, train);
    targets = replay_corpus(*fit.model);
    mse.push_back(report::reconstruction_metrics(targets, original).mse);
  }
  bool finite = true, monotone = true;
  for (std::size_t g = 0; g < mse.size(); ++g) {
    finite = finite && std::isfinite(mse[g]);
    if (g > 0) monotone = monotone && mse[g] >= mse[g - 1];
  }
  return {finite && monotone, "replay mse vs originals per generation " + fmt("%.3e", mse[0]) + " -> " +
                                  fmt("%.3e", mse[1]) + " -> " + fmt("%.3e", mse[2])};
}

// ------------------------------------------------------------------ AC9

Outcome ablations(const fs::path& work) {
  const fs::path root = work / "ac9";
  if (krnet_cli({"train-base", "--scale", "desk", "--seed", "0", "--output", (root / "base").string()}) != 0) {
    return {false, "train-base failed"};
  }
  const std::string base = (root / "base" / "checkpoints" / "base.krna").string();
  const std::vector<std::pair<std::string, std::vector<std::string>>> variants{
      {"no_aux", {"--no-aux", "--base", base}},
      {"no_kr2", {"--no-kr2", "--base", base}},
      {"single", {"--single-krnet", "--base", base}},
      {"split2", {"--split-index", "2"}},
  };
  std::vector<std::string> header;
  std::vector<std::string> keys;
  std::string detail;
  bool pass = true;
  for (const auto& [name, flags] : variants) {
    std::vector<std::string> args{"ablate", "--scale", "desk", "--seed", "0", "--output", (root / name).string()};
    args.insert(args.end(), flags.begin(), flags.end());
    if (krnet_cli(args) != 0) {
      pass = false;
      detail += name + " failed; ";
      continue;
    }
    const auto rows = read_csv(root / name / "metrics.csv");
    std::vector<std::string> k;
    for (std::size_t i = 1; i < rows.size(); ++i) k.push_back(rows[i][1] + ":" + rows[i][2]);
    if (header.empty()) {
      header = rows[0];
      keys = k;
    } else if (rows[0] != header || k != keys) {
      pass = false;
      detail += name + " not comparable; ";
    }
    detail += name + " " + fmt("%.3f", std::stod(rows.back()[3])) + "; ";
  }
  return {pass, "final accuracy " + detail + std::to_string(keys.size()) + " rows each"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  int only = 0;
  std::string work = "acceptance_work";
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Scratch directory for run outputs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "storage table", 1.0, storage_table},
      {2, "permutation and grouping", 10.0, permutation_grouping},
      {3, "gradient correctness", 60.0, gradients},
      {4, "desk memorisation", 900.0, memorisation},
      {5, "latent storage dominance", 1200.0, latent_storage},
      {6, "KRIL ordering", 1800.0, kril_ordering},
      {7, "loss locality", 60.0, loss_locality},
      {8, "recursive drift", 1200.0, recursive_drift},
      {9, "ablation plumbing", 3600.0, ablations},
  };
  fs::create_directories(work);
  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.number != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_seconds) + "s budget";
    }
    std::cout << "AC" << c.number << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << c.name << ": " << o.detail << " ("
              << fmt("%.1f", seconds) << "s)" << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
