// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "krnet/experiment/config.hpp"
#include "krnet/experiment/feature_cache.hpp"
#include "krnet/kril/kril.hpp"
#include "krnet/report/metrics.hpp"
#include "krnet/report/storage.hpp"
#include "krnet/training.hpp"

namespace krnet::cli {

namespace {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scale = "desk";
  std::string output;
  bool no_aux = false;
  bool no_kr2 = false;
  bool single_krnet = false;
  std::optional<std::size_t> split_index;
  std::optional<std::size_t> tasks;
  std::string base;
  std::string krnet;
  bool with_kril = false;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = experiment::load_config(
      o.config.empty() ? std::nullopt : std::optional<fs::path>(o.config), experiment::parse_scale(o.scale));
  if (o.seed) {
    c.seed = *o.seed;
    c.kril.seed = *o.seed;
  }
  if (!o.output.empty()) c.output = o.output;
  if (o.tasks) c.tasks = *o.tasks;
  if (o.no_aux) c.kril.use_aux_loss = false;
  if (o.no_kr2) c.kril.use_kr2_loss = false;
  if (o.single_krnet) c.kril.double_krnet = false;
  if (o.split_index) {
    c.backbone.split_index = *o.split_index;
    c.backbone.validate();
    c.kril.decoder = experiment::decoder_for_features(c.kril.decoder, kril::split_feature_shape(c.backbone));
  }
  c.validate();
  return c;
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Run directory layout: config.json, metrics.csv, checkpoints/, features/.
struct RunDir {
  fs::path root;
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path features() const { return root / "features"; }
  fs::path metrics() const { return root / "metrics.csv"; }
};

RunDir open_run(const ExperimentConfig& c, const std::string& command) {
  RunDir run{c.output};
  std::error_code ec;
  fs::create_directories(run.checkpoints(), ec);
  fs::create_directories(run.features(), ec);
  if (ec) throw RuntimeFailure("cannot create run directory " + run.root.string() + ": " + ec.message());
  nlohmann::ordered_json j = c.to_json();
  j["command"] = command;
  write_json(j, run.root / "config.json");
  return run;
}

std::vector<ClassLabel> all_classes(std::size_t n) {
  std::vector<ClassLabel> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<ClassLabel>(i);
  return out;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

kril::SplitBackbone base_model(const ExperimentConfig& c, const Options& o, const experiment::ImageDataset& data,
                               const kril::TaskSequence& tasks) {
  if (!o.base.empty()) {
    kril::SplitBackbone model = kril::load_backbone(o.base);
    if (!(model.spec().to_json() == c.backbone.to_json())) {
      throw ValidationError("base checkpoint " + o.base + " was trained with a different backbone spec");
    }
    if (model.num_classes() != tasks.tasks[0].size()) {
      throw ValidationError("base checkpoint has " + std::to_string(model.num_classes()) +
                            " outputs but the base task has " + std::to_string(tasks.tasks[0].size()) + " classes");
    }
    return model;
  }
  return kril::train_backbone(data.train, tasks.tasks[0], c.backbone, c.kril.base, c.seed);
}

void print_summary(const std::string& line) { std::cout << line << std::endl; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

report::AccuracyCurve to_curve(const kril::KrilResult& r) {
  report::AccuracyCurve c{r.method, {}};
  for (const auto& s : r.steps) c.points.push_back({s.task, s.classes_seen, s.accuracy});
  return c;
}

// ---------------------------------------------------------------- commands

int cmd_train_base(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, "train-base");
  const Timer timer;
  const auto data = experiment::ingest_dataset(c.dataset, run.root);
  const auto tasks = kril::make_task_sequence(all_classes(data.num_classes), c.tasks, c.seed);
  write_json(tasks.to_json(), run.root / "tasks.json");
  double loss = 0.0;
  const auto model = kril::train_backbone(data.train, tasks.tasks[0], c.backbone, c.kril.base, c.seed, &loss);
  const double acc = kril::evaluate(model, data.test.filter_classes(tasks.tasks[0]), tasks.tasks[0]);
  kril::save_backbone(model, run.checkpoints() / "base.krna");
  std::ofstream out(run.metrics());
  out << "task,classes_seen,accuracy,loss_cls\n0," << tasks.tasks[0].size() << ',' << fmt("%.9g", acc) << ','
      << fmt("%.9g", loss) << '\n';
  write_json({{"seconds", timer.seconds()}}, run.root / "timing.json");
  print_summary("base accuracy " + fmt("%.4f", acc) + " on " + std::to_string(tasks.tasks[0].size()) + " classes");
  return kExitOk;
}

/// Recorder-only corpus: synthetic features at desk scale, base-task features of the dataset otherwise.
struct RecorderInputs {
  FeatureCorpus corpus;
  std::unique_ptr<nn::Sequential<float>> head;
  DecoderConfig decoder;
  RecorderTrainConfig train;
};

RecorderInputs recorder_inputs(const ExperimentConfig& c, const Options& o, const RunDir& run) {
  RecorderInputs in;
  if (c.scale == experiment::Scale::kDesk) {
    in.corpus = experiment::make_synthetic_features(c.corpus.features);
    in.decoder = experiment::decoder_for_features(c.kril.decoder, in.corpus.feature_shape());
    in.train = c.corpus.train;
    in.train.gamma = 0.0;
  } else {
    const auto data = experiment::ingest_dataset(c.dataset, run.root);
    const auto tasks = kril::make_task_sequence(all_classes(data.num_classes), c.tasks, c.seed);
    const auto model = base_model(c, o, data, tasks);
    experiment::FeatureCache cache(run.features());
    in.corpus = cache.get_or_compute("train_task0", model, data.train.filter_classes(tasks.tasks[0]));
    in.head = std::make_unique<nn::Sequential<float>>(model.f2_features());
    in.head->set_frozen(true);
    in.decoder = c.kril.decoder;
    in.train = c.corpus.train;
  }
  in.train.seed = c.seed;
  return in;
}

int cmd_train_recorder(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, "train-recorder");
  const Timer timer;
  RecorderInputs in = recorder_inputs(c, o, run);
  auto fit = fit_krnet<float>(in.corpus, c.kril.group_size, in.decoder, in.train, in.head.get());
  save_krnet(*fit.model, run.checkpoints() / "krnet.krna");
  write_train_log(fit.report.log, run.metrics());
  const auto replayed = replay_corpus(*fit.model);
  const auto m = report::reconstruction_metrics(replayed, in.corpus);
  report::write_reconstruction_csv(m, run.root / "recon.csv");
  nlohmann::ordered_json summary;
  summary["samples"] = in.corpus.size();
  summary["groups"] = fit.model->group_index().num_groups();
  summary["latent_bytes"] = fit.model->latent_parameter_count() * sizeof(float);
  summary["weight_bytes"] = fit.model->weight_parameter_count() * sizeof(float);
  summary["mse_raw"] = m.mse;
  summary["max_abs_error"] = m.max_abs_error;
  write_json(summary, run.root / "summary.json");
  write_json({{"seconds", timer.seconds()}}, run.root / "timing.json");
  print_summary("krnet replay mse " + fmt("%.4e", m.mse) + " over " + std::to_string(in.corpus.size()) + " samples");
  return kExitOk;
}

int cmd_recon_report(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, "recon-report");
  const Timer timer;
  RecorderInputs in = recorder_inputs(c, o, run);
  std::ofstream out(run.metrics());
  out << "recorder,samples,mse_raw,max_abs_error,latent_bytes,weight_bytes\n";
  auto row = [&](const std::string& name, const report::ReconstructionMetrics& m, std::size_t latent,
                 std::size_t weights) {
    out << name << ',' << m.samples << ',' << fmt("%.9g", m.mse) << ',' << fmt("%.9g", m.max_abs_error) << ','
        << latent << ',' << weights << '\n';
    print_summary(name + " replay mse " + fmt("%.4e", m.mse) + ", latent storage " +
                  report::format_binary_size(latent));
  };
  if (!o.krnet.empty()) {
    const auto model = load_krnet(o.krnet);
    const auto m = report::reconstruction_metrics(replay_corpus(model), in.corpus);
    report::write_reconstruction_csv(m, run.root / "recon_krnet.csv");
    row("krnet", m, model.latent_parameter_count() * sizeof(float), model.weight_parameter_count() * sizeof(float));
    return kExitOk;
  }
  auto kr = fit_krnet<float>(in.corpus, c.kril.group_size, in.decoder, in.train, in.head.get());
  save_krnet(*kr.model, run.checkpoints() / "krnet.krna");
  const auto mk = report::reconstruction_metrics(replay_corpus(*kr.model), in.corpus);
  report::write_reconstruction_csv(mk, run.root / "recon_krnet.csv");
  row("krnet", mk, kr.model->latent_parameter_count() * sizeof(float),
      kr.model->weight_parameter_count() * sizeof(float));

  DecoderConfig ae_decoder = in.decoder;
  if (c.corpus.ae_latent_dim != 0) ae_decoder.latent_dim = c.corpus.ae_latent_dim;
  auto ae = fit_ae<float>(in.corpus, ae_decoder, in.train, in.head.get());
  save_ae(*ae.model, run.checkpoints() / "ae.krna");
  save_latent_bank(ae.bank, run.checkpoints() / "ae_latents.f32");
  FeatureCorpus ae_replay = in.corpus;
  ae_replay.features = ae.model->replay(ae.bank);
  const auto ma = report::reconstruction_metrics(ae_replay, in.corpus);
  report::write_reconstruction_csv(ma, run.root / "recon_ae.csv");
  row("ae", ma, ae.bank.storage_bytes(), ae.model->weight_parameter_count() * sizeof(float));
  write_json({{"seconds", timer.seconds()}}, run.root / "timing.json");
  return kExitOk;
}

struct KrilRun {
  experiment::ImageDataset data;
  kril::TaskSequence tasks;
};

KrilRun prepare_kril(const ExperimentConfig& c, const RunDir& run) {
  KrilRun r{experiment::ingest_dataset(c.dataset, run.root), {}};
  r.tasks = kril::make_task_sequence(all_classes(r.data.num_classes), c.tasks, c.seed);
  write_json(r.tasks.to_json(), run.root / "tasks.json");
  return r;
}

void emit_curves(const std::vector<const kril::KrilResult*>& results, const RunDir& run) {
  kril::write_metrics_csv(results, run.metrics());
  std::vector<report::AccuracyCurve> curves;
  for (const auto* r : results) curves.push_back(to_curve(*r));
  report::write_curves_csv(curves, run.root / "curves.csv");
  report::plot_curves_png(curves, run.root / "curves.png");
  for (const auto* r : results) {
    print_summary(r->method + " final accuracy " + fmt("%.4f", r->final_accuracy()));
  }
}

int cmd_kril(const Options& o, const std::string& command) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, command);
  const Timer timer;
  const KrilRun k = prepare_kril(c, run);
  const auto base = base_model(c, o, k.data, k.tasks);
  experiment::FeatureCache cache(run.features());
  auto result = kril::run_kril(k.data, k.tasks, c.backbone, c.kril, &base, &cache, {run.checkpoints()});
  if (command == "ablate") {
    std::string variant;
    if (!c.kril.use_aux_loss) variant += "_no_aux";
    if (!c.kril.use_kr2_loss) variant += "_no_kr2";
    if (!c.kril.double_krnet) variant += "_single";
    if (o.split_index) variant += "_split" + std::to_string(*o.split_index);
    result.method += variant;
  }
  emit_curves({&result}, run);
  nlohmann::ordered_json timing;
  timing["seconds"] = timer.seconds();
  for (const auto& s : result.steps) timing["steps"].push_back(s.seconds);
  write_json(timing, run.root / "timing.json");
  return kExitOk;
}

int cmd_bounds(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, "bounds");
  const Timer timer;
  const KrilRun k = prepare_kril(c, run);
  const auto base = base_model(c, o, k.data, k.tasks);
  experiment::FeatureCache cache(run.features());
  const auto bounds = kril::baseline_bounds(k.data, k.tasks, c.backbone, c.kril, &base, &cache);
  std::vector<const kril::KrilResult*> results{&bounds.joint, &bounds.oracle};
  std::optional<kril::KrilResult> kr;
  if (o.with_kril) {
    kr = kril::run_kril(k.data, k.tasks, c.backbone, c.kril, &base, &cache, {run.checkpoints()});
    results.push_back(&*kr);
  }
  results.push_back(&bounds.fine_tune);
  emit_curves(results, run);
  write_json({{"seconds", timer.seconds()}}, run.root / "timing.json");
  return kExitOk;
}

int cmd_storage_table(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const RunDir run = open_run(c, "storage-table");
  const auto& s = c.storage;
  const std::uint64_t weights = decoder_parameter_count(s.decoder) * sizeof(float);
  const auto reports =
      report::storage_table(report::imagenet_storage_rows(), s.group_size, s.feature_shape, weights, s.ae_latent_dim);
  const std::string md = report::storage_markdown(reports);
  std::ofstream(run.root / "storage.md") << md;
  report::write_storage_csv(reports, run.metrics());
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(r.to_json());
  write_json(j, run.root / "storage.json");
  std::cout << md;
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Resolved or hand-written experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Seed for task order, initialisation and sampling");
  sub->add_option("--scale", o.scale, "Preset used when no config is given")
      ->check(CLI::IsMember({"desk", "paper"}));
  sub->add_option("--output", o.output, "Run directory");
  sub->add_option("--tasks", o.tasks, "Number of incremental tasks after the base task")
      ->check(CLI::PositiveNumber);
}

void add_ablation(CLI::App* sub, Options& o) {
  sub->add_flag("--no-aux", o.no_aux, "Drop the auxiliary embedding loss");
  sub->add_flag("--no-kr2", o.no_kr2, "Drop the head-space term of the recorder loss");
  sub->add_flag("--single-krnet", o.single_krnet, "One recorder for all tasks instead of two");
  sub->add_option("--split-index", o.split_index, "Blocks kept in the frozen F1");
}

void print_error(const char* kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"KRNet feature recorder and incremental learning experiments", "krnet"};
  app.require_subcommand(1);
  Options o;

  auto* train_base = app.add_subcommand("train-base", "Train F1 and F2 on the base task");
  add_common(train_base, o);
  auto* train_recorder = app.add_subcommand("train-recorder", "Fit one KRNet recorder and report its replay error");
  add_common(train_recorder, o);
  train_recorder->add_option("--base", o.base, "Base backbone checkpoint (used with --scale paper)")->check(CLI::ExistingFile);
  auto* kril_cmd = app.add_subcommand("kril", "Run KRNet-based incremental learning over all tasks");
  add_common(kril_cmd, o);
  add_ablation(kril_cmd, o);
  kril_cmd->add_option("--base", o.base, "Base backbone checkpoint")->check(CLI::ExistingFile);
  auto* bounds = app.add_subcommand("bounds", "Joint-training, oracle-replay and fine-tuning reference curves");
  add_common(bounds, o);
  bounds->add_option("--base", o.base, "Base backbone checkpoint")->check(CLI::ExistingFile);
  bounds->add_flag("--with-kril", o.with_kril, "Also run KRIL and include it in the curves");
  auto* storage = app.add_subcommand("storage-table", "Storage of raw features, AE latents and KRNet latents");
  add_common(storage, o);
  auto* recon = app.add_subcommand("recon-report", "Replay error of KRNet and an identically trained AE");
  add_common(recon, o);
  recon->add_option("--krnet", o.krnet, "Evaluate an existing KRNet checkpoint instead of training")
      ->check(CLI::ExistingFile);
  recon->add_option("--base", o.base, "Base backbone checkpoint (used with --scale paper)")->check(CLI::ExistingFile);
  auto* ablate = app.add_subcommand("ablate", "KRIL with ablation toggles");
  add_common(ablate, o);
  add_ablation(ablate, o);
  ablate->add_option("--base", o.base, "Base backbone checkpoint")->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  }

  try {
    if (train_base->parsed()) return cmd_train_base(o);
    if (train_recorder->parsed()) return cmd_train_recorder(o);
    if (kril_cmd->parsed()) return cmd_kril(o, "kril");
    if (bounds->parsed()) return cmd_bounds(o);
    if (storage->parsed()) return cmd_storage_table(o);
    if (recon->parsed()) return cmd_recon_report(o);
    if (ablate->parsed()) return cmd_kril(o, "ablate");
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace krnet::cli
