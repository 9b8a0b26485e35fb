// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "krnet/corpus.hpp"

namespace krnet::report {

struct ReconstructionMetrics {
  double mse = 0.0;
  double max_abs_error = 0.0;
  std::size_t samples = 0;
  std::map<ClassLabel, double> per_class_mse;
};

/// Both corpora must hold the same sample IDs; rows are matched by ID, not position.
ReconstructionMetrics reconstruction_metrics(const FeatureCorpus& replayed, const FeatureCorpus& original);

/// Columns: class,samples,mse. The first row is the overall value with class "all".
void write_reconstruction_csv(const ReconstructionMetrics& metrics, const std::filesystem::path& path);

struct CurvePoint {
  std::size_t step = 0;
  std::size_t classes_seen = 0;
  double accuracy = 0.0;
};

struct AccuracyCurve {
  std::string method;
  std::vector<CurvePoint> points;
};

/// Header `method,step,classes_seen,accuracy`; an empty list writes the header only.
void write_curves_csv(const std::vector<AccuracyCurve>& curves, const std::filesystem::path& path);
std::vector<AccuracyCurve> read_curves_csv(const std::filesystem::path& path);

/// Accuracy against classes seen, one coloured polyline per curve, on a white
/// canvas with axes and a colour key in the top-left corner. Accuracy is drawn on [0, 1].
void plot_curves_png(const std::vector<AccuracyCurve>& curves, const std::filesystem::path& path,
                     std::size_t width = 640, std::size_t height = 480);

}  // namespace krnet::report
