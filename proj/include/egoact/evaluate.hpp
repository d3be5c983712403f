#pragma once

// Frame-level scoring: splice predictions propagated to frames, confusion
// matrices, recall metrics, and the aggregate report emitted by `eval`.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "egoact/image.hpp"

#include <nlohmann/json_fwd.hpp>

namespace egoact {

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::uint64_t> counts;  // row-major L x L; row = ground truth

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> label_names);

  int size() const { return static_cast<int>(labels.size()); }
  std::uint64_t& at(int gt, int pred);
  std::uint64_t at(int gt, int pred) const;

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(int gt) const;

  // trace/total. Throws on an empty matrix.
  double accuracy() const;

  // counts[c][c] / row_sum(c); classes with no ground-truth frames get -1.
  std::vector<double> per_class_recall() const;

  // Adds another matrix with identical labels.
  void merge(const ConfusionMatrix& other);
};

// Builds a confusion matrix from parallel prediction / ground-truth lists.
ConfusionMatrix score(const std::vector<int>& predictions,
                      const std::vector<int>& ground_truth,
                      const std::vector<std::string>& labels);

// Mean recall over classes with at least one ground-truth frame.
double average_recall(const ConfusionMatrix& m);

// First index of the maximum value; ties resolve to the lowest class index.
int argmax_lowest(const float* values, int count);
int argmax_lowest(const double* values, int count);

// Tiles a video into non-overlapping evaluation splices of `window` frames
// (last tile clamped backward), asks `classify` for each tile's class, and
// assigns it to every covered frame. Tiles are visited in order, so frames
// covered by both the last regular tile and the clamped final tile take the
// final tile's label.
std::vector<int> predict_frames(
    int video_length, int window,
    const std::function<int(const std::vector<int>& frame_indices)>& classify);

// Derived summary statistics for one stream's pooled confusion matrix.
struct StreamSummary {
  ConfusionMatrix confusion;
  double frame_accuracy = 0.0;
  std::vector<double> per_class_recall;
  double average_recall = 0.0;
};

StreamSummary summarize(const ConfusionMatrix& m);

// One LOSO split's outcome. A failed split carries the error text and empty
// matrices; its frames are excluded from the pooled aggregate.
struct SplitResult {
  std::string held_out_subject;
  bool failed = false;
  std::string error;
  ConfusionMatrix combined;
  ConfusionMatrix rgb;
  ConfusionMatrix flow;
};

struct EvalReport {
  std::string dataset_name;
  std::vector<std::string> labels;
  StreamSummary combined;
  StreamSummary rgb;
  StreamSummary flow;
  std::vector<SplitResult> splits;
  // Fraction of scored frames whose prediction crosses the label-origin
  // boundary of its ground truth (mixed-manifest runs only).
  bool has_cross_category = false;
  double cross_category_confusion = 0.0;
};

// Pools per-split matrices (frame-pooled micro-average) and fills the
// summaries. `label_origins` may be empty; when it names ≥2 distinct origins
// the cross-category scalar is computed from the combined matrix.
EvalReport aggregate_report(const std::string& dataset_name,
                            const std::vector<std::string>& labels,
                            const std::vector<SplitResult>& splits,
                            const std::vector<std::string>& label_origins);

double cross_category_confusion(const ConfusionMatrix& m,
                                const std::vector<std::string>& label_origins);

nlohmann::json report_to_json(const EvalReport& report);

nlohmann::json confusion_to_json(const ConfusionMatrix& m);
ConfusionMatrix confusion_from_json(const nlohmann::json& j);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m);

// Row-normalized heatmap (each row scaled by its ground-truth count), one
// cell_size x cell_size block per entry, dark = 0, bright = 1.
GrayImage render_confusion_heatmap(const ConfusionMatrix& m, int cell_size = 24);

}  // namespace egoact
