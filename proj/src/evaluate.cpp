#include "egoact/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace egoact {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> label_names)
    : labels(std::move(label_names)) {
  if (labels.empty()) throw std::invalid_argument("confusion matrix needs labels");
  counts.assign(labels.size() * labels.size(), 0);
}

std::uint64_t& ConfusionMatrix::at(int gt, int pred) {
  if (gt < 0 || gt >= size() || pred < 0 || pred >= size()) {
    throw std::out_of_range("confusion index (" + std::to_string(gt) + ", " +
                            std::to_string(pred) + ") outside " + std::to_string(size()) +
                            " classes");
  }
  return counts[static_cast<std::size_t>(gt) * labels.size() + pred];
}

std::uint64_t ConfusionMatrix::at(int gt, int pred) const {
  return const_cast<ConfusionMatrix*>(this)->at(gt, pred);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t sum = 0;
  for (int c = 0; c < size(); ++c) sum += at(c, c);
  return sum;
}

std::uint64_t ConfusionMatrix::row_sum(int gt) const {
  std::uint64_t sum = 0;
  for (int p = 0; p < size(); ++p) sum += at(gt, p);
  return sum;
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t n = total();
  if (n == 0) throw std::runtime_error("accuracy of an empty confusion matrix");
  return static_cast<double>(trace()) / static_cast<double>(n);
}

std::vector<double> ConfusionMatrix::per_class_recall() const {
  std::vector<double> recalls(labels.size(), -1.0);
  for (int c = 0; c < size(); ++c) {
    const std::uint64_t row = row_sum(c);
    if (row > 0) recalls[c] = static_cast<double>(at(c, c)) / static_cast<double>(row);
  }
  return recalls;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (labels.empty()) {
    *this = other;
    return;
  }
  if (other.labels != labels) {
    throw std::invalid_argument("cannot merge confusion matrices with different labels");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

ConfusionMatrix score(const std::vector<int>& predictions,
                      const std::vector<int>& ground_truth,
                      const std::vector<std::string>& labels) {
  if (predictions.size() != ground_truth.size()) {
    throw std::invalid_argument("score: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(ground_truth.size()) +
                                " ground-truth labels");
  }
  ConfusionMatrix m(labels);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    m.at(ground_truth[i], predictions[i])++;
  }
  return m;
}

double average_recall(const ConfusionMatrix& m) {
  if (m.total() == 0) throw std::runtime_error("average recall of an empty confusion matrix");
  double sum = 0.0;
  int classes = 0;
  for (double r : m.per_class_recall()) {
    if (r >= 0.0) {
      sum += r;
      classes++;
    }
  }
  return sum / classes;
}

namespace {

template <typename T>
int argmax_lowest_impl(const T* values, int count) {
  if (count <= 0) throw std::invalid_argument("argmax over empty range");
  int best = 0;
  for (int i = 1; i < count; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

int argmax_lowest(const float* values, int count) { return argmax_lowest_impl(values, count); }
int argmax_lowest(const double* values, int count) { return argmax_lowest_impl(values, count); }

std::vector<int> predict_frames(
    int video_length, int window,
    const std::function<int(const std::vector<int>& frame_indices)>& classify) {
  if (video_length < 1) throw std::invalid_argument("predict_frames: empty video");
  if (window < 1) throw std::invalid_argument("predict_frames: window must be >= 1");

  std::vector<int> predictions(video_length, -1);
  std::vector<int> starts;
  for (int s = 0; s + window <= video_length; s += window) starts.push_back(s);
  if (starts.empty() || starts.back() + window < video_length) {
    starts.push_back(std::max(0, video_length - window));
  }

  for (int start : starts) {
    std::vector<int> indices;
    indices.reserve(window);
    for (int i = 0; i < window; ++i) indices.push_back(std::min(start + i, video_length - 1));
    const int label = classify(indices);
    for (int idx : indices) predictions[idx] = label;
  }
  return predictions;
}

StreamSummary summarize(const ConfusionMatrix& m) {
  StreamSummary s;
  s.confusion = m;
  if (m.total() > 0) {
    s.frame_accuracy = m.accuracy();
    s.per_class_recall = m.per_class_recall();
    s.average_recall = average_recall(m);
  } else {
    s.per_class_recall.assign(m.labels.size(), -1.0);
  }
  return s;
}

double cross_category_confusion(const ConfusionMatrix& m,
                                const std::vector<std::string>& label_origins) {
  if (label_origins.size() != m.labels.size()) {
    throw std::invalid_argument("label_origins size does not match confusion labels");
  }
  const std::uint64_t n = m.total();
  if (n == 0) return 0.0;
  std::uint64_t crossing = 0;
  for (int gt = 0; gt < m.size(); ++gt) {
    for (int pred = 0; pred < m.size(); ++pred) {
      if (label_origins[gt] != label_origins[pred]) crossing += m.at(gt, pred);
    }
  }
  return static_cast<double>(crossing) / static_cast<double>(n);
}

EvalReport aggregate_report(const std::string& dataset_name,
                            const std::vector<std::string>& labels,
                            const std::vector<SplitResult>& splits,
                            const std::vector<std::string>& label_origins) {
  EvalReport report;
  report.dataset_name = dataset_name;
  report.labels = labels;
  report.splits = splits;

  ConfusionMatrix combined(labels), rgb(labels), flow(labels);
  for (const auto& split : splits) {
    if (split.failed) continue;
    combined.merge(split.combined);
    rgb.merge(split.rgb);
    flow.merge(split.flow);
  }
  report.combined = summarize(combined);
  report.rgb = summarize(rgb);
  report.flow = summarize(flow);

  if (!label_origins.empty()) {
    std::set<std::string> distinct(label_origins.begin(), label_origins.end());
    if (distinct.size() >= 2) {
      report.has_cross_category = true;
      report.cross_category_confusion = cross_category_confusion(combined, label_origins);
    }
  }
  return report;
}

json confusion_to_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (int gt = 0; gt < m.size(); ++gt) {
    json row = json::array();
    for (int pred = 0; pred < m.size(); ++pred) row.push_back(m.at(gt, pred));
    rows.push_back(std::move(row));
  }
  return {{"labels", m.labels}, {"counts", std::move(rows)}, {"total", m.total()}};
}

ConfusionMatrix confusion_from_json(const json& j) {
  ConfusionMatrix m(j.at("labels").get<std::vector<std::string>>());
  const json& rows = j.at("counts");
  if (static_cast<int>(rows.size()) != m.size()) {
    throw std::runtime_error("confusion json has wrong row count");
  }
  for (int gt = 0; gt < m.size(); ++gt) {
    const json& row = rows[gt];
    if (static_cast<int>(row.size()) != m.size()) {
      throw std::runtime_error("confusion json has wrong column count");
    }
    for (int pred = 0; pred < m.size(); ++pred) m.at(gt, pred) = row[pred].get<std::uint64_t>();
  }
  return m;
}

namespace {

json recalls_to_json(const std::vector<double>& recalls) {
  json out = json::array();
  for (double r : recalls) {
    if (r < 0.0) {
      out.push_back(nullptr);  // class had no ground-truth frames
    } else {
      out.push_back(r);
    }
  }
  return out;
}

json summary_to_json(const StreamSummary& s) {
  return {{"frame_accuracy", s.frame_accuracy},
          {"per_class_recall", recalls_to_json(s.per_class_recall)},
          {"average_recall", s.average_recall},
          {"confusion", confusion_to_json(s.confusion)}};
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json splits = json::array();
  for (const auto& split : report.splits) {
    json entry = {{"held_out_subject", split.held_out_subject}, {"failed", split.failed}};
    if (split.failed) {
      entry["error"] = split.error;
    } else {
      entry["combined"] = summary_to_json(summarize(split.combined));
      entry["rgb"] = summary_to_json(summarize(split.rgb));
      entry["flow"] = summary_to_json(summarize(split.flow));
    }
    splits.push_back(std::move(entry));
  }

  json out = {{"dataset", report.dataset_name},
              {"labels", report.labels},
              {"combined", summary_to_json(report.combined)},
              {"rgb", summary_to_json(report.rgb)},
              {"flow", summary_to_json(report.flow)},
              {"splits", std::move(splits)}};
  if (report.has_cross_category) {
    out["cross_category_confusion"] = report.cross_category_confusion;
  }
  return out;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "gt\\pred";
  for (const auto& label : m.labels) out << "," << label;
  out << "\n";
  for (int gt = 0; gt < m.size(); ++gt) {
    out << m.labels[gt];
    for (int pred = 0; pred < m.size(); ++pred) out << "," << m.at(gt, pred);
    out << "\n";
  }
}

GrayImage render_confusion_heatmap(const ConfusionMatrix& m, int cell_size) {
  if (cell_size < 1) throw std::invalid_argument("heatmap cell size must be >= 1");
  const int L = m.size();
  GrayImage img(L * cell_size, L * cell_size, 0.0f);
  for (int gt = 0; gt < L; ++gt) {
    const std::uint64_t row = m.row_sum(gt);
    for (int pred = 0; pred < L; ++pred) {
      const float value =
          row == 0 ? 0.0f
                   : static_cast<float>(static_cast<double>(m.at(gt, pred)) /
                                        static_cast<double>(row));
      for (int dy = 0; dy < cell_size; ++dy) {
        for (int dx = 0; dx < cell_size; ++dx) {
          img.data[static_cast<std::size_t>(gt * cell_size + dy) * img.width +
                   pred * cell_size + dx] = value;
        }
      }
    }
  }
  return img;
}

}  // namespace egoact
