#pragma once

// Per-stream training driver. Each stream trains in two stages: the encoder
// fine-tunes on single frames through a throwaway per-frame head, then the
// LSTM, class head, and step weights train on frozen precomputed features.
// The curriculum (merge opposite classes, later split the head) runs inside
// the sequence stage, where the final decision head lives.

#include <cstdint>
#include <string>
#include <vector>

#include "egoact/curriculum.hpp"
#include "egoact/model.hpp"
#include "egoact/preprocess.hpp"
#include "egoact/sgd.hpp"

namespace egoact {

/// One video's worth of stream input at central-crop resolution: RGB frames
/// for the appearance stream, flow-color renders for the motion stream.
struct TrainVideo {
  std::string video_id;
  std::string subject;
  std::vector<Image> frames;
  std::vector<int> labels;  // full-label indices, one per frame
};

struct StreamDataset {
  std::string stream_name;  // "rgb" or "flow"; log records and seed derivation
  std::vector<std::string> label_names;
  std::vector<TrainVideo> videos;  // training subjects only
  DatasetStats stats;
  CropConfig crop;
};

/// JSONL-able training log record. val_accuracy is -1 except on iterations
/// where validation ran.
struct TrainLogRow {
  std::string stage;  // "encoder" | "lstm"
  std::string phase;  // "full" | "merged"
  int iteration = 0;  // within the stage
  double lr = 0.0;
  double loss = 0.0;
  double val_accuracy = -1.0;
};

struct TrainStreamOptions {
  EncoderConfig encoder;
  int window = 11;
  int hidden_dim = 64;
  TrainingConfig encoder_cfg;  // frame stage
  TrainingConfig lstm_cfg;     // sequence stage
  CurriculumSchedule curriculum;
  double split_noise_std = 0.01;
  int val_cadence = 75;  // iterations between validation passes; 0 disables
  std::uint64_t seed = 0;
};

struct TrainResult {
  SpliceClassifier<float> model;
  std::vector<TrainLogRow> log;
};

/// Trains one stream end to end. Deterministic for a fixed (data, options)
/// pair; throws with stage/iteration context if the loss goes non-finite.
TrainResult train_stream(const StreamDataset& data, const TrainStreamOptions& opt);

/// Indices of the designated validation videos: the last video of every
/// subject that has at least two. These are excluded from gradient batches.
std::vector<int> validation_video_indices(const StreamDataset& data);

/// Center-crop eval path (no randomness): crop -> resize -> normalize.
Image preprocess_eval(const Image& frame, const CropConfig& crop, const DatasetStats& stats);

/// Per-frame eval-mode features of one video under a frozen encoder.
std::vector<Tensor<float>> encode_video_features(const Encoder<float>& enc,
                                                 const TrainVideo& video,
                                                 const CropConfig& crop,
                                                 const DatasetStats& stats);

}  // namespace egoact
