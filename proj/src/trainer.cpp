#include "egoact/trainer.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "egoact/evaluate.hpp"

namespace egoact {

namespace {

struct SampleRef {
  int video = 0;
  int frame = 0;  // frame index (encoder stage) or splice index (lstm stage)
};

void validate_dataset(const StreamDataset& data, const TrainStreamOptions& opt) {
  if (data.videos.empty()) throw std::invalid_argument("training dataset has no videos");
  if (data.label_names.size() < 2) throw std::invalid_argument("need at least 2 classes");
  data.crop.validate();
  opt.encoder_cfg.validate();
  opt.lstm_cfg.validate();
  if (opt.encoder.input_size != data.crop.resize_to) {
    throw std::invalid_argument("encoder input_size " + std::to_string(opt.encoder.input_size) +
                                " does not match crop resize_to " +
                                std::to_string(data.crop.resize_to));
  }
  const int L = static_cast<int>(data.label_names.size());
  for (const auto& video : data.videos) {
    if (video.frames.size() != video.labels.size() || video.frames.empty()) {
      throw std::invalid_argument("video " + video.video_id + " has mismatched frames/labels");
    }
    for (const auto& frame : video.frames) {
      if (frame.width != data.crop.central_width || frame.height != data.crop.central_height ||
          frame.channels != opt.encoder.input_channels) {
        throw std::invalid_argument("video " + video.video_id +
                                    " frames are not at central-crop resolution");
      }
    }
    for (int label : video.labels) {
      if (label < 0 || label >= L) {
        throw std::invalid_argument("video " + video.video_id + " has out-of-range label " +
                                    std::to_string(label));
      }
    }
  }
  if (opt.curriculum.active() &&
      opt.curriculum.phase1_iterations + opt.curriculum.phase2_iterations !=
          opt.lstm_cfg.max_iterations) {
    throw std::invalid_argument(
        "curriculum phase1+phase2 iterations must sum to the sequence stage's max_iterations");
  }
}

bool is_validation(const std::vector<int>& val_indices, int video) {
  for (int v : val_indices) {
    if (v == video) return true;
  }
  return false;
}

void check_finite_loss(double loss, const std::string& stage, const std::string& phase,
                       int iteration) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error("training diverged: non-finite loss in stage " + stage + " (" +
                             phase + ") at iteration " + std::to_string(iteration));
  }
}

/// Velocity buffers after a structural change, preserving momentum for
/// parameters whose shapes survived (everything except the split head).
template <typename Model>
void rebuild_velocity(Model& model, OptimizerState<float>& state) {
  std::vector<Tensor<float>> old = std::move(state.velocity);
  state.velocity.clear();
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string&, Tensor<float>& w, Tensor<float>&) {
    if (i < old.size() && old[i].shape == w.shape) {
      state.velocity.push_back(std::move(old[i]));
    } else {
      state.velocity.emplace_back(w.shape);
    }
    ++i;
  });
}

double frame_validation_accuracy(const FrameClassifier<float>& model, const StreamDataset& data,
                                 const std::vector<int>& val_indices) {
  std::uint64_t correct = 0, total = 0;
  for (int v : val_indices) {
    const TrainVideo& video = data.videos[v];
    for (std::size_t f = 0; f < video.frames.size(); ++f) {
      const Image input = preprocess_eval(video.frames[f], data.crop, data.stats);
      const Tensor<float> logits = model.forward(image_to_tensor(input));
      if (argmax_lowest(logits.data.data(), static_cast<int>(logits.numel())) ==
          video.labels[f]) {
        ++correct;
      }
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double splice_validation_accuracy(const SpliceClassifier<float>& model,
                                  const StreamDataset& data,
                                  const std::vector<int>& val_indices,
                                  const std::vector<std::vector<Tensor<float>>>& features,
                                  const std::vector<int>* merge_mapping) {
  std::uint64_t correct = 0, total = 0;
  for (int v : val_indices) {
    const TrainVideo& video = data.videos[v];
    const auto classify = [&](const std::vector<int>& indices) {
      std::vector<Tensor<float>> inputs;
      inputs.reserve(indices.size());
      for (int f : indices) inputs.push_back(features[v][f]);
      const StreamOutput<float> out = forward_splice(model, inputs, true);
      return argmax_lowest(out.fused.data.data(), static_cast<int>(out.fused.numel()));
    };
    const std::vector<int> predicted =
        predict_frames(static_cast<int>(video.frames.size()), model.window, classify);
    for (std::size_t f = 0; f < video.labels.size(); ++f) {
      const int gt =
          merge_mapping == nullptr ? video.labels[f] : (*merge_mapping)[video.labels[f]];
      if (predicted[f] == gt) ++correct;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

std::vector<int> validation_video_indices(const StreamDataset& data) {
  std::map<std::string, std::vector<int>> by_subject;
  for (std::size_t i = 0; i < data.videos.size(); ++i) {
    by_subject[data.videos[i].subject].push_back(static_cast<int>(i));
  }
  std::vector<int> out;
  for (const auto& [subject, indices] : by_subject) {
    if (indices.size() >= 2) out.push_back(indices.back());
  }
  return out;
}

Image preprocess_eval(const Image& frame, const CropConfig& crop, const DatasetStats& stats) {
  Image out = crop_at(frame, center_crop_offset(frame.width, frame.height, crop.crop_size),
                      crop.crop_size);
  if (crop.crop_size != crop.resize_to) {
    out = resize_bilinear(out, crop.resize_to, crop.resize_to);
  }
  return normalize(out, stats);
}

std::vector<Tensor<float>> encode_video_features(const Encoder<float>& enc,
                                                 const TrainVideo& video,
                                                 const CropConfig& crop,
                                                 const DatasetStats& stats) {
  std::vector<Tensor<float>> features;
  features.reserve(video.frames.size());
  for (const Image& frame : video.frames) {
    features.push_back(encoder_forward(enc, image_to_tensor(preprocess_eval(frame, crop, stats))));
  }
  return features;
}

TrainResult train_stream(const StreamDataset& data, const TrainStreamOptions& opt) {
  validate_dataset(data, opt);
  const int num_classes = static_cast<int>(data.label_names.size());
  const std::vector<int> val_indices = validation_video_indices(data);
  const std::string& stream = data.stream_name;

  TrainResult result;
  auto log_row = [&](const std::string& stage, const std::string& phase, int iteration,
                     double lr, double loss, double val) {
    result.log.push_back({stage, phase, iteration, lr, loss, val});
  };

  // ------------------------------------------------ stage 1: encoder
  FrameClassifier<float> frame_model;
  frame_model.encoder_cfg = opt.encoder;
  frame_model.num_classes = num_classes;
  frame_model.allocate();
  frame_model.init_params(derive_seed(opt.seed, stream + "/encoder/init"));

  std::vector<SampleRef> frame_pool;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    if (is_validation(val_indices, static_cast<int>(v))) continue;
    for (std::size_t f = 0; f < data.videos[v].frames.size(); ++f) {
      frame_pool.push_back({static_cast<int>(v), static_cast<int>(f)});
    }
  }
  if (frame_pool.empty()) throw std::invalid_argument("no training frames after validation split");

  {
    Rng sample_rng(derive_seed(opt.seed, stream + "/encoder/sample"));
    Rng crop_rng(derive_seed(opt.seed, stream + "/encoder/crop"));
    OptimizerState<float> state;
    init_optimizer(frame_model, state);

    for (int iter = 0; iter < opt.encoder_cfg.max_iterations; ++iter) {
      frame_model.zero_grads();
      double loss_sum = 0.0;
      for (int b = 0; b < opt.encoder_cfg.batch_size; ++b) {
        const SampleRef ref =
            frame_pool[sample_rng.uniform_int(static_cast<std::uint64_t>(frame_pool.size()))];
        const TrainVideo& video = data.videos[ref.video];
        Image input = random_crop(video.frames[ref.frame], data.crop.crop_size, crop_rng).first;
        if (data.crop.crop_size != data.crop.resize_to) {
          input = resize_bilinear(input, data.crop.resize_to, data.crop.resize_to);
        }
        input = normalize(input, data.stats);
        loss_sum += frame_model.loss_and_grads(image_to_tensor(input), video.labels[ref.frame]);
      }
      const double mean_loss = loss_sum / opt.encoder_cfg.batch_size;
      check_finite_loss(mean_loss, "encoder", "full", iter);
      scale_grads(frame_model, 1.0 / opt.encoder_cfg.batch_size);
      const double lr = lr_at(opt.encoder_cfg, iter);
      sgd_step(frame_model, state, opt.encoder_cfg);

      double val = -1.0;
      const bool last = iter + 1 == opt.encoder_cfg.max_iterations;
      if (!val_indices.empty() && opt.val_cadence > 0 &&
          ((iter + 1) % opt.val_cadence == 0 || last)) {
        val = frame_validation_accuracy(frame_model, data, val_indices);
      }
      log_row("encoder", "full", iter, lr, mean_loss, val);
    }
  }

  // --------------------------------------------- stage 2: sequence model
  const bool curriculum = opt.curriculum.active();
  MergeResult merge;
  if (curriculum) {
    LabelMap full;
    full.names = data.label_names;
    merge = curriculum_merge(full, opt.curriculum.merge_pairs);
  }
  const int initial_classes =
      curriculum ? static_cast<int>(merge.merged.names.size()) : num_classes;

  SpliceClassifier<float> model;
  model.encoder_cfg = opt.encoder;
  model.window = opt.window;
  model.hidden_dim = opt.hidden_dim;
  model.num_classes = initial_classes;
  model.allocate();
  model.init_params(derive_seed(opt.seed, stream + "/lstm/init"));
  model.encoder = frame_model.encoder;  // fine-tuned weights, now frozen

  // Frozen-encoder features for every video (validation included).
  std::vector<std::vector<Tensor<float>>> features(data.videos.size());
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    features[v] = encode_video_features(model.encoder, data.videos[v], data.crop, data.stats);
  }

  std::vector<std::vector<Splice>> splices(data.videos.size());
  std::vector<SampleRef> splice_pool;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    if (is_validation(val_indices, static_cast<int>(v))) continue;
    splices[v] = make_splices(data.videos[v].labels, opt.window, SpliceMode::kTraining);
    for (std::size_t s = 0; s < splices[v].size(); ++s) {
      splice_pool.push_back({static_cast<int>(v), static_cast<int>(s)});
    }
  }
  if (splice_pool.empty()) throw std::invalid_argument("no training splices");

  const auto trainable = [](const std::string& name) {
    return name.rfind("lstm.", 0) == 0 || name.rfind("head.", 0) == 0 ||
           name == "step_weights";
  };

  Rng sample_rng(derive_seed(opt.seed, stream + "/lstm/sample"));
  OptimizerState<float> state;
  init_optimizer(model, state);

  SpliceCache<float> cache;
  std::vector<Tensor<float>> inputs;
  bool split_done = false;
  const auto do_split = [&] {
    model = curriculum_split(model, merge.mapping, num_classes, opt.split_noise_std,
                             derive_seed(opt.seed, stream + "/lstm"));
    rebuild_velocity(model, state);  // momentum survives except at the new head
    split_done = true;
  };
  for (int iter = 0; iter < opt.lstm_cfg.max_iterations; ++iter) {
    const bool merged_phase = curriculum && iter < opt.curriculum.phase1_iterations;
    if (curriculum && !merged_phase && !split_done) do_split();
    const std::string phase = merged_phase ? "merged" : "full";

    model.zero_grads();
    double loss_sum = 0.0;
    for (int b = 0; b < opt.lstm_cfg.batch_size; ++b) {
      const SampleRef ref =
          splice_pool[sample_rng.uniform_int(static_cast<std::uint64_t>(splice_pool.size()))];
      const Splice& splice = splices[ref.video][ref.frame];
      inputs.clear();
      for (int f : splice.frame_indices) inputs.push_back(features[ref.video][f]);
      const int label = merged_phase ? merge.mapping[splice.label] : splice.label;
      loss_sum += splice_loss_and_grads(model, inputs, true, label, cache);
    }
    const double mean_loss = loss_sum / opt.lstm_cfg.batch_size;
    check_finite_loss(mean_loss, "lstm", phase, iter);
    scale_grads(model, 1.0 / opt.lstm_cfg.batch_size);
    const double lr = lr_at(opt.lstm_cfg, iter);
    sgd_step(model, state, opt.lstm_cfg, trainable);

    double val = -1.0;
    const bool last = iter + 1 == opt.lstm_cfg.max_iterations;
    if (!val_indices.empty() && opt.val_cadence > 0 &&
        ((iter + 1) % opt.val_cadence == 0 || last)) {
      val = splice_validation_accuracy(model, data, val_indices, features,
                                       merged_phase ? &merge.mapping : nullptr);
    }
    log_row("lstm", phase, iter, lr, mean_loss, val);
  }
  // Zero-length phase 2 still ends on the full label set.
  if (curriculum && !split_done) do_split();

  result.model = std::move(model);
  return result;
}

}  // namespace egoact
