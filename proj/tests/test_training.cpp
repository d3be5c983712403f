#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "egoact/curriculum.hpp"
#include "egoact/model.hpp"
#include "egoact/rng.hpp"
#include "egoact/sgd.hpp"
#include "egoact/trainer.hpp"

using namespace egoact;

namespace {

struct ToyModel {
  Tensor<double> a{std::vector<int>{2}}, da{std::vector<int>{2}};
  Tensor<double> b{std::vector<int>{1}}, db{std::vector<int>{1}};

  void for_each_parameter(
      const std::function<void(const std::string&, Tensor<double>&, Tensor<double>&)>& fn) {
    fn("a", a, da);
    fn("b", b, db);
  }
};

// Class k paints a distinct half/stripe bright so both stages can learn the
// mapping quickly.
Image class_pattern(int k, int size, Rng& rng) {
  Image img(size, size, 3);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        float v = 0.2f;
        if (k == 0 && x < size / 2) v = 0.9f;
        if (k == 1 && x >= size / 2) v = 0.9f;
        if (k == 2 && y < size / 2) v = 0.9f;
        img.at(c, x, y) = v + 0.05f * static_cast<float>(rng.uniform(-1.0, 1.0));
      }
    }
  }
  return img;
}

StreamDataset make_dataset(int num_classes, int videos_per_subject, std::uint64_t seed) {
  const int size = 16;
  const int seg = 8;
  StreamDataset data;
  data.stream_name = "rgb";
  for (int k = 0; k < num_classes; ++k) data.label_names.push_back("c" + std::to_string(k));
  data.crop.central_width = size;
  data.crop.central_height = size;
  data.crop.crop_size = 12;
  data.crop.resize_to = size;

  Rng rng(seed);
  StatsAccumulator acc(3);
  for (int s = 0; s < 2; ++s) {
    for (int v = 0; v < videos_per_subject; ++v) {
      TrainVideo video;
      video.subject = "S" + std::to_string(s + 1);
      video.video_id = video.subject + "_V" + std::to_string(v + 1);
      for (int k = 0; k < num_classes; ++k) {
        for (int t = 0; t < seg; ++t) {
          video.frames.push_back(class_pattern(k, size, rng));
          video.labels.push_back(k);
          acc.add(video.frames.back());
        }
      }
      data.videos.push_back(std::move(video));
    }
  }
  data.stats = acc.finalize();
  return data;
}

TrainStreamOptions fast_options(std::uint64_t seed) {
  TrainStreamOptions opt;
  opt.encoder.input_channels = 3;
  opt.encoder.input_size = 16;
  opt.encoder.blocks = {{4, 3, 1, 2}, {8, 3, 1, 2}};
  opt.encoder.feature_dim = 16;
  opt.window = 3;
  opt.hidden_dim = 8;
  opt.encoder_cfg.base_lr = 0.01;
  opt.encoder_cfg.lr_step = 40;
  opt.encoder_cfg.max_iterations = 40;
  opt.encoder_cfg.batch_size = 8;
  opt.encoder_cfg.weight_decay = 0.0005;
  opt.lstm_cfg = opt.encoder_cfg;
  opt.lstm_cfg.clip_norm = 5.0;
  opt.val_cadence = 20;
  opt.seed = seed;
  return opt;
}

}  // namespace

TEST_CASE("lr schedule steps down at exact breakpoints") {
  TrainingConfig cfg;
  cfg.base_lr = 0.1;
  cfg.lr_step = 10;
  cfg.lr_decay_factor = 0.1;
  CHECK(lr_at(cfg, 0) == doctest::Approx(0.1));
  CHECK(lr_at(cfg, 9) == doctest::Approx(0.1));
  CHECK(lr_at(cfg, 10) == doctest::Approx(0.01));
  CHECK(lr_at(cfg, 25) == doctest::Approx(0.001));
}

TEST_CASE("plain sgd step without momentum or decay") {
  ToyModel m;
  m.a.data = {1.0, -2.0};
  m.da.data = {0.5, 0.5};
  m.b.data = {3.0};
  m.db.data = {1.0};

  TrainingConfig cfg;
  cfg.base_lr = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  OptimizerState<double> state;
  init_optimizer(m, state);
  sgd_step(m, state, cfg);
  CHECK(m.a.data[0] == doctest::Approx(1.0 - 0.1 * 0.5));
  CHECK(m.a.data[1] == doctest::Approx(-2.0 - 0.1 * 0.5));
  CHECK(m.b.data[0] == doctest::Approx(3.0 - 0.1 * 1.0));
  CHECK(state.iteration == 1);
}

TEST_CASE("momentum accumulates velocity across steps") {
  ToyModel m;
  m.a.data = {0.0, 0.0};
  m.da.data = {1.0, 1.0};
  m.b.data = {0.0};
  m.db.data = {0.0};

  TrainingConfig cfg;
  cfg.base_lr = 0.1;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  OptimizerState<double> state;
  init_optimizer(m, state);
  sgd_step(m, state, cfg);  // v = -0.1, w = -0.1
  sgd_step(m, state, cfg);  // v = -0.09 - 0.1 = -0.19, w = -0.29
  CHECK(m.a.data[0] == doctest::Approx(-0.29));
}

TEST_CASE("weight decay pulls parameters toward zero even with zero gradient") {
  ToyModel m;
  m.a.data = {2.0, -2.0};
  TrainingConfig cfg;
  cfg.base_lr = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.5;
  OptimizerState<double> state;
  init_optimizer(m, state);
  sgd_step(m, state, cfg);
  CHECK(m.a.data[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  CHECK(m.a.data[1] == doctest::Approx(-2.0 + 0.1 * 0.5 * 2.0));
}

TEST_CASE("trainable filter freezes everything it excludes") {
  ToyModel m;
  m.a.data = {1.0, 1.0};
  m.da.data = {1.0, 1.0};
  m.b.data = {1.0};
  m.db.data = {1.0};
  TrainingConfig cfg;
  cfg.weight_decay = 0.1;
  OptimizerState<double> state;
  init_optimizer(m, state);
  sgd_step(m, state, cfg, [](const std::string& name) { return name == "a"; });
  CHECK(m.a.data[0] != 1.0);
  CHECK(m.b.data[0] == 1.0);  // untouched, not even weight-decayed
}

TEST_CASE("global-norm clipping rescales large gradients") {
  ToyModel m;
  m.a.data = {0.0, 0.0};
  m.da.data = {6.0, 8.0};  // norm 10
  TrainingConfig cfg;
  cfg.base_lr = 1.0;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  cfg.clip_norm = 5.0;  // scale = 0.5
  OptimizerState<double> state;
  init_optimizer(m, state);
  sgd_step(m, state, cfg);
  CHECK(m.a.data[0] == doctest::Approx(-3.0));
  CHECK(m.a.data[1] == doctest::Approx(-4.0));
}

TEST_CASE("non-finite gradients and stale optimizer state are loud errors") {
  ToyModel m;
  m.da.data = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  TrainingConfig cfg;
  OptimizerState<double> state;
  init_optimizer(m, state);
  CHECK_THROWS_WITH_AS(sgd_step(m, state, cfg), doctest::Contains("parameter a"),
                       std::runtime_error);

  ToyModel fresh;
  OptimizerState<double> stale;
  init_optimizer(fresh, stale);
  fresh.a = Tensor<double>({5});
  fresh.da = Tensor<double>({5});
  CHECK_THROWS_WITH_AS(sgd_step(fresh, stale, cfg), doctest::Contains("stale"),
                       std::runtime_error);
}

TEST_CASE("curriculum merge folds each pair into one class") {
  LabelMap labels;
  labels.names = {"hold_a", "hold_b", "hold_c", "slide_right", "slide_left", "slide_down"};
  const MergeResult merged = curriculum_merge(labels, {{3, 4}});
  CHECK(merged.merged.names ==
        std::vector<std::string>{"hold_a", "hold_b", "hold_c", "slide_right+slide_left",
                                 "slide_down"});
  CHECK(merged.mapping == std::vector<int>{0, 1, 2, 3, 3, 4});

  CHECK_THROWS(curriculum_merge(labels, {{1, 1}}));
  CHECK_THROWS(curriculum_merge(labels, {{0, 9}}));
  CHECK_THROWS(curriculum_merge(labels, {{0, 1}, {1, 2}}));  // overlap
}

TEST_CASE("zero-noise head split preserves merged-class scores exactly") {
  LabelMap labels;
  labels.names = {"a", "b", "c", "d"};
  const MergeResult merge = curriculum_merge(labels, {{1, 2}});

  FrameClassifier<float> merged;
  merged.encoder_cfg.input_channels = 3;
  merged.encoder_cfg.input_size = 16;
  merged.encoder_cfg.blocks = {{4, 3, 1, 2}};
  merged.encoder_cfg.feature_dim = 8;
  merged.num_classes = 3;
  merged.allocate();
  merged.init_params(55);

  const FrameClassifier<float> full = curriculum_split(merged, merge.mapping, 4, 0.0, 77);
  CHECK(full.num_classes == 4);

  Rng rng(7);
  Tensor<float> frame({3, 16, 16});
  for (auto& v : frame.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  const Tensor<float> merged_logits = merged.forward(frame);
  const Tensor<float> full_logits = full.forward(frame);
  REQUIRE(full_logits.numel() == 4);
  for (int c = 0; c < 4; ++c) {
    CHECK(full_logits[c] == doctest::Approx(merged_logits[merge.mapping[c]]).epsilon(1e-7));
  }

  // The encoder came over bit-identical.
  CHECK(full.encoder.blocks[0].w.data == merged.encoder.blocks[0].w.data);

  // With noise the pair rows diverge but stay near the merged row.
  const FrameClassifier<float> noisy = curriculum_split(merged, merge.mapping, 4, 0.01, 77);
  const Tensor<float> noisy_logits = noisy.forward(frame);
  CHECK(noisy_logits[1] != noisy_logits[2]);
}

TEST_CASE("validation videos are the last of every subject that has two or more") {
  StreamDataset data = make_dataset(2, 2, 1);
  const auto val = validation_video_indices(data);
  REQUIRE(val.size() == 2);
  CHECK(data.videos[val[0]].video_id == "S1_V2");
  CHECK(data.videos[val[1]].video_id == "S2_V2");

  StreamDataset singles = make_dataset(2, 1, 2);
  CHECK(validation_video_indices(singles).empty());
}

TEST_CASE("preprocess_eval matches the eval-mode preprocessing chain") {
  StreamDataset data = make_dataset(2, 1, 3);
  const Image& frame = data.videos[0].frames[0];
  const Image a = preprocess_eval(frame, data.crop, data.stats);
  Rng rng(1);
  const Image b = preprocess_frame(frame, data.crop, data.stats, PreprocessMode::kEval, rng);
  CHECK(a.data == b.data);
}

TEST_CASE("train_stream learns separable patterns and logs both stages") {
  const StreamDataset data = make_dataset(2, 2, 10);
  const TrainStreamOptions opt = fast_options(44);
  const TrainResult result = train_stream(data, opt);

  CHECK(result.model.num_classes == 2);
  CHECK(result.model.window == 3);

  int encoder_rows = 0, lstm_rows = 0, val_rows = 0;
  double first_enc = -1.0, last_enc = -1.0;
  for (const auto& row : result.log) {
    if (row.stage == "encoder") {
      if (encoder_rows == 0) first_enc = row.loss;
      last_enc = row.loss;
      ++encoder_rows;
    } else {
      CHECK(row.stage == "lstm");
      ++lstm_rows;
    }
    CHECK(row.phase == "full");  // no curriculum configured
    if (row.val_accuracy >= 0.0) ++val_rows;
  }
  CHECK(encoder_rows == 40);
  CHECK(lstm_rows == 40);
  CHECK(val_rows >= 2);
  CHECK(last_enc < first_enc);

  // The designated validation videos never feed gradients, so accuracy on
  // them is meaningful; on this trivially separable data it should be high
  // by the end.
  double final_val = -1.0;
  for (const auto& row : result.log) {
    if (row.val_accuracy >= 0.0) final_val = row.val_accuracy;
  }
  CHECK(final_val > 0.6);
}

TEST_CASE("train_stream is deterministic") {
  const StreamDataset data = make_dataset(2, 2, 11);
  const TrainStreamOptions opt = fast_options(45);
  const TrainResult a = train_stream(data, opt);
  const TrainResult b = train_stream(data, opt);

  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].val_accuracy == b.log[i].val_accuracy);
  }
  CHECK(a.model.head_w.data == b.model.head_w.data);
  CHECK(a.model.encoder.fc_w.data == b.model.encoder.fc_w.data);
  CHECK(a.model.lstm.w_i.data == b.model.lstm.w_i.data);
  CHECK(a.model.step_weights.data == b.model.step_weights.data);

  const TrainStreamOptions other = fast_options(46);
  const TrainResult c = train_stream(data, other);
  CHECK(a.model.head_w.data != c.model.head_w.data);
}

TEST_CASE("curriculum phases show up in the log and the head ends full-size") {
  const StreamDataset data = make_dataset(3, 2, 12);
  TrainStreamOptions opt = fast_options(47);
  opt.curriculum.merge_pairs = {{0, 1}};
  opt.curriculum.phase1_iterations = 20;
  opt.curriculum.phase2_iterations = 20;
  const TrainResult result = train_stream(data, opt);

  CHECK(result.model.num_classes == 3);
  int merged_rows = 0, full_rows = 0;
  for (const auto& row : result.log) {
    if (row.stage != "lstm") continue;
    if (row.phase == "merged") {
      ++merged_rows;
      CHECK(row.iteration <= 20);
    } else {
      ++full_rows;
    }
  }
  CHECK(merged_rows == 20);
  CHECK(full_rows == 20);
}

TEST_CASE("curriculum phase totals must match the lstm schedule") {
  const StreamDataset data = make_dataset(3, 2, 13);
  TrainStreamOptions opt = fast_options(48);
  opt.curriculum.merge_pairs = {{0, 1}};
  opt.curriculum.phase1_iterations = 10;
  opt.curriculum.phase2_iterations = 10;  // sums to 20, schedule says 40
  CHECK_THROWS(train_stream(data, opt));
}
