#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "mbptrack/data.hpp"
#include "mbptrack/losses.hpp"
#include "mbptrack/model.hpp"

namespace mbp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
};

class Adam {
 public:
  Adam(nn::ParameterStore& store, AdamConfig cfg);
  // Applies one update from the accumulated gradients scaled by `grad_scale`,
  // then clears them.
  void step(double grad_scale = 1.0);
  std::size_t steps() const { return t_; }

 private:
  nn::ParameterStore& store_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t sample_len = 8;
  std::size_t train_memory = 2;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;  // samples per optimizer step
  AdamConfig adam;
  LossWeights weights;
  LossOptions loss;
  bool positive_sampling = true;
  PositiveSamplingConfig sampling;
  double margin = 2.0;
  // Perturbation of the previous ground-truth box used as the search frame.
  double jitter_translation = 0.1;
  double jitter_yaw = 0.05;
  bool yaw_flip = true;
  double max_global_rotation = 0.0;
  // Memory content uses ground-truth masks instead of detached predictions.
  bool gt_memory_masks = false;
  std::uint64_t seed = 0;
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double total = 0.0;
  double mask = 0.0;
  double center = 0.0;
  double quality = 0.0;
  double score = 0.0;
  double bbox = 0.0;
};

class Trainer {
 public:
  Trainer(MbpNetwork& net, TrainConfig cfg);

  // Runs one window frame by frame and accumulates gradients; returns the
  // component losses averaged over the supervised frames.
  LossRecord run_sample(const Sequence& seq, const TrainingSample& sample);

  // Trains for cfg.epochs over every window of every sequence. `on_step` is
  // called after each optimizer update.
  std::vector<LossRecord> fit(const std::vector<Sequence>& data,
                              const std::function<void(const LossRecord&)>& on_step = {});

  const TrainConfig& config() const { return cfg_; }

 private:
  MbpNetwork& net_;
  TrainConfig cfg_;
  Adam adam_;
  std::mt19937_64 rng_;
};

void write_loss_log(std::ostream& os, const std::vector<LossRecord>& records);

}  // namespace mbp
