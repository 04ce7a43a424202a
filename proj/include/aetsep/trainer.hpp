#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aetsep/corpus.hpp"
#include "aetsep/losses.hpp"
#include "aetsep/separator.hpp"
#include "aetsep/tensor.hpp"

namespace aetsep {

enum class OptimizerKind { kAdam, kSgd };

std::string to_string(LossKind kind);
LossKind loss_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);
std::string to_string(TargetSource target);
TargetSource target_from_string(const std::string& name);

struct TrainConfig {
  LossKind loss = LossKind::kSdr;
  int epochs = 10;
  Index batch_size = 16;
  double dropout = 0.2;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  Index segment_len = 8192;
  TargetSource target = TargetSource::kA;
};

void validate(const TrainConfig& config);

struct AdamState {
  Tensor m;
  Tensor v;
};

// Bias-corrected Adam update on one tensor. step counts from 1.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, std::int64_t step, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

void sgd_step(Tensor& param, const Tensor& grad, double lr);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_sdr_db = 0.0;
};

struct TrainerState {
  std::map<std::string, AdamState> adam;
  std::int64_t step_count = 0;
  std::vector<EpochLog> log;
};

// Seeded epochs of segment batches: forward in training mode, loss averaged
// over the batch, backward, one optimizer step per batch. Validation runs
// sdr_db on the held-out full sentences after every epoch. Aborts with a
// diagnostic naming the epoch/batch if the loss turns non-finite.
TrainerState train(SeparationModel& model, const std::vector<MixturePair>& train_pairs,
                   const std::vector<MixturePair>& val_pairs, const TrainConfig& config,
                   TrainerState state = {}, bool verbose = false);

struct Checkpoint {
  SeparationModel model;
  TrainerState state;
  TrainConfig config;
};

// Binary format: 8-byte magic "AETSEPv1", length-prefixed text header
// (key=value lines), tensor records (name, rank, dims, little-endian f64
// payload), then a CRC-32 over everything after the magic.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aetsep
