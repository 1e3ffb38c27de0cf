#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dispnet/dataset.hpp"
#include "dispnet/diff.hpp"
#include "dispnet/surrogate.hpp"

namespace dispnet::training {

/// Mean over the batch of |pred - target|^2. Throws on an empty batch or a
/// length mismatch.
double force_loss(const std::vector<Vec3>& predictions, const std::vector<Vec3>& targets);

enum class BatchingMode { normal, unit_specific };

BatchingMode parse_batching_mode(std::string_view name);
std::string_view to_string(BatchingMode mode);

/// Record indices per batch for one epoch.
using Batches = std::vector<std::vector<std::size_t>>;

/// Shuffled records cut into consecutive batches of `batch_size` (last may be short).
Batches normal_batches(const std::vector<std::size_t>& records, std::size_t batch_size, std::uint64_t seed);

/// Whole monomer units per batch. Records sharing (source, unit_id) form a
/// unit; units are shuffled with `seed` and packed greedily without splitting,
/// so a batch never exceeds `batch_size` unless a single unit does. Falls back
/// to normal batching, with a message through `warn`, when batch_size is not a
/// multiple of `unit_size`.
Batches unit_specific_batches(const std::vector<DatasetRecord>& all, const std::vector<std::size_t>& records,
                              std::size_t batch_size, std::size_t unit_size, std::uint64_t seed,
                              const std::function<void(const std::string&)>& warn = {});

/// Most common number of records per (source, unit_id) group.
std::size_t infer_unit_size(const std::vector<DatasetRecord>& all, const std::vector<std::size_t>& records);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  diff::ParameterSet m, v;
  std::int64_t step = 0;
};

OptimizerState make_optimizer_state(const diff::ParameterSet& params);

/// w <- w - lr (m_hat / (sqrt(v_hat) + eps) + weight_decay w) with
/// bias-corrected moments. Tensors for which `frozen(name)` holds are left
/// untouched. A non-finite gradient throws naming the tensor.
void adamw_step(diff::ParameterSet& params, const diff::ParameterSet& grads, OptimizerState& state, double lr,
                double weight_decay, const AdamWConfig& adam = {},
                const std::function<bool(const std::string&)>& frozen = {});

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 36;
  double lr_initial = 1e-3;
  double lr_final = 1e-4;
  int lr_switch_epoch = 50;  // epochs [0, switch) use lr_initial
  double weight_decay = 0.004;
  double force_scale = 1e3;  // targets are multiplied by this at load time
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  BatchingMode batching = BatchingMode::normal;
  std::size_t unit_size = 0;  // 0: most common unit size in the data
  AdamWConfig adam;
  int workers = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double lr = 0.0;
  double wall_seconds = 0.0;
};

/// `epoch train_loss val_loss lr wall_seconds`
std::string format_history_line(const EpochLog& log);

struct Split {
  std::vector<std::size_t> train, val;
};

/// Validation split stratified by source tag. In unit-specific mode whole
/// units go to one side; otherwise records are split individually.
Split split_records(const std::vector<DatasetRecord>& records, double val_fraction, std::uint64_t seed,
                    BatchingMode mode);

struct TrainResult {
  diff::ParameterSet final_params;
  diff::ParameterSet best_params;  // lowest validation loss (training loss without a validation set)
  int best_epoch = -1;
  std::vector<EpochLog> history;
  bool diverged = false;
  std::string message;
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochLog&, const diff::ParameterSet&)>;

/// Trains `params` (initial values) on `records` by force matching. Targets
/// are scaled by config.force_scale; the model's force_scale must agree. A
/// non-finite loss or gradient stops training and returns the parameters from
/// before the failing step.
TrainResult train(const std::vector<DatasetRecord>& records, const surrogate::Model& model,
                  const diff::ParameterSet& params, const TrainConfig& config, const EpochCallback& on_epoch = {},
                  const std::function<void(const std::string&)>& warn = {});

/// Mean force loss over `indices` with scaled targets, evaluated in parallel
/// and reduced in index order.
double mean_loss(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& indices,
                 const surrogate::Model& model, const diff::ParameterSet& params, double force_scale, int workers);

}  // namespace dispnet::training
