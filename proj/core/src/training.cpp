#include "dispnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>

#include "dispnet/parallel.hpp"

namespace dispnet::training {

double force_loss(const std::vector<Vec3>& predictions, const std::vector<Vec3>& targets) {
  if (predictions.empty()) throw Error("force_loss: empty batch");
  if (predictions.size() != targets.size()) throw Error("force_loss: prediction and target counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += (predictions[i] - targets[i]).squaredNorm();
  return s / static_cast<double>(predictions.size());
}

BatchingMode parse_batching_mode(std::string_view name) {
  if (name == "normal") return BatchingMode::normal;
  if (name == "unit" || name == "unit_specific" || name == "unit-specific") return BatchingMode::unit_specific;
  throw Error("unknown batching mode '" + std::string(name) + "' (expected normal or unit)");
}

std::string_view to_string(BatchingMode mode) {
  return mode == BatchingMode::normal ? "normal" : "unit_specific";
}

Batches normal_batches(const std::vector<std::size_t>& records, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw Error("batch size must be positive");
  std::vector<std::size_t> order = records;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Batches out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + batch_size));
  }
  return out;
}

namespace {

using UnitKey = std::pair<std::int32_t, std::int64_t>;  // (source, unit id); singletons get unique negative ids

std::map<UnitKey, std::vector<std::size_t>> group_units(const std::vector<DatasetRecord>& all,
                                                        const std::vector<std::size_t>& records) {
  std::map<UnitKey, std::vector<std::size_t>> units;
  for (std::size_t r : records) {
    const auto& rec = all.at(r);
    const std::int64_t id = rec.unit_id >= 0 ? rec.unit_id : -1 - static_cast<std::int64_t>(r);
    units[{rec.source, id}].push_back(r);
  }
  return units;
}

}  // namespace

std::size_t infer_unit_size(const std::vector<DatasetRecord>& all, const std::vector<std::size_t>& records) {
  std::map<std::size_t, std::size_t> freq;
  for (const auto& [key, members] : group_units(all, records)) ++freq[members.size()];
  std::size_t best = 1, best_count = 0;
  for (const auto& [size, count] : freq) {
    if (count > best_count) {
      best = size;
      best_count = count;
    }
  }
  return best;
}

Batches unit_specific_batches(const std::vector<DatasetRecord>& all, const std::vector<std::size_t>& records,
                              std::size_t batch_size, std::size_t unit_size, std::uint64_t seed,
                              const std::function<void(const std::string&)>& warn) {
  if (batch_size == 0) throw Error("batch size must be positive");
  if (unit_size == 0 || batch_size % unit_size != 0) {
    if (warn) {
      warn("batch size " + std::to_string(batch_size) + " is not a multiple of the unit size " +
           std::to_string(unit_size) + "; using normal batching");
    }
    return normal_batches(records, batch_size, seed);
  }
  const auto grouped = group_units(all, records);
  std::vector<const std::vector<std::size_t>*> units;
  for (const auto& [key, members] : grouped) units.push_back(&members);
  std::mt19937_64 rng(seed);
  std::shuffle(units.begin(), units.end(), rng);

  Batches out;
  std::vector<std::size_t> current;
  for (const auto* u : units) {
    if (!current.empty() && current.size() + u->size() > batch_size) {
      out.push_back(std::move(current));
      current.clear();
    }
    current.insert(current.end(), u->begin(), u->end());
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

OptimizerState make_optimizer_state(const diff::ParameterSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adamw_step(diff::ParameterSet& params, const diff::ParameterSet& grads, OptimizerState& state, double lr,
                double weight_decay, const AdamWConfig& adam, const std::function<bool(const std::string&)>& frozen) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw Error("adamw_step: parameter, gradient and moment layouts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) throw Error("adamw_step: non-finite gradient in '" + grads.name(i) + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (frozen && frozen(params.name(i))) continue;
    auto& w = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      const double gk = g.data()[k];
      double& mk = m.data()[k];
      double& vk = v.data()[k];
      mk = adam.beta1 * mk + (1.0 - adam.beta1) * gk;
      vk = adam.beta2 * vk + (1.0 - adam.beta2) * gk * gk;
      const double mhat = mk / c1;
      const double vhat = vk / c2;
      double& wk = w.data()[k];
      wk -= lr * (mhat / (std::sqrt(vhat) + adam.epsilon) + weight_decay * wk);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("train: epochs must be non-negative");
  if (batch_size == 0) throw Error("train: batch size must be positive");
  if (!(lr_initial >= 0.0) || !(lr_final >= 0.0)) throw Error("train: learning rates must be non-negative");
  if (!(weight_decay >= 0.0)) throw Error("train: weight decay must be non-negative");
  if (!(force_scale > 0.0)) throw Error("train: force scale must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw Error("train: val_fraction must lie in [0, 1)");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw Error("train: invalid Adam constants");
  }
}

std::string format_history_line(const EpochLog& log) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d %.10g %.10g %.6g %.3f", log.epoch, log.train_loss, log.val_loss, log.lr,
                log.wall_seconds);
  return buf;
}

Split split_records(const std::vector<DatasetRecord>& records, double val_fraction, std::uint64_t seed,
                    BatchingMode mode) {
  std::map<std::int32_t, std::vector<std::vector<std::size_t>>> by_source;
  if (mode == BatchingMode::unit_specific) {
    std::vector<std::size_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (auto& [key, members] : group_units(records, all)) by_source[key.first].push_back(std::move(members));
  } else {
    for (std::size_t i = 0; i < records.size(); ++i) by_source[records[i].source].push_back({i});
  }
  std::mt19937_64 rng(seed);
  Split s;
  for (auto& [source, items] : by_source) {
    std::shuffle(items.begin(), items.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(items.size())));
    for (std::size_t k = 0; k < items.size(); ++k) {
      auto& dst = k < n_val ? s.val : s.train;
      dst.insert(dst.end(), items[k].begin(), items[k].end());
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

double mean_loss(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& indices,
                 const surrogate::Model& model, const diff::ParameterSet& params, double force_scale, int workers) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t k) {
    thread_local diff::Workspace ws;
    const auto& r = records.at(indices[k]);
    losses[k] = (model.force(r.cluster, params, ws) - force_scale * r.force).squaredNorm();
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(indices.size());
}

TrainResult train(const std::vector<DatasetRecord>& records, const surrogate::Model& model,
                  const diff::ParameterSet& params, const TrainConfig& config, const EpochCallback& on_epoch,
                  const std::function<void(const std::string&)>& warn) {
  config.validate();
  if (records.empty()) throw Error("train: no records");
  if (model.config().force_scale != config.force_scale) {
    throw Error("train: model force_scale and training force_scale differ");
  }
  const Split split = split_records(records, config.val_fraction, config.seed, config.batching);
  if (split.train.empty()) throw Error("train: validation split left no training records");

  std::size_t unit_size = config.unit_size;
  if (config.batching == BatchingMode::unit_specific && unit_size == 0) unit_size = infer_unit_size(records, split.train);

  TrainResult res;
  diff::ParameterSet p = params;
  OptimizerState state = make_optimizer_state(p);
  const auto frozen = [&](const std::string& name) { return !model.trainable(name); };
  double best_score = std::numeric_limits<double>::infinity();
  res.best_params = p;

  std::mt19937_64 epoch_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<diff::ParameterSet> record_grads;
  std::vector<double> record_loss;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = epoch < config.lr_switch_epoch ? config.lr_initial : config.lr_final;
    const std::uint64_t epoch_seed = epoch_rng();
    const Batches batches =
        config.batching == BatchingMode::unit_specific
            ? unit_specific_batches(records, split.train, config.batch_size, unit_size, epoch_seed,
                                    epoch == 0 ? warn : std::function<void(const std::string&)>{})
            : normal_batches(split.train, config.batch_size, epoch_seed);

    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const std::size_t b = batch.size();
      const double weight = 1.0 / static_cast<double>(b);
      while (record_grads.size() < b) record_grads.push_back(p.zeros_like());
      record_loss.assign(b, 0.0);
      parallel_for(b, config.workers, [&](std::size_t k) {
        thread_local diff::Workspace ws;
        record_grads[k].set_zero();
        const auto& r = records[batch[k]];
        record_loss[k] = model.force_loss_gradient(r.cluster, config.force_scale * r.force, weight, p,
                                                   record_grads[k], ws);
      });
      // fixed-order reduction
      diff::ParameterSet total = p.zeros_like();
      double loss = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        total += record_grads[k];
        loss += record_loss[k];
      }
      bool finite = std::isfinite(loss);
      for (std::size_t i = 0; i < total.size() && finite; ++i) finite = total[i].allFinite();
      if (!finite) {
        res.diverged = true;
        res.message = "non-finite loss or gradient in epoch " + std::to_string(epoch) + "; kept the last good parameters";
        res.final_params = p;
        return res;
      }
      adamw_step(p, total, state, lr, config.weight_decay, config.adam, frozen);
      epoch_loss += loss * static_cast<double>(b);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(split.train.size());
    log.val_loss = mean_loss(records, split.val, model, p, config.force_scale, config.workers);
    log.lr = lr;
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(log);

    const double score = split.val.empty() ? log.train_loss : log.val_loss;
    if (!std::isfinite(score)) {
      res.diverged = true;
      res.message = "non-finite loss after epoch " + std::to_string(epoch) + "; kept the last good parameters";
      res.final_params = res.best_params;
      return res;
    }
    if (score < best_score) {
      best_score = score;
      res.best_params = p;
      res.best_epoch = epoch;
    }
    if (on_epoch && !on_epoch(log, p)) break;
  }
  res.final_params = p;
  return res;
}

}  // namespace dispnet::training
