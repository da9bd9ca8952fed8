#include "volt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "volt/error.hpp"
#include "volt/metrics.hpp"
#include "volt/parallel.hpp"

namespace volt {

TrainResult train(std::span<const ViewSample* const> data, const ModelConfig& config,
                  const TrainOptions& options, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw DataError("train: empty dataset");
  if (options.batch_size == 0) throw ConfigError("train: batch size must be positive");

  const auto start = std::chrono::steady_clock::now();
  const Rng root(options.seed);
  VoltModel model = VoltModel::create(config, root.split("init"));
  AdamWState state = AdamWState::init(model.params(), options.optimizer);

  std::vector<Tensor> views, targets;
  views.reserve(data.size());
  targets.reserve(data.size());
  for (const ViewSample* s : data) {
    const std::size_t m = options.views == 0 ? s->embeddings.rows() : options.views;
    views.push_back(s->first_views(m));
    if (s->gt.g() != config.g) throw DataError("train: sample grid resolution differs from config");
    targets.push_back(unstitch(config, s->gt));
  }

  const std::size_t n = data.size();
  const std::size_t batch = std::min(options.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;

  std::vector<ParamStore> sample_grads(batch, model.params().zeros_like());
  std::vector<double> sample_loss_v(batch), sample_iou(batch);
  ParamStore grads = model.params().zeros_like();

  TrainResult result{model, model, state, {}, 0.0};
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 0; step < options.steps; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.split("epoch/" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    double loss_sum = 0.0, iou_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < steps_per_epoch && step < options.steps; ++b) {
      const std::size_t lo = b * batch, hi = std::min(n, lo + batch);
      const std::size_t count = hi - lo;
      parallel_for(count, options.threads, [&](std::size_t k) {
        const std::size_t idx = order[lo + k];
        sample_grads[k].set_zero();
        Tensor probs;
        sample_loss_v[k] =
            sample_loss(config, model.params(), views[idx], targets[idx], &sample_grads[k], &probs);
        sample_iou[k] = iou(stitch(config, probs, GridKind::Probabilistic), data[idx]->gt,
                            options.iou_threshold);
      });
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        grads.accumulate(sample_grads[k]);
        batch_loss += sample_loss_v[k];
        loss_sum += sample_loss_v[k];
        iou_sum += sample_iou[k];
      }
      seen += count;
      if (step == 0) result.initial_loss = batch_loss / static_cast<double>(count);
      grads.scale(1.0 / static_cast<double>(count));
      if (options.warmup_steps > step) {
        state.config.lr = options.optimizer.lr * static_cast<double>(step + 1) /
                          static_cast<double>(options.warmup_steps);
      } else {
        state.config.lr = options.optimizer.lr;
      }
      adamw_step(model.params(), grads, state);
      ++step;
    }

    EpochLog row;
    row.epoch = epoch;
    row.step = step;
    row.loss = loss_sum / static_cast<double>(seen);
    row.train_iou = iou_sum / static_cast<double>(seen);
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (row.loss < best_loss) {
      best_loss = row.loss;
      result.best = model;
    }
  }
  result.last = std::move(model);
  result.optimizer = std::move(state);
  return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << "epoch,step,loss,train_iou,wallclock_s\n";
  char buf[160];
  for (const EpochLog& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.3f\n", r.epoch, r.step, r.loss,
                  r.train_iou, r.wallclock_s);
    os << buf;
  }
}

}  // namespace volt
