#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "volt/adamw.hpp"
#include "volt/data_synth.hpp"
#include "volt/model.hpp"

namespace volt {

struct TrainOptions {
  AdamWConfig optimizer;
  std::size_t batch_size = 8;
  std::size_t steps = 500;
  std::size_t views = 0;  // 0 = every view stored in the sample
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double iou_threshold = 0.5;
  std::size_t warmup_steps = 0;  // linear lr ramp over the first steps
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps completed at the end of the epoch
  double loss = 0.0;     // mean sample loss over the epoch
  double train_iou = 0.0;
  double wallclock_s = 0.0;
};

struct TrainResult {
  VoltModel best;   // parameters at the end of the lowest-loss epoch
  VoltModel last;
  AdamWState optimizer;
  std::vector<EpochLog> log;
  double initial_loss = 0.0;  // mean loss of the first batch before any update
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Mini-batch AdamW on mean voxel BCE. Batches come from a seeded per-epoch
// shuffle; per-sample gradients may be computed in parallel but are summed in
// batch order, so results depend only on (data, config, options).
TrainResult train(std::span<const ViewSample* const> data, const ModelConfig& config,
                  const TrainOptions& options, const EpochCallback& on_epoch = {});

// train_log.csv: epoch,step,loss,train_iou,wallclock_s
void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace volt
