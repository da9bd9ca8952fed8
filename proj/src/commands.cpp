#include "volt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "volt/checkpoint.hpp"
#include "volt/data_synth.hpp"
#include "volt/divergence.hpp"
#include "volt/error.hpp"
#include "volt/grad_check.hpp"
#include "volt/metrics.hpp"
#include "volt/parallel.hpp"
#include "volt/train.hpp"

namespace volt {
namespace fs = std::filesystem;

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError&) {
    return kExitConfig;
  } catch (const DataError&) {
    return kExitData;
  } catch (const ShapeError&) {
    return kExitData;
  } catch (const NumericError&) {
    return kExitNumeric;
  } catch (...) {
    return 1;
  }
}

namespace {

void echo_config(const RunConfig& cfg, std::ostream& log) {
  log << "# resolved config\n" << cfg.to_text();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DatasetOptions dataset_options(const RunConfig& cfg) {
  DatasetOptions o;
  o.image_size = cfg.image_size;
  o.embed_dim = cfg.model.d;
  if (cfg.embedder_seed != 0) o.embedder_seed = cfg.embedder_seed;
  return o;
}

std::vector<const ViewSample*> select_split(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train();
  if (split == "val") return ds.validation();
  std::vector<const ViewSample*> all;
  for (const auto& s : ds.samples) all.push_back(&s);
  return all;
}

void check_compatible(const ModelConfig& model, std::uint64_t fingerprint, const Dataset& ds) {
  const DatasetHeader& h = ds.header;
  if (h.embed_dim != model.d) {
    throw ConfigError("dataset embedding width " + std::to_string(h.embed_dim) +
                      " does not match model d " + std::to_string(model.d));
  }
  if (h.g != model.g) {
    throw ConfigError("dataset resolution " + std::to_string(h.g) + " does not match model g " +
                      std::to_string(model.g));
  }
  if (fingerprint != 0 && fingerprint != h.embedder_fingerprint) {
    throw ConfigError("dataset embedder fingerprint does not match the one the model was trained with");
  }
}

Tensor views_for(const ViewSample& s, std::size_t m, std::uint64_t shuffle_seed) {
  Tensor v = s.first_views(m);
  if (shuffle_seed == 0) return v;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(shuffle_seed).split("object/" + std::to_string(s.id) + "/" + std::to_string(m));
  std::shuffle(order.begin(), order.end(), rng.engine());
  return permute_rows(v, order);
}

// Loads the checkpoint named by cfg and checks it against the dataset.
Checkpoint load_for(const RunConfig& cfg, const Dataset& ds) {
  Checkpoint ck = load_checkpoint(cfg.checkpoint_path());
  check_compatible(ck.model.config(), ck.config.data_fingerprint, ds);
  return ck;
}

}  // namespace

void cmd_gen(const RunConfig& cfg, bool force, std::ostream& log) {
  cfg.validate();
  const fs::path dir(cfg.out);
  const bool exists = fs::exists(dir / "manifest.txt") || fs::exists(dir / "grids") ||
                      fs::exists(dir / "views");
  if (exists && !force) {
    throw ConfigError("dataset already exists in " + dir.string() + " (pass --force to overwrite)");
  }
  echo_config(cfg, log);
  const Dataset ds = build_dataset(cfg.objects, cfg.views, cfg.model.g, cfg.seed, dataset_options(cfg));
  if (exists) {
    fs::remove(dir / "manifest.txt");
    fs::remove_all(dir / "grids");
    fs::remove_all(dir / "views");
  }
  const fs::path manifest = write_dataset(ds, dir);
  log << manifest.string() << "\n";
}

void cmd_train(const RunConfig& cfg_in, std::ostream& log) {
  cfg_in.validate();
  RunConfig cfg = cfg_in;
  const Dataset ds = read_dataset(cfg.data);
  check_compatible(cfg.model, 0, ds);
  const std::size_t views = cfg.train_views == 0 ? ds.header.views : cfg.train_views;
  if (views > ds.header.views) throw ConfigError("train_views exceeds the dataset's view count");
  if (views > cfg.model.m_max) {
    throw ConfigError("dataset provides " + std::to_string(views) + " views but m_max is " +
                      std::to_string(cfg.model.m_max));
  }
  cfg.data_fingerprint = ds.header.embedder_fingerprint;
  const auto data = select_split(ds, cfg.train_split);
  if (data.empty()) throw DataError("train: selected split is empty");

  fs::create_directories(cfg.out);
  echo_config(cfg, log);
  {
    auto os = open_out(fs::path(cfg.out) / "config.txt");
    os << cfg.to_text();
  }

  TrainOptions opts;
  opts.optimizer = cfg.optimizer();
  opts.batch_size = cfg.batch_size;
  opts.steps = cfg.steps;
  opts.warmup_steps = cfg.warmup;
  opts.views = views;
  opts.seed = cfg.seed;
  opts.threads = thread_budget();
  const TrainResult result = train(data, cfg.model, opts, [&log](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu step %zu loss %.6f train_iou %.4f (%.1fs)\n",
                  e.epoch, e.step, e.loss, e.train_iou, e.wallclock_s);
    log << buf << std::flush;
  });

  write_train_log((fs::path(cfg.out) / "train_log.csv").string(), result.log);
  save_checkpoint(cfg.checkpoint_path(), cfg, result.best, &result.optimizer);

  // Final IoU of the saved model over the training objects, through the same
  // prediction path eval uses.
  std::vector<double> ious(data.size());
  parallel_for(data.size(), opts.threads, [&](std::size_t i) {
    ious[i] = iou(predict_volume(data[i]->first_views(views), result.best), data[i]->gt, 0.5);
  });
  const double mean_iou = std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size());
  auto os = open_out(fs::path(cfg.out) / "train_summary.txt");
  os << "final_train_iou = " << num(mean_iou) << "\n"
     << "initial_loss = " << num(result.initial_loss) << "\n"
     << "final_epoch_loss = " << num(result.log.back().loss) << "\n";
  log << "final_train_iou " << num(mean_iou) << "\n" << cfg.checkpoint_path() << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Dataset ds = read_dataset(cfg.data);
  const Checkpoint ck = load_for(cfg, ds);
  const auto objects = select_split(ds, cfg.split);
  if (objects.empty()) throw DataError("eval: selected split is empty");

  std::vector<std::size_t> counts;
  for (std::size_t v : cfg.eval_views) {
    if (v <= ds.header.views && v <= ck.model.config().m_max) counts.push_back(v);
  }
  if (counts.empty()) throw ConfigError("eval: no requested view count is available");

  echo_config(cfg, log);
  fs::create_directories(cfg.out);
  auto metrics = open_out(fs::path(cfg.out) / "metrics.csv");
  auto sweep = open_out(fs::path(cfg.out) / "threshold_sweep.csv");
  auto summary = open_out(fs::path(cfg.out) / "metrics_summary.csv");
  metrics << "object_id,views,iou,fscore,precision,recall\n";
  sweep << "views,threshold,mean_iou\n";
  summary << "views,threshold,mean_iou,mean_fscore,mean_precision,mean_recall,objects\n";

  const std::size_t n = objects.size();
  for (std::size_t m : counts) {
    std::vector<VoxelGrid> preds(n);
    parallel_for(n, thread_budget(), [&](std::size_t i) {
      preds[i] = predict_volume(views_for(*objects[i], m, cfg.shuffle_views), ck.model);
    });
    double best_t = cfg.thresholds.front(), best_iou = -1.0;
    for (double t : cfg.thresholds) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += iou(preds[i], objects[i]->gt, t);
      const double mean = sum / static_cast<double>(n);
      sweep << m << ',' << num(t) << ',' << num(mean) << '\n';
      if (mean > best_iou) {
        best_iou = mean;
        best_t = t;
      }
    }
    std::vector<SurfaceScore> scores(n);
    parallel_for(n, thread_budget(), [&](std::size_t i) {
      scores[i] = surface_fscore(preds[i], objects[i]->gt, best_t);
    });
    double sum_iou = 0, sum_f = 0, sum_p = 0, sum_r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = iou(preds[i], objects[i]->gt, best_t);
      metrics << objects[i]->id << ',' << m << ',' << num(v) << ',' << num(scores[i].fscore) << ','
              << num(scores[i].precision) << ',' << num(scores[i].recall) << '\n';
      sum_iou += v;
      sum_f += scores[i].fscore;
      sum_p += scores[i].precision;
      sum_r += scores[i].recall;
    }
    const double dn = static_cast<double>(n);
    summary << m << ',' << num(best_t) << ',' << num(sum_iou / dn) << ',' << num(sum_f / dn) << ','
            << num(sum_p / dn) << ',' << num(sum_r / dn) << ',' << n << '\n';
    char buf[160];
    std::snprintf(buf, sizeof buf, "views %zu t %.2f mean_iou %.4f mean_fscore %.4f\n", m, best_t,
                  sum_iou / dn, sum_f / dn);
    log << buf;
  }
}

void cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Dataset ds = read_dataset(cfg.data);
  const Checkpoint ck = load_for(cfg, ds);
  auto objects = select_split(ds, cfg.split);
  if (objects.empty()) throw DataError("diagnose: selected split is empty");
  if (objects.size() > cfg.diag_objects) objects.resize(cfg.diag_objects);
  const std::size_t views = std::min({cfg.diag_views, ds.header.views, ck.model.config().m_max});

  DivergenceOptions opts;
  if (cfg.diag_head >= 0) opts.head = static_cast<std::size_t>(cfg.diag_head);
  const DivergenceReport report = divergence_report(ck.model, objects, views, opts);

  echo_config(cfg, log);
  fs::create_directories(cfg.out);
  auto attn = open_out(fs::path(cfg.out) / "attention.csv");
  auto div = open_out(fs::path(cfg.out) / "divergence.csv");
  auto kde = open_out(fs::path(cfg.out) / "kde.csv");
  auto summary = open_out(fs::path(cfg.out) / "divergence_summary.csv");
  attn << "layer,object_id,row,col,score\n";
  div << "layer,object_id,D\n";
  kde << "layer,D_grid,density\n";
  summary << "layer,mean_D,bandwidth,fallback\n";
  for (const LayerDivergence& ld : report.layers) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ld.object_d.size(); ++i) {
      div << ld.layer << ',' << report.object_ids[i] << ',' << num(ld.object_d[i]) << '\n';
      sum += ld.object_d[i];
      if (i < cfg.diag_export) {
        const Tensor& s = ld.matrices[i];
        for (std::size_t r = 0; r < s.rows(); ++r)
          for (std::size_t c = 0; c < s.cols(); ++c)
            attn << ld.layer << ',' << report.object_ids[i] << ',' << r << ',' << c << ','
                 << num(s(r, c)) << '\n';
      }
    }
    for (std::size_t g = 0; g < ld.grid.size(); ++g) {
      kde << ld.layer << ',' << num(ld.grid[g]) << ',' << num(ld.kde.density[g]) << '\n';
    }
    const double mean = sum / static_cast<double>(ld.object_d.size());
    summary << ld.layer << ',' << num(mean) << ',' << num(ld.kde.bandwidth) << ','
            << (ld.kde.fallback ? 1 : 0) << '\n';
    char buf[120];
    std::snprintf(buf, sizeof buf, "layer %zu mean_D %.6f\n", ld.layer, mean);
    log << buf;
  }
  if (report.bandwidth_fallback) log << "note: zero-variance layer, KDE bandwidth fell back to 1e-3\n";
}

double cmd_grad_check(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  echo_config(cfg, log);
  const ModelConfig& mc = cfg.model;
  const Rng root(cfg.seed);
  ParamStore params = init_params(mc, root.split("init"));
  // A zero output head would zero every upstream gradient; give it weights.
  {
    Rng hr = root.split("grad-check/head");
    const double limit = std::sqrt(6.0 / static_cast<double>(mc.d + mc.logits_per_token()));
    for (double& v : params.get(names::kHead).data()) v = hr.uniform(-limit, limit);
  }
  const std::size_t m = std::min(cfg.views, mc.m_max);
  Tensor views({m, mc.d});
  Rng vr = root.split("grad-check/views");
  for (double& v : views.data()) v = vr.normal(0.0, 1.0);
  Tensor target({mc.tokens(), mc.logits_per_token()});
  Rng tr = root.split("grad-check/target");
  for (double& v : target.data()) v = tr.uniform(0.0, 1.0) < 0.5 ? 1.0 : 0.0;

  const Objective f = [&](const ParamStore& p, ParamStore* grads) {
    return sample_loss(mc, p, views, target, grads);
  };
  const GradCheckResult r = grad_check(f, params, kGradCheckEpsilon);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "checked %zu entries, max relative error %.3e at %s[%zu] (analytic %.6e, numeric %.6e)\n",
                r.checked, r.max_rel_error, r.worst_param.c_str(), r.worst_index, r.worst_analytic,
                r.worst_numeric);
  log << buf;
  if (!(r.max_rel_error < kGradCheckTolerance)) {
    throw NumericError("grad-check: max relative error " + num(r.max_rel_error) + " >= 1e-4");
  }
  return r.max_rel_error;
}

}  // namespace volt
