#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "psn/data.hpp"
#include "psn/net.hpp"
#include "psn/train.hpp"

namespace psn {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kMetricsCsvHeader =
    "epoch,train_loss,train_acc,val_loss,val_acc,total_firing_rate";

// One training/evaluation run. Defaults are the paper protocol's
// hyperparameters; apply_dataset_defaults sets the per-dataset time
// window.
struct RunConfig {
  double tau_s{10.0}, tau_r{10.0};
  double alpha{10.0}, beta{10.0};
  double theta{10.0};
  double lr{1e-2}, weight_decay{1e-4};
  double weight_scale{10.0};
  std::size_t batch{10};
  std::size_t T{300};
  std::size_t epochs{100};

  std::string arch;            // plain DSL string; empty when residual fields are used
  std::string resnet_style;    // "", "pre", "post"
  std::size_t resnet_blocks{0};
  std::size_t resnet_channels{8};

  std::string norm_form{"psp"};  // none | standard | meanfree | psp
  std::string norm_axes{"ln"};   // bn | ln
  double lambda{0.1};
  double momentum{0.9};

  std::uint64_t seed{1};
  std::string dataset{"nmnist"};  // nmnist | fmnist
  std::string data_root;
  std::size_t subsample{6000};    // per-epoch training subsample; 0 = full epoch
  std::size_t val_count{6000};
  std::size_t max_train{0};       // desk-scale caps; 0 = no cap
  std::size_t max_eval{0};
  double loss_true_frac{0.3};
  double loss_false_frac{0.01};

  std::string out_dir{"run"};
  bool eval_every_epoch{true};

  void apply_dataset_defaults();  // T = 300 (nmnist) / 100 (fmnist)
  ModelHyper hyper() const;
  NetworkSpec network_spec(const Shape5& sample_shape) const;
  LossSpec loss_spec() const;
  // Hash of the model-defining fields; checkpoints and eval configs
  // must agree on it.
  std::uint64_t model_hash() const;
};

struct EpochRow {
  std::size_t epoch;
  double train_loss, train_acc;
  double val_loss, val_acc;
  double total_firing_rate;
};

struct LayerFiringRate {
  std::string layer;
  double rate;
};

struct RunMetrics {
  std::vector<EpochRow> rows;
  std::vector<LayerFiringRate> firing_rates;  // final evaluation pass
  double total_firing_rate{0.0};
  double best_val_acc{0.0};
  std::size_t best_epoch{0};
  double wall_seconds{0.0};
};

struct EvalResult {
  double loss{0.0};
  double accuracy{0.0};
  std::vector<LayerFiringRate> firing_rates;
  double total_firing_rate{0.0};
};

EvalResult evaluate(Model& model, const SpikeDataset& data,
                    const std::vector<std::size_t>& indices, const LossSpec& loss,
                    std::size_t batch_size);

struct TrainOutcome {
  RunMetrics metrics;
  Model model;
  AdaBelief optimizer;
};

// Core loop shared by the CLI and the acceptance suite. Deterministic
// given cfg.seed.
TrainOutcome train_model(const RunConfig& cfg, const SpikeDataset& train_data,
                         const std::vector<std::size_t>& train_idx,
                         const SpikeDataset& val_data,
                         const std::vector<std::size_t>& val_idx);

std::string metrics_to_csv(const RunMetrics& m);
std::string metrics_to_json(const RunConfig& cfg, const RunMetrics& m, std::size_t param_count);
std::string config_to_json(const RunConfig& cfg);

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdaBelief& opt,
                     std::uint64_t model_hash);
void load_checkpoint(const std::filesystem::path& path, Model& model, AdaBelief* opt,
                     std::uint64_t expected_model_hash);

// Dataset loading per cfg.dataset / cfg.data_root. split: "train" or "test".
std::unique_ptr<SpikeDataset> open_dataset(const RunConfig& cfg, const std::string& split);

// Full train verb: loads data, trains, writes metrics.csv,
// summary.json and best.ckpt under cfg.out_dir.
RunMetrics run_training(const RunConfig& cfg);

struct SweepPoint {
  double value;
  double accuracy;
  double total_firing_rate;
};
// One run per value over tau_s or lambda, shared seed.
std::vector<SweepPoint> run_sweep(const RunConfig& base, const std::string& param,
                                  const std::vector<double>& values);
std::string sweep_to_csv(const std::string& param, const std::vector<SweepPoint>& points);

// Effective-threshold grid: one row per (lambda, theta, moment).
std::string diag_threshold_csv(const std::vector<double>& lambdas,
                               const std::vector<double>& thetas,
                               const std::vector<double>& moments);

}  // namespace psn
