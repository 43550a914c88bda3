#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "psn/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void add_common_flags(CLI::App* cmd, psn::RunConfig& cfg) {
  cmd->add_option("--dataset", cfg.dataset, "nmnist | fmnist")
      ->check(CLI::IsMember({"nmnist", "fmnist"}));
  cmd->add_option("--data-root", cfg.data_root, "dataset root (or PSN_DATA_ROOT)");
  cmd->add_option("--arch", cfg.arch, "architecture string, e.g. 34x34x2-n8c3-{n16c3}*5-10");
  cmd->add_option("--resnet", cfg.resnet_style, "residual style: pre | post")
      ->check(CLI::IsMember({"pre", "post"}));
  cmd->add_option("--blocks", cfg.resnet_blocks, "residual block count");
  cmd->add_option("--channels", cfg.resnet_channels, "residual block width");
  cmd->add_option("--norm", cfg.norm_form, "none | standard | meanfree | psp");
  cmd->add_option("--axes", cfg.norm_axes, "statistics axes: bn | ln");
  cmd->add_option("--lambda", cfg.lambda, "normalization stabilizer");
  cmd->add_option("--momentum", cfg.momentum, "EMA momentum for bn-mode statistics");
  cmd->add_option("--tau-s", cfg.tau_s, "spike response time constant (ms)");
  cmd->add_option("--tau-r", cfg.tau_r, "refractory time constant (ms)");
  cmd->add_option("--alpha", cfg.alpha, "surrogate scale");
  cmd->add_option("--beta", cfg.beta, "surrogate decay");
  cmd->add_option("--theta", cfg.theta, "firing threshold");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
  cmd->add_option("--weight-scale", cfg.weight_scale, "init scale multiplier");
  cmd->add_option("--batch", cfg.batch, "mini-batch size");
  cmd->add_option("--time-steps,-T", cfg.T, "time steps (default 300 nmnist / 100 fmnist)");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--subsample", cfg.subsample, "per-epoch training subsample (0 = full)");
  cmd->add_option("--val-count", cfg.val_count, "validation split size");
  cmd->add_option("--max-train", cfg.max_train, "cap on training samples (0 = all)");
  cmd->add_option("--max-eval", cfg.max_eval, "cap on validation/test samples (0 = all)");
  cmd->add_option("--loss-true-frac", cfg.loss_true_frac, "target spike fraction, true class");
  cmd->add_option("--loss-false-frac", cfg.loss_false_frac, "target spike fraction, others");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_flag("--final-eval-only", [&cfg](std::int64_t) { cfg.eval_every_epoch = false; },
                "evaluate the validation split only after the last epoch");
}

void finish_config(psn::RunConfig& cfg, bool t_given) {
  if (cfg.data_root.empty()) {
    if (const char* env = std::getenv("PSN_DATA_ROOT")) cfg.data_root = env;
  }
  if (!t_given) {
    std::size_t keep = cfg.T;
    cfg.apply_dataset_defaults();
    (void)keep;
  }
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::string cur;
  for (char ch : csv) {
    if (ch == ',') {
      out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::stod(cur));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with postsynaptic-potential normalization"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a config file");

  psn::RunConfig cfg;
  cfg.T = 0;  // sentinel: dataset default unless set

  auto* train = app.add_subcommand("train", "train a model and write metrics + checkpoint");
  add_common_flags(train, cfg);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common_flags(eval, cfg);
  std::string ckpt_path;
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

  auto* sweep = app.add_subcommand("sweep", "one run per hyperparameter value");
  add_common_flags(sweep, cfg);
  std::string sweep_param, sweep_values;
  sweep->add_option("--param", sweep_param, "tau_s | lambda")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();

  auto* diag = app.add_subcommand("diag-threshold", "effective-threshold grid CSV");
  std::string lambdas = "0.001,0.01,0.1,1", thetas = "1,10";
  std::string moments = "0,0.25,0.5,0.75,1,1.5,2,3,4,6,8,10";
  std::string diag_out;
  diag->add_option("--lambdas", lambdas, "lambda grid");
  diag->add_option("--thetas", thetas, "theta grid");
  diag->add_option("--moments", moments, "second-raw-moment grid");
  diag->add_option("--out", diag_out, "output CSV path (default stdout)");

  auto* inspect = app.add_subcommand("inspect-data", "dataset summary");
  add_common_flags(inspect, cfg);
  std::string inspect_split = "train";
  inspect->add_option("--split", inspect_split, "train | test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (diag->parsed()) {
      const std::string csv =
          psn::diag_threshold_csv(parse_values(lambdas), parse_values(thetas),
                                  parse_values(moments));
      if (diag_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream f(diag_out);
        f << csv;
      }
      return 0;
    }

    const bool t_given = cfg.T != 0;
    finish_config(cfg, t_given);

    if (train->parsed()) {
      psn::RunMetrics m = psn::run_training(cfg);
      std::cout << "best_val_acc=" << m.best_val_acc << " best_epoch=" << m.best_epoch
                << " wall_s=" << m.wall_seconds << "\n";
      std::cout << "outputs in " << cfg.out_dir << "\n";
      return 0;
    }

    if (eval->parsed()) {
      std::unique_ptr<psn::SpikeDataset> test = psn::open_dataset(cfg, "test");
      std::mt19937_64 rng(cfg.seed);
      psn::Shape5 shape = test->sample_shape();
      shape.t = cfg.T;
      psn::Model model = psn::assemble(cfg.network_spec(shape), cfg.hyper(), rng);
      psn::load_checkpoint(ckpt_path, model, nullptr, cfg.model_hash());
      std::vector<std::size_t> idx(test->size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      if (cfg.max_eval && idx.size() > cfg.max_eval) idx.resize(cfg.max_eval);
      psn::EvalResult res = psn::evaluate(model, *test, idx, cfg.loss_spec(), cfg.batch);
      nlohmann::ordered_json j;
      j["schema_version"] = psn::kMetricsSchemaVersion;
      j["samples"] = idx.size();
      j["accuracy"] = res.accuracy;
      j["loss"] = res.loss;
      j["total_firing_rate"] = res.total_firing_rate;
      nlohmann::ordered_json rates = nlohmann::ordered_json::array();
      for (const auto& r : res.firing_rates)
        rates.push_back({{"layer", r.layer}, {"rate", r.rate}});
      j["per_layer_firing_rates"] = rates;
      std::cout << j.dump(2) << "\n";
      if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream f(std::filesystem::path(cfg.out_dir) / "eval.json");
        f << j.dump(2) << "\n";
      }
      return 0;
    }

    if (sweep->parsed()) {
      std::vector<psn::SweepPoint> pts =
          psn::run_sweep(cfg, sweep_param, parse_values(sweep_values));
      const std::string csv = psn::sweep_to_csv(sweep_param, pts);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream f(std::filesystem::path(cfg.out_dir) / "sweep.csv");
      f << csv;
      std::cout << csv;
      return 0;
    }

    if (inspect->parsed()) {
      std::unique_ptr<psn::SpikeDataset> data = psn::open_dataset(cfg, inspect_split);
      std::vector<std::size_t> per_class(10, 0);
      for (std::size_t i = 0; i < data->size(); ++i) ++per_class[data->label(i)];
      std::cout << "samples=" << data->size() << " shape=" << data->sample_shape().str() << "\n";
      for (std::size_t c = 0; c < 10; ++c)
        std::cout << "class " << c << ": " << per_class[c] << "\n";
      if (data->size() > 0) {
        psn::SpikeTensor s = data->spikes(0);
        std::cout << "sample0 spikes=" << s.count() << " rate="
                  << static_cast<double>(s.count()) / static_cast<double>(s.size()) << "\n";
      }
      return 0;
    }
  } catch (const psn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const psn::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const psn::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const psn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
