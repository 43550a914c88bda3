#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "psn/harness.hpp"
#include "synthetic_data.hpp"

using namespace psn;
namespace fs = std::filesystem;

namespace {

// One shared synthetic corpus for every harness test.
const fs::path& corpus_root() {
  static const fs::path root = [] {
    const fs::path r = fs::temp_directory_path() / "psn_harness_corpus";
    if (!fs::exists(r / "events" / "Train")) {
      testsupport::write_synthetic_events(r / "events", 6, 3, 77);
      testsupport::write_synthetic_images(r / "images", 60, 30, 78);
    }
    return r;
  }();
  return root;
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.dataset = "nmnist";
  cfg.data_root = (corpus_root() / "events").string();
  cfg.arch = "34x34x2-n2c3-10";
  cfg.T = 20;
  cfg.epochs = 2;
  cfg.batch = 5;
  cfg.subsample = 0;
  cfg.val_count = 10;
  cfg.seed = 3;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("metrics CSV header and row formatting") {
  RunMetrics m;
  m.rows.push_back({1, 0.5, 0.25, 0.625, 0.125, 0.0625});
  const std::string csv = metrics_to_csv(m);
  CHECK(csv.substr(0, std::string(kMetricsCsvHeader).size()) == kMetricsCsvHeader);
  CHECK(csv.find("1,0.500000,0.250000,0.625000,0.125000,0.062500") != std::string::npos);
}

TEST_CASE("config JSON carries the architecture string verbatim") {
  RunConfig cfg = tiny_config();
  cfg.arch = "34x34x2-n8c3-{n16c3}*5-n16c3-{n32c3}*5-10";
  const std::string j = config_to_json(cfg);
  CHECK(j.find("\"architecture\": \"34x34x2-n8c3-{n16c3}*5-n16c3-{n32c3}*5-10\"") !=
        std::string::npos);
  CHECK(j.find("\"norm_form\"") != std::string::npos);
}

TEST_CASE("model hash separates model-defining fields from run fields") {
  RunConfig a = tiny_config();
  RunConfig b = a;
  b.epochs = 99;          // training-schedule field: same model
  b.out_dir = "elsewhere";
  CHECK(a.model_hash() == b.model_hash());
  RunConfig c = a;
  c.norm_form = "standard";
  CHECK(a.model_hash() != c.model_hash());
  RunConfig d = a;
  d.arch = "34x34x2-n4c3-10";
  CHECK(a.model_hash() != d.model_hash());
}

TEST_CASE("synthetic corpora load through the real dataset loaders") {
  RunConfig cfg = tiny_config();
  std::unique_ptr<SpikeDataset> train = open_dataset(cfg, "train");
  CHECK(train->size() == 60);
  CHECK(train->sample_shape() == Shape5{1, 2, 34, 34, 20});
  std::size_t with_spikes = 0;
  for (std::size_t i = 0; i < train->size(); ++i) with_spikes += train->spikes(i).count() > 0;
  CHECK(with_spikes == 60);

  RunConfig fcfg = cfg;
  fcfg.dataset = "fmnist";
  fcfg.data_root = (corpus_root() / "images").string();
  std::unique_ptr<SpikeDataset> ftrain = open_dataset(fcfg, "train");
  CHECK(ftrain->size() == 60);
  CHECK(ftrain->sample_shape() == Shape5{1, 1, 34, 34, 20});
  CHECK(ftrain->spikes(0).count() > 0);
}

TEST_CASE("run_training writes metrics, summary and checkpoint; reruns are byte-identical") {
  RunConfig cfg = tiny_config();
  cfg.out_dir = (fs::temp_directory_path() / "psn_run_a").string();
  fs::remove_all(cfg.out_dir);
  RunMetrics m = run_training(cfg);
  CHECK(m.rows.size() == 2);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "summary.json"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "best.ckpt"));

  RunConfig cfg2 = cfg;
  cfg2.out_dir = (fs::temp_directory_path() / "psn_run_b").string();
  fs::remove_all(cfg2.out_dir);
  run_training(cfg2);
  CHECK(slurp(fs::path(cfg.out_dir) / "metrics.csv") ==
        slurp(fs::path(cfg2.out_dir) / "metrics.csv"));

  RunConfig cfg3 = cfg;
  cfg3.seed = 4;
  cfg3.out_dir = (fs::temp_directory_path() / "psn_run_c").string();
  fs::remove_all(cfg3.out_dir);
  run_training(cfg3);
  CHECK(slurp(fs::path(cfg.out_dir) / "metrics.csv") !=
        slurp(fs::path(cfg3.out_dir) / "metrics.csv"));
}

TEST_CASE("checkpoint round trip restores weights; hash mismatch is rejected") {
  RunConfig cfg = tiny_config();
  std::mt19937_64 rng(cfg.seed);
  std::unique_ptr<SpikeDataset> data = open_dataset(cfg, "train");
  Model model = assemble(cfg.network_spec(data->sample_shape()), cfg.hyper(), rng);
  AdaBelief opt(OptimizerConfig{}, model.params());

  const fs::path path = fs::temp_directory_path() / "psn_ckpt_test.ckpt";
  save_checkpoint(path, model, opt, cfg.model_hash());

  std::vector<double> original = *model.params()[0].value;
  for (double& w : *model.params()[0].value) w += 1.0;
  load_checkpoint(path, model, &opt, cfg.model_hash());
  CHECK(*model.params()[0].value == original);

  CHECK_THROWS_AS(load_checkpoint(path, model, &opt, cfg.model_hash() + 1), ConfigError);
  fs::remove(path);
}

TEST_CASE("evaluate reports per-layer firing rates") {
  RunConfig cfg = tiny_config();
  std::unique_ptr<SpikeDataset> data = open_dataset(cfg, "test");
  std::mt19937_64 rng(cfg.seed);
  Model model = assemble(cfg.network_spec(data->sample_shape()), cfg.hyper(), rng);
  std::vector<std::size_t> idx{0, 1, 2, 3, 4};
  EvalResult res = evaluate(model, *data, idx, cfg.loss_spec(), cfg.batch);
  REQUIRE(res.firing_rates.size() == 2);  // conv spike layer + output spike layer
  for (const auto& r : res.firing_rates) {
    CHECK(r.rate >= 0.0);
    CHECK(r.rate <= 1.0);
  }
  CHECK(res.accuracy >= 0.0);
}

TEST_CASE("sweep produces one point per value with a CSV rendering") {
  RunConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.max_train = 20;
  cfg.max_eval = 10;
  cfg.out_dir = (fs::temp_directory_path() / "psn_sweep").string();
  std::vector<SweepPoint> pts = run_sweep(cfg, "lambda", {0.01, 0.1});
  REQUIRE(pts.size() == 2);
  const std::string csv = sweep_to_csv("lambda", pts);
  CHECK(csv.find("lambda,") == 0);
  CHECK_THROWS_AS(run_sweep(cfg, "theta", {1.0}), ConfigError);
}

TEST_CASE("effective-threshold diagnostic grid") {
  const std::string csv = diag_threshold_csv({0.1}, {10.0}, {0.0, 1.0});
  CHECK(csv.find("lambda,theta,moment,theta_hat") == 0);
  CHECK(csv.find("3.1622776601683") != std::string::npos);
  CHECK(csv.find("10.488088481701") != std::string::npos);
}
