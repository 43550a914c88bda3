#include "psn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <malloc.h>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "psn/errors.hpp"

namespace psn {
namespace {

using json = nlohmann::ordered_json;

NormForm parse_norm_form(const std::string& s) {
  if (s == "none") return NormForm::Identity;
  if (s == "standard") return NormForm::Standard;
  if (s == "meanfree") return NormForm::MeanFree;
  if (s == "psp") return NormForm::RawMoment;
  throw ConfigError("unknown norm form '" + s + "' (none|standard|meanfree|psp)");
}

AxesMode parse_axes_mode(const std::string& s) {
  if (s == "bn") return AxesMode::BN;
  if (s == "ln") return AxesMode::LN;
  throw ConfigError("unknown axes mode '" + s + "' (bn|ln)");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f << text;
}

struct FiringTotals {
  std::vector<LayerFiringRate> per_layer;
  double total;
};

FiringTotals firing_totals(Model& model) {
  FiringTotals ft{{}, 0.0};
  std::size_t spikes = 0, steps = 0;
  for (const FiringStat* st : model.firing_stats()) {
    ft.per_layer.push_back({st->layer, st->rate()});
    spikes += st->spikes;
    steps += st->unit_steps;
  }
  ft.total = steps ? static_cast<double>(spikes) / static_cast<double>(steps) : 0.0;
  return ft;
}

}  // namespace

void RunConfig::apply_dataset_defaults() {
  if (dataset == "nmnist") {
    T = 300;
  } else if (dataset == "fmnist") {
    T = 100;
  } else {
    throw ConfigError("unknown dataset '" + dataset + "' (nmnist|fmnist)");
  }
}

ModelHyper RunConfig::hyper() const {
  ModelHyper h;
  h.tau_s = tau_s;
  h.tau_r = tau_r;
  h.theta = theta;
  h.weight_scale = weight_scale;
  h.surrogate = SurrogateConfig{alpha, beta};
  h.norm.form = parse_norm_form(norm_form);
  h.norm.axes_mode = parse_axes_mode(norm_axes);
  h.norm.lambda = lambda;
  h.norm.momentum = momentum;
  return h;
}

NetworkSpec RunConfig::network_spec(const Shape5& sample_shape) const {
  if (!resnet_style.empty()) {
    NetworkSpec::Style style;
    if (resnet_style == "pre")
      style = NetworkSpec::Style::ResnetPre;
    else if (resnet_style == "post")
      style = NetworkSpec::Style::ResnetPost;
    else
      throw ConfigError("resnet style must be 'pre' or 'post'");
    return make_resnet_spec(sample_shape.h, sample_shape.w, sample_shape.c, style,
                            resnet_blocks, resnet_channels);
  }
  if (arch.empty()) throw ConfigError("no architecture: set arch or resnet fields");
  NetworkSpec spec = parse_architecture(arch);
  const LayerSpec& in = spec.layers.front();
  if (in.in_h != sample_shape.h || in.in_w != sample_shape.w || in.in_c != sample_shape.c)
    throw ConfigError("architecture input " + render_architecture(spec) +
                      " does not match dataset sample shape " + sample_shape.str());
  return spec;
}

LossSpec RunConfig::loss_spec() const {
  return LossSpec::from_fractions(loss_true_frac, loss_false_frac, T);
}

std::uint64_t RunConfig::model_hash() const {
  std::string s = arch + "|" + resnet_style + "|" + std::to_string(resnet_blocks) + "|" +
                  std::to_string(resnet_channels) + "|" + norm_form + "|" + norm_axes + "|" +
                  fmt(lambda) + "|" + fmt(momentum) + "|" + fmt(tau_s) + "|" + fmt(tau_r) + "|" +
                  fmt(alpha) + "|" + fmt(beta) + "|" + fmt(theta) + "|" + fmt(weight_scale);
  return fnv1a(s);
}

EvalResult evaluate(Model& model, const SpikeDataset& data,
                    const std::vector<std::size_t>& indices, const LossSpec& loss,
                    std::size_t batch_size) {
  EvalResult res;
  model.reset_firing();
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t off = 0; off < indices.size(); off += batch_size) {
    const std::size_t end = std::min(off + batch_size, indices.size());
    std::vector<std::size_t> idx(indices.begin() + off, indices.begin() + end);
    Batch batch = make_batch(data, idx);
    AnalogTensor out = model.forward(batch.spikes.analog(), Phase::Eval);
    LossResult lr = spike_count_loss(out, batch.labels, loss);
    loss_sum += lr.loss;
    ++batches;
    for (std::size_t b = 0; b < idx.size(); ++b)
      correct += (lr.predicted[b] == batch.labels[b]);
    model.release_saved();
  }
  res.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  res.accuracy =
      indices.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(indices.size());
  FiringTotals ft = firing_totals(model);
  res.firing_rates = std::move(ft.per_layer);
  res.total_firing_rate = ft.total;
  return res;
}

TrainOutcome train_model(const RunConfig& cfg, const SpikeDataset& train_data,
                         const std::vector<std::size_t>& train_idx,
                         const SpikeDataset& val_data,
                         const std::vector<std::size_t>& val_idx) {
  // Activation tensors are tens of MB and turned over every batch; keep
  // them on the heap instead of mmap round trips to the kernel.
#ifdef __GLIBC__
  static const bool allocator_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)allocator_tuned;
#endif
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.seed);
  const ModelHyper hyper = cfg.hyper();
  Shape5 sample_shape = train_data.sample_shape();
  sample_shape.t = cfg.T;
  NetworkSpec spec = cfg.network_spec(sample_shape);
  TrainOutcome out{RunMetrics{}, assemble(spec, hyper, rng), AdaBelief{}};
  Model& model = out.model;

  OptimizerConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.weight_decay = cfg.weight_decay;
  out.optimizer = AdaBelief(ocfg, model.params());
  const LossSpec loss = cfg.loss_spec();

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t used = order.size();
    if (cfg.subsample > 0 && cfg.subsample < used) used = cfg.subsample;

    double loss_sum = 0.0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t off = 0; off < used; off += cfg.batch) {
      const std::size_t end = std::min(off + cfg.batch, used);
      std::vector<std::size_t> idx(order.begin() + off, order.begin() + end);
      Batch batch = make_batch(train_data, idx);
      model.zero_grads();
      AnalogTensor outspikes = model.forward(batch.spikes.analog(), Phase::Train);
      LossResult lr = spike_count_loss(outspikes, batch.labels, loss);
      model.backward(lr.grad_seed);
      model.release_saved();
      out.optimizer.step(model.params());
      loss_sum += lr.loss;
      ++batches;
      for (std::size_t b = 0; b < idx.size(); ++b)
        correct += (lr.predicted[b] == batch.labels[b]);
    }

    EpochRow row{};
    row.epoch = epoch;
    row.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    row.train_acc = used ? static_cast<double>(correct) / static_cast<double>(used) : 0.0;
    const bool last = (epoch + 1 == cfg.epochs);
    if (!val_idx.empty() && (cfg.eval_every_epoch || last)) {
      EvalResult ev = evaluate(model, val_data, val_idx, loss, cfg.batch);
      row.val_loss = ev.loss;
      row.val_acc = ev.accuracy;
      row.total_firing_rate = ev.total_firing_rate;
      if (ev.accuracy >= out.metrics.best_val_acc) {
        out.metrics.best_val_acc = ev.accuracy;
        out.metrics.best_epoch = epoch;
      }
      if (last) {
        out.metrics.firing_rates = ev.firing_rates;
        out.metrics.total_firing_rate = ev.total_firing_rate;
      }
    }
    out.metrics.rows.push_back(row);
  }
  out.metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string metrics_to_csv(const RunMetrics& m) {
  std::string s = std::string(kMetricsCsvHeader) + "\n";
  for (const EpochRow& r : m.rows)
    s += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.train_acc) + "," +
         fmt(r.val_loss) + "," + fmt(r.val_acc) + "," + fmt(r.total_firing_rate) + "\n";
  return s;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["tau_s"] = cfg.tau_s;
  j["tau_r"] = cfg.tau_r;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["theta"] = cfg.theta;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["weight_scale"] = cfg.weight_scale;
  j["batch"] = cfg.batch;
  j["T"] = cfg.T;
  j["epochs"] = cfg.epochs;
  j["architecture"] = cfg.arch;
  j["resnet_style"] = cfg.resnet_style;
  j["resnet_blocks"] = cfg.resnet_blocks;
  j["resnet_channels"] = cfg.resnet_channels;
  j["norm_form"] = cfg.norm_form;
  j["norm_axes"] = cfg.norm_axes;
  j["lambda"] = cfg.lambda;
  j["momentum"] = cfg.momentum;
  j["seed"] = cfg.seed;
  j["dataset"] = cfg.dataset;
  j["data_root"] = cfg.data_root;
  j["subsample"] = cfg.subsample;
  j["val_count"] = cfg.val_count;
  j["max_train"] = cfg.max_train;
  j["max_eval"] = cfg.max_eval;
  j["loss_true_frac"] = cfg.loss_true_frac;
  j["loss_false_frac"] = cfg.loss_false_frac;
  return j.dump(2);
}

std::string metrics_to_json(const RunConfig& cfg, const RunMetrics& m, std::size_t param_count) {
  json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["architecture"] = cfg.arch.empty()
                          ? (cfg.resnet_style + "-resnet-" +
                             std::to_string(2 * cfg.resnet_blocks + 2))
                          : cfg.arch;
  j["config"] = json::parse(config_to_json(cfg));
  j["model_hash"] = cfg.model_hash();
  j["parameter_count"] = param_count;
  j["epochs_run"] = m.rows.size();
  j["best_val_acc"] = m.best_val_acc;
  j["best_epoch"] = m.best_epoch;
  j["total_firing_rate"] = m.total_firing_rate;
  json rates = json::array();
  for (const LayerFiringRate& r : m.firing_rates)
    rates.push_back({{"layer", r.layer}, {"rate", r.rate}});
  j["per_layer_firing_rates"] = rates;
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2);
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdaBelief& opt,
                     std::uint64_t model_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write checkpoint " + path.string());
  const char magic[8] = {'P', 'S', 'N', 'C', 'K', 'P', 'T', '1'};
  f.write(magic, 8);
  auto write_u64 = [&f](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  write_u64(model_hash);
  std::vector<ParamRef> params = model.params();
  write_u64(params.size());
  for (const ParamRef& p : params) {
    write_u64(p.name.size());
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u64(p.value->size());
    f.write(reinterpret_cast<const char*>(p.value->data()),
            static_cast<std::streamsize>(p.value->size() * sizeof(double)));
  }
  AdaBelief& o = const_cast<AdaBelief&>(opt);
  write_u64(o.steps());
  for (std::size_t i = 0; i < params.size(); ++i) {
    f.write(reinterpret_cast<const char*>(o.first_moment()[i].data()),
            static_cast<std::streamsize>(o.first_moment()[i].size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(o.second_moment()[i].data()),
            static_cast<std::streamsize>(o.second_moment()[i].size() * sizeof(double)));
  }
}

void load_checkpoint(const std::filesystem::path& path, Model& model, AdaBelief* opt,
                     std::uint64_t expected_model_hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "PSNCKPT1")
    throw FormatError("bad checkpoint magic in " + path.string());
  auto read_u64 = [&f, &path]() {
    std::uint64_t v;
    f.read(reinterpret_cast<char*>(&v), 8);
    if (!f) throw FormatError("truncated checkpoint " + path.string());
    return v;
  };
  const std::uint64_t hash = read_u64();
  if (hash != expected_model_hash)
    throw ConfigError("checkpoint/config mismatch: model hash " + std::to_string(hash) +
                      " != " + std::to_string(expected_model_hash));
  std::vector<ParamRef> params = model.params();
  const std::uint64_t count = read_u64();
  if (count != params.size()) throw FormatError("checkpoint parameter count mismatch");
  for (ParamRef& p : params) {
    const std::uint64_t name_len = read_u64();
    std::string name(name_len, '\0');
    f.read(name.data(), static_cast<std::streamsize>(name_len));
    if (name != p.name)
      throw FormatError("checkpoint parameter order mismatch: " + name + " vs " + p.name);
    const std::uint64_t sz = read_u64();
    if (sz != p.value->size()) throw FormatError("checkpoint parameter size mismatch: " + name);
    f.read(reinterpret_cast<char*>(p.value->data()),
           static_cast<std::streamsize>(sz * sizeof(double)));
  }
  if (opt) {
    opt->set_steps(read_u64());
    for (std::size_t i = 0; i < params.size(); ++i) {
      f.read(reinterpret_cast<char*>(opt->first_moment()[i].data()),
             static_cast<std::streamsize>(opt->first_moment()[i].size() * sizeof(double)));
      f.read(reinterpret_cast<char*>(opt->second_moment()[i].data()),
             static_cast<std::streamsize>(opt->second_moment()[i].size() * sizeof(double)));
    }
  }
  if (!f) throw FormatError("truncated checkpoint " + path.string());
}

std::unique_ptr<SpikeDataset> open_dataset(const RunConfig& cfg, const std::string& split) {
  namespace fs = std::filesystem;
  if (cfg.data_root.empty()) throw ConfigError("data_root not set (flag or PSN_DATA_ROOT)");
  const fs::path root(cfg.data_root);
  if (cfg.dataset == "nmnist") {
    const std::string dir = (split == "train") ? "Train" : "Test";
    return std::make_unique<NMnistDataset>(root, dir, cfg.T);
  }
  if (cfg.dataset == "fmnist") {
    auto pick = [&root](const std::string& base) -> fs::path {
      for (const char* ext : {"", ".gz"}) {
        fs::path p = root / (base + ext);
        if (fs::exists(p)) return p;
      }
      throw FormatError("F-MNIST file not found: " + (root / base).string() + "[.gz]");
    };
    if (split == "train")
      return std::make_unique<FMnistDataset>(pick("train-images-idx3-ubyte"),
                                             pick("train-labels-idx1-ubyte"), cfg.T, cfg.seed);
    return std::make_unique<FMnistDataset>(pick("t10k-images-idx3-ubyte"),
                                           pick("t10k-labels-idx1-ubyte"), cfg.T, cfg.seed);
  }
  throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

RunMetrics run_training(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  std::unique_ptr<SpikeDataset> train_data = open_dataset(cfg, "train");

  std::size_t total = train_data->size();
  std::size_t val_count = std::min(cfg.val_count, total);
  DatasetSplit split = split_dataset(total, val_count, cfg.seed);
  if (cfg.max_train && split.train.size() > cfg.max_train) split.train.resize(cfg.max_train);
  if (cfg.max_eval && split.validation.size() > cfg.max_eval)
    split.validation.resize(cfg.max_eval);

  TrainOutcome outcome =
      train_model(cfg, *train_data, split.train, *train_data, split.validation);

  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "metrics.csv", metrics_to_csv(outcome.metrics));
  write_text(fs::path(cfg.out_dir) / "summary.json",
             metrics_to_json(cfg, outcome.metrics, outcome.model.parameter_count()));
  save_checkpoint(fs::path(cfg.out_dir) / "best.ckpt", outcome.model, outcome.optimizer,
                  cfg.model_hash());
  return outcome.metrics;
}

std::vector<SweepPoint> run_sweep(const RunConfig& base, const std::string& param,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepPoint> points;
  for (double v : values) {
    RunConfig cfg = base;
    if (param == "tau_s")
      cfg.tau_s = v;
    else if (param == "lambda")
      cfg.lambda = v;
    else
      throw ConfigError("sweep parameter must be tau_s or lambda, got '" + param + "'");
    cfg.out_dir = base.out_dir + "/" + param + "_" + fmt(v);
    RunMetrics m = run_training(cfg);
    points.push_back({v, m.best_val_acc, m.total_firing_rate});
  }
  return points;
}

std::string sweep_to_csv(const std::string& param, const std::vector<SweepPoint>& points) {
  std::string s = param + ",accuracy,total_firing_rate\n";
  for (const SweepPoint& p : points)
    s += fmt(p.value) + "," + fmt(p.accuracy) + "," + fmt(p.total_firing_rate) + "\n";
  return s;
}

std::string diag_threshold_csv(const std::vector<double>& lambdas,
                               const std::vector<double>& thetas,
                               const std::vector<double>& moments) {
  if (lambdas.empty() || thetas.empty() || moments.empty())
    throw ConfigError("diag-threshold: all grids must be non-empty");
  // Full precision: this CSV is consumed numerically, not just read.
  auto g17 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string s = "lambda,theta,moment,theta_hat\n";
  for (double lam : lambdas)
    for (double th : thetas)
      for (double mom : moments)
        s += g17(lam) + "," + g17(th) + "," + g17(mom) + "," +
             g17(effective_threshold(mom, lam, th, 0.0)) + "\n";
  return s;
}

}  // namespace psn
