// Acceptance suite: one PASS/FAIL line per criterion, exit code equal
// to the number of failures. Criteria 6-8 train small models on
// deterministic synthetic corpora written in the real on-disk formats;
// give the binary criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "psn/data.hpp"
#include "psn/harness.hpp"
#include "psn/kernels.hpp"
#include "psn/layers.hpp"
#include "psn/net.hpp"
#include "psn/norm.hpp"
#include "psn/train.hpp"
#include "synthetic_data.hpp"

namespace fs = std::filesystem;
using namespace psn;

namespace {

struct Result {
  bool pass{false};
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- 1
// Kernel exactness against the closed forms.
Result criterion1() {
  const std::size_t K = 300;
  const double tau_s = 10.0, tau_r = 10.0, theta = 10.0;
  KernelTable eps = build_epsilon(tau_s, K);
  KernelTable nu = build_nu(theta, tau_r, K);
  double worst = 0.0;
  for (std::size_t t = 0; t < K; ++t) {
    const double te = static_cast<double>(t);
    const double eps_ref = (te / tau_s) * std::exp(1.0 - te / tau_s);
    const double nu_ref = -2.0 * theta * std::exp(-te / tau_r);
    worst = std::max(worst, std::abs(eps.samples[t] - eps_ref));
    worst = std::max(worst, std::abs(nu.samples[t] - nu_ref));
  }
  const double peak_err = std::abs(eps.samples[10] - 1.0);
  const double nu0_err = std::abs(nu.samples[0] + 20.0);
  worst = std::max({worst, peak_err, nu0_err});
  Result r;
  r.pass = worst <= 1e-12;
  r.detail = "max |sample - closed form| = " + fmt(worst) + " over " + std::to_string(K) +
             " grid points (eps(10) err " + fmt(peak_err) + ", nu(0) err " + fmt(nu0_err) + ")";
  return r;
}

// ---------------------------------------------------------------- 2
// Central finite-difference audit of every differentiable component.
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

AnalogTensor random_tensor(Shape5 s, std::mt19937_64& rng, double lo, double hi) {
  AnalogTensor t(s);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

Result criterion2() {
  const double t0 = now_seconds();
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_what;
  auto record = [&](double analytic, double fd, const std::string& what) {
    const double e = rel_err(analytic, fd);
    if (e > worst) {
      worst = e;
      worst_what = what;
    }
  };
  auto dot = [](const AnalogTensor& a, const AnalogTensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
  };

  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(trial));
    const int comp = trial % 7;
    std::uniform_int_distribution<std::size_t> pick;

    if (comp == 0) {
      // temporal convolution (both lags)
      std::uniform_real_distribution<double> taud(2.0, 12.0);
      const std::size_t T = 24;
      KernelTable k = build_epsilon(taud(rng), T);
      const int lag = trial % 2;
      AnalogTensor x = random_tensor({1, 2, 1, 1, T}, rng, -1.0, 1.0);
      AnalogTensor r = random_tensor(x.shape(), rng, -1.0, 1.0);
      AnalogTensor g = causal_conv_adjoint(r, k, lag);
      for (int j = 0; j < 6; ++j) {
        const std::size_t i = pick(rng) % x.size();
        AnalogTensor xp = x, xm = x;
        xp.values()[i] += h;
        xm.values()[i] -= h;
        const double fd = (dot(r, causal_conv(xp, k, lag)) - dot(r, causal_conv(xm, k, lag))) /
                          (2.0 * h);
        record(g.values()[i], fd, "temporal-conv input");
      }
    } else if (comp == 1 || comp == 2) {
      // weighted layers: input and weight gradients
      LayerParams p;
      AnalogTensor x;
      if (comp == 1) {
        p.kind = LayerKind::Dense;
        p.in_features = 5;
        p.out_features = 4;
        x = random_tensor({2, 5, 1, 1, 6}, rng, -1.0, 1.0);
      } else {
        p.kind = LayerKind::Conv;
        p.in_features = 2;
        p.out_features = 3;
        p.ksize = 3;
        x = random_tensor({1, 2, 5, 4, 3}, rng, -1.0, 1.0);
      }
      p.weights.resize(p.weight_count());
      std::uniform_real_distribution<double> wd(-1.0, 1.0);
      for (double& w : p.weights) w = wd(rng);
      auto apply = [&](const AnalogTensor& in, const LayerParams& q) {
        return q.kind == LayerKind::Dense ? dense_forward(in, q) : conv_forward(in, q);
      };
      AnalogTensor out = apply(x, p);
      AnalogTensor r = random_tensor(out.shape(), rng, -1.0, 1.0);
      AnalogTensor gin = p.kind == LayerKind::Dense
                             ? dense_backward_input(r, p, x.shape())
                             : conv_backward_input(r, p, x.shape());
      std::vector<double> gw;
      if (p.kind == LayerKind::Dense)
        dense_backward_weights(r, x, p, gw);
      else
        conv_backward_weights(r, x, p, gw);
      for (int j = 0; j < 4; ++j) {
        const std::size_t i = pick(rng) % x.size();
        AnalogTensor xp = x, xm = x;
        xp.values()[i] += h;
        xm.values()[i] -= h;
        const double fd = (dot(r, apply(xp, p)) - dot(r, apply(xm, p))) / (2.0 * h);
        record(gin.values()[i], fd, "weighted-layer input");
      }
      for (int j = 0; j < 4; ++j) {
        const std::size_t i = pick(rng) % p.weights.size();
        LayerParams pp = p, pm = p;
        pp.weights[i] += h;
        pm.weights[i] -= h;
        const double fd = (dot(r, apply(x, pp)) - dot(r, apply(x, pm))) / (2.0 * h);
        record(gw[i], fd, "weighted-layer weight");
      }
    } else if (comp >= 3 && comp <= 5) {
      // normalization forms, both axis modes, exact statistic chain
      NormalizerConfig nc;
      nc.form = comp == 3 ? NormForm::Standard
                          : comp == 4 ? NormForm::MeanFree : NormForm::RawMoment;
      nc.axes_mode = (trial % 2 == 0) ? AxesMode::BN : AxesMode::LN;
      nc.lambda = 0.1;
      const std::size_t C = 3;
      AnalogTensor x = random_tensor({2, C, 2, 2, 6}, rng, 0.2, 1.5);
      auto fresh = [&]() {
        Normalizer n(nc, C);
        if (n.has_gamma())
          for (std::size_t c = 0; c < C; ++c) n.gamma().values()[c] = 0.8 + 0.1 * double(c);
        if (n.has_xi())
          for (std::size_t c = 0; c < C; ++c) n.xi().values()[c] = 0.1 * double(c);
        return n;
      };
      Normalizer n0 = fresh();
      AnalogTensor out = n0.forward(x, Phase::Train);
      AnalogTensor r = random_tensor(out.shape(), rng, -1.0, 1.0);
      AnalogTensor g = n0.backward(r);
      for (int j = 0; j < 6; ++j) {
        const std::size_t i = pick(rng) % x.size();
        AnalogTensor xp = x, xm = x;
        xp.values()[i] += h;
        xm.values()[i] -= h;
        Normalizer np = fresh(), nm = fresh();
        const double fd =
            (dot(r, np.forward(xp, Phase::Train)) - dot(r, nm.forward(xm, Phase::Train))) /
            (2.0 * h);
        record(g.values()[i], fd, "normalizer input");
      }
    } else {
      // spike-count loss seed
      const std::size_t T = 8, N = 3;
      AnalogTensor out = random_tensor({N, 10, 1, 1, T}, rng, 0.0, 1.0);
      std::uniform_int_distribution<std::size_t> ld(0, 9);
      std::vector<std::size_t> labels(N);
      for (auto& l : labels) l = ld(rng);
      LossSpec spec = LossSpec::from_fractions(0.3, 0.01, T);
      LossResult lr = spike_count_loss(out, labels, spec);
      for (int j = 0; j < 6; ++j) {
        const std::size_t i = pick(rng) % out.size();
        AnalogTensor op = out, om = out;
        op.values()[i] += h;
        om.values()[i] -= h;
        const double fd = (spike_count_loss(op, labels, spec).loss -
                           spike_count_loss(om, labels, spec).loss) /
                          (2.0 * h);
        record(lr.grad_seed.values()[i], fd, "loss seed");
      }
    }
  }

  const double elapsed = now_seconds() - t0;
  Result r;
  r.pass = worst <= 1e-5 && elapsed < 60.0;
  r.detail = std::to_string(trials) + " trials, max relative error " + fmt(worst) + " (" +
             worst_what + "), " + fmt(elapsed) + " s";
  return r;
}

// ---------------------------------------------------------------- 3
// Self-normalization in the lambda -> 0 limit, the constant-input
// value at lambda = 0.1, and the mean-subtracting form's annihilation
// of constant drive.
Result criterion3() {
  std::mt19937_64 rng(31);
  double worst_moment = 0.0;
  for (AxesMode mode : {AxesMode::BN, AxesMode::LN}) {
    NormalizerConfig nc;
    nc.form = NormForm::RawMoment;
    nc.axes_mode = mode;
    nc.lambda = 1e-12;  // the contract requires lambda > 0; this probes the limit
    Normalizer n(nc, 4);
    AnalogTensor x = random_tensor({2, 4, 3, 3, 10}, rng, -1.0, 1.0);
    AnalogTensor out = n.forward(x, Phase::Train);
    AxisSet axes = mode == AxesMode::BN ? AxisSet::bn_axes() : AxisSet::ln_axes();
    AnalogTensor m = reduce_second_raw_moment(out, axes);
    for (double v : m.values()) worst_moment = std::max(worst_moment, std::abs(v - 1.0));
  }

  NormalizerConfig nc;
  nc.form = NormForm::RawMoment;
  nc.axes_mode = AxesMode::LN;
  nc.lambda = 0.1;
  Normalizer n(nc, 2);
  AnalogTensor c3({1, 2, 3, 3, 5}, 3.0);
  AnalogTensor out = n.forward(c3, Phase::Train);
  const double expected = 3.0 / std::sqrt(9.1);
  double worst_const = 0.0;
  for (double v : out.values()) worst_const = std::max(worst_const, std::abs(v - expected));

  NormalizerConfig sc;
  sc.form = NormForm::Standard;
  sc.axes_mode = AxesMode::LN;
  sc.lambda = 0.1;
  Normalizer s(sc, 2);
  AnalogTensor sout = s.forward(c3, Phase::Train);
  double worst_annihilate = 0.0;
  for (double v : sout.values()) worst_annihilate = std::max(worst_annihilate, std::abs(v));

  Result r;
  r.pass = worst_moment <= 1e-9 && worst_const <= 1e-9 && worst_annihilate <= 1e-9;
  r.detail = "post-norm moment err " + fmt(worst_moment) +
             " (lambda->0 limit at 1e-12), constant-3 err " + fmt(worst_const) + " vs " +
             fmt(expected) + ", mean-subtracting output on constants " + fmt(worst_annihilate);
  return r;
}

// ---------------------------------------------------------------- 4
// Effective-threshold grid: monotone in the moment, sqrt(lambda)*theta
// at moment zero.
Result criterion4() {
  const std::vector<double> lambdas{1e-3, 1e-2, 1e-1, 1.0};
  const std::vector<double> thetas{1.0, 10.0};
  std::vector<double> moments;
  for (int i = 0; i <= 8; ++i) moments.push_back(0.25 * i);

  const std::string csv = diag_threshold_csv(lambdas, thetas, moments);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::pair<double, double>, std::vector<double>> grid;
  while (std::getline(in, line)) {
    double lam, th, mom, hat;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &lam, &th, &mom, &hat) != 4)
      return {false, "could not parse CSV row '" + line + "'"};
    grid[{lam, th}].push_back(hat);
  }

  bool monotone = true;
  double worst_zero = 0.0;
  for (double lam : lambdas)
    for (double th : thetas) {
      const std::vector<double>& col = grid[{lam, th}];
      if (col.size() != moments.size()) return {false, "grid row missing"};
      for (std::size_t i = 1; i < col.size(); ++i)
        if (!(col[i] > col[i - 1])) monotone = false;
      worst_zero = std::max(worst_zero, std::abs(col[0] - std::sqrt(lam) * th));
    }

  Result r;
  r.pass = monotone && worst_zero <= 1e-9;
  r.detail = std::string("monotone in moment on all 8 (lambda,theta) pairs: ") +
             (monotone ? "yes" : "NO") + ", max |theta_hat(0) - sqrt(lambda)*theta| = " +
             fmt(worst_zero);
  return r;
}

// ---------------------------------------------------------------- 5
// Spike-for-spike agreement with an independent brute-force simulator
// written directly against the kernel definitions.
std::vector<int> brute_layer(const std::vector<int>& in, double w, double tau_s, double tau_r,
                             double theta, std::size_t T) {
  std::vector<double> a(T, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t tp = 0; tp <= t; ++tp)
      if (in[tp]) {
        const double dt = static_cast<double>(t - tp);
        a[t] += (dt / tau_s) * std::exp(1.0 - dt / tau_s);
      }
  std::vector<int> s(T, 0);
  for (std::size_t t = 0; t < T; ++t) {
    double u = w * a[t];
    for (std::size_t tp = 0; tp < t; ++tp)
      if (s[tp]) {
        const double dt = static_cast<double>(t - tp - 1);
        u += -2.0 * theta * std::exp(-dt / tau_r);
      }
    s[t] = (u >= theta) ? 1 : 0;
  }
  return s;
}

Result criterion5() {
  const double t0 = now_seconds();
  const std::size_t T = 300;
  std::size_t mismatches = 0, total_spikes = 0;
  for (int cfg = 0; cfg < 50; ++cfg) {
    std::mt19937_64 rng(500 + static_cast<std::uint64_t>(cfg));
    std::uniform_real_distribution<double> taud(3.0, 15.0), thetad(0.5, 2.0), wd(0.5, 2.5);
    const double tau_s = taud(rng), tau_r = taud(rng), theta = thetad(rng);
    const double w1 = wd(rng), w2 = wd(rng);
    std::bernoulli_distribution spk(0.25);
    std::vector<int> in(T);
    for (auto& v : in) v = spk(rng) ? 1 : 0;

    std::vector<int> h = brute_layer(in, w1, tau_s, tau_r, theta, T);
    std::vector<int> o = brute_layer(h, w2, tau_s, tau_r, theta, T);

    auto make_dense = [&](double w) {
      LayerParams p;
      p.kind = LayerKind::Dense;
      p.in_features = 1;
      p.out_features = 1;
      p.theta = theta;
      p.weights = {w};
      return p;
    };
    Model m;
    SurrogateConfig surr;
    m.add(std::make_unique<PspNode>(tau_s));
    m.add(std::make_unique<WeightedNode>(make_dense(w1), "l1"));
    m.add(std::make_unique<SpikeNode>(theta, tau_r, surr, "l1.spike"));
    m.add(std::make_unique<PspNode>(tau_s));
    m.add(std::make_unique<WeightedNode>(make_dense(w2), "l2"));
    m.add(std::make_unique<SpikeNode>(theta, tau_r, surr, "l2.spike"));

    AnalogTensor x({1, 1, 1, 1, T});
    for (std::size_t t = 0; t < T; ++t) x.values()[t] = in[t];
    AnalogTensor out = m.forward(x, Phase::Eval);
    for (std::size_t t = 0; t < T; ++t) {
      const int lib = out.values()[t] > 0.5 ? 1 : 0;
      total_spikes += o[t];
      if (lib != o[t]) ++mismatches;
    }
  }
  const double elapsed = now_seconds() - t0;
  Result r;
  r.pass = mismatches == 0 && elapsed < 10.0;
  r.detail = "50 configs x 300 steps, " + std::to_string(mismatches) + " mismatched steps, " +
             std::to_string(total_spikes) + " reference output spikes, " + fmt(elapsed) + " s";
  return r;
}

// ------------------------------------------------------------- 6, 7
// Scaled training efficacy and firing-rate suppression on a synthetic
// event corpus in the N-MNIST on-disk format.
struct TrainingStudy {
  double acc_ln[3], acc_bn[3], acc_none[3];
  double fire_ln[3], fire_bn[3], fire_none[3];
  double elapsed{0.0};
  bool ran{false};
};

fs::path events_root() {
  fs::path root = fs::temp_directory_path() / "psn_acceptance_events";
  if (!fs::exists(root / "Test" / "9")) {
    std::cerr << "  [data] writing synthetic event corpus (100/class train, 50/class test)\n";
    testsupport::write_synthetic_events(root, 100, 50, 424242);
  }
  return root;
}

double hidden_rate(const RunMetrics& m) {
  // every spike layer except the output layer
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < m.firing_rates.size(); ++i) {
    sum += m.firing_rates[i].rate;
    ++k;
  }
  return k ? sum / static_cast<double>(k) : 0.0;
}

TrainingStudy run_study() {
  TrainingStudy st;
  const double t0 = now_seconds();
  fs::path root = events_root();
  NMnistDataset train(root, "Train", 100);
  NMnistDataset test(root, "Test", 100);
  std::vector<std::size_t> train_idx(train.size()), test_idx(test.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
  for (std::size_t i = 0; i < test_idx.size(); ++i) test_idx[i] = i;

  RunConfig base;
  base.dataset = "nmnist";
  base.T = 100;
  base.epochs = 10;
  base.batch = 10;
  base.subsample = 0;
  base.eval_every_epoch = false;
  // Desk-scale width; the init scale keeps a width-4 net's drive at the
  // operating point the full-width protocol reaches with its default.
  base.weight_scale = 40.0;

  struct Variant {
    const char* label;
    const char* form;
    const char* axes;
    const char* arch;
    double* acc;
    double* fire;
  };
  Variant variants[] = {
      {"PSP-LN", "psp", "ln", "34x34x2-n4c3-{n4c3}*5-10", st.acc_ln, st.fire_ln},
      {"PSP-BN", "psp", "bn", "34x34x2-n4c3-{n4c3}*5-10", st.acc_bn, st.fire_bn},
      {"none", "none", "ln", "34x34x2-4c3-{4c3}*5-10", st.acc_none, st.fire_none},
  };
  for (const Variant& v : variants)
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      RunConfig cfg = base;
      cfg.norm_form = v.form;
      cfg.norm_axes = v.axes;
      cfg.arch = v.arch;
      cfg.seed = seed;
      const double r0 = now_seconds();
      TrainOutcome out = train_model(cfg, train, train_idx, test, test_idx);
      const double acc = out.metrics.rows.back().val_acc;
      const double fire = hidden_rate(out.metrics);
      v.acc[seed - 1] = acc;
      v.fire[seed - 1] = fire;
      std::cerr << "  [train] " << v.label << " seed " << seed << ": test acc " << fmt(acc)
                << ", hidden rate " << fmt(fire) << " (" << fmt(now_seconds() - r0) << " s)\n";
    }
  st.elapsed = now_seconds() - t0;
  st.ran = true;
  return st;
}

double mean3(const double* v) { return (v[0] + v[1] + v[2]) / 3.0; }

Result criterion6(const TrainingStudy& st) {
  const double ln = mean3(st.acc_ln), bn = mean3(st.acc_bn), none = mean3(st.acc_none);
  Result r;
  const bool gap = ln >= none + 0.05 && bn >= none + 0.05;
  const bool chance = ln >= 0.30 && bn >= 0.30;
  r.pass = gap && chance;
  r.detail = "mean test acc over 3 seeds: PSP-LN " + fmt(ln) + ", PSP-BN " + fmt(bn) +
             ", unnormalized " + fmt(none) + "; gaps " + fmt(ln - none) + "/" + fmt(bn - none) +
             " (need >= 0.05), chance margin needs >= 0.20; " + fmt(st.elapsed / 60.0) +
             " min (target < 60)";
  return r;
}

Result criterion7(const TrainingStudy& st) {
  int seeds_lower = 0;
  for (int s = 0; s < 3; ++s)
    if (st.fire_ln[s] < st.fire_none[s] && st.fire_bn[s] < st.fire_none[s]) ++seeds_lower;
  Result r;
  r.pass = seeds_lower >= 2;
  r.detail = "hidden firing rate of both PSP models below unnormalized on " +
             std::to_string(seeds_lower) + "/3 seeds (LN " + fmt(st.fire_ln[0]) + "/" +
             fmt(st.fire_ln[1]) + "/" + fmt(st.fire_ln[2]) + ", BN " + fmt(st.fire_bn[0]) + "/" +
             fmt(st.fire_bn[1]) + "/" + fmt(st.fire_bn[2]) + ", none " + fmt(st.fire_none[0]) +
             "/" + fmt(st.fire_none[1]) + "/" + fmt(st.fire_none[2]) + ")";
  return r;
}

// ---------------------------------------------------------------- 8
// Residual depth: 50 weighted layers trains in the pre-activation
// arrangement; the post-activation twin's first-layer gradient is
// attenuated at initialization.
Result criterion8() {
  const double t0 = now_seconds();
  fs::path root = fs::temp_directory_path() / "psn_acceptance_images";
  if (!fs::exists(root / "t10k-labels-idx1-ubyte")) {
    std::cerr << "  [data] writing synthetic image corpus (300 train / 60 test)\n";
    testsupport::write_synthetic_images(root, 300, 60, 777);
  }

  RunConfig cfg;
  cfg.dataset = "fmnist";
  cfg.data_root = root.string();
  cfg.T = 30;
  cfg.epochs = 5;
  cfg.batch = 5;
  cfg.lr = 0.015;
  cfg.resnet_style = "pre";
  cfg.resnet_blocks = 24;  // 2*24 + 2 = 50 weighted layers
  cfg.resnet_channels = 8;  // narrower stems stay below threshold and never fire
  cfg.norm_form = "psp";
  cfg.norm_axes = "ln";
  cfg.seed = 1;
  cfg.eval_every_epoch = false;

  std::unique_ptr<SpikeDataset> train = open_dataset(cfg, "train");
  std::vector<std::size_t> idx(std::min<std::size_t>(100, train->size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  // First-layer gradient magnitude of both styles at a shared init.
  auto stem_grad_norm = [&](NetworkSpec::Style style) {
    std::mt19937_64 rng(cfg.seed);
    NetworkSpec spec =
        make_resnet_spec(34, 34, 1, style, cfg.resnet_blocks, cfg.resnet_channels);
    Model model = assemble(spec, cfg.hyper(), rng);
    std::vector<std::size_t> first(idx.begin(), idx.begin() + cfg.batch);
    Batch batch = make_batch(*train, first);
    AnalogTensor out = model.forward(batch.spikes.analog(), Phase::Train);
    LossResult lr = spike_count_loss(out, batch.labels, cfg.loss_spec());
    model.backward(lr.grad_seed);
    for (ParamRef& p : model.params())
      if (p.name.find("stem") != std::string::npos) {
        double s = 0.0;
        for (double g : *p.grad) s += g * g;
        return std::sqrt(s);
      }
    throw ContractError("no stem layer found");
  };
  const double g_pre = stem_grad_norm(NetworkSpec::Style::ResnetPre);
  const double g_post = stem_grad_norm(NetworkSpec::Style::ResnetPost);
  std::cerr << "  [grad] stem gradient norm at init: pre " << fmt(g_pre) << ", post "
            << fmt(g_post) << " (ratio " << fmt(g_pre / std::max(g_post, 1e-300)) << ")\n";

  TrainOutcome out = train_model(cfg, *train, idx, *train, {});
  const double first_loss = out.metrics.rows.front().train_loss;
  const double last_loss = out.metrics.rows.back().train_loss;
  std::cerr << "  [train] pre-activation depth-50 train loss " << fmt(first_loss) << " -> "
            << fmt(last_loss) << "\n";

  const double elapsed = now_seconds() - t0;
  Result r;
  const bool loss_ok = last_loss <= 0.8 * first_loss;
  const bool grad_ok = g_post * 10.0 <= g_pre;
  r.pass = loss_ok && grad_ok && elapsed < 3600.0;
  r.detail = "pre-activation train loss " + fmt(first_loss) + " -> " + fmt(last_loss) + " (" +
             fmt(100.0 * (1.0 - last_loss / first_loss)) +
             "% decrease, need >= 20%); init stem grad norm pre/post = " + fmt(g_pre) + "/" +
             fmt(g_post) + " = " + fmt(g_pre / std::max(g_post, 1e-300)) +
             "x (need >= 10x); " + fmt(elapsed / 60.0) + " min (< 60)";
  return r;
}

// ---------------------------------------------------------------- 9
// Data fidelity: AER fixture, IDX validation, binning property.
Result criterion9() {
  // Hand-decoded fixture, in timestamp order so the encoder round trip
  // is byte-exact.
  const std::vector<std::uint8_t> fixture{
      0x00, 0x00, 0x00, 0x00, 0x00,  // (0,0,off,0us)
      0x12, 0x21, 0x80, 0x01, 0xF4,  // (18,33,on,500us)
      0x21, 0x01, 0xFF, 0xFF, 0xFF,  // (33,1,on,8388607us)
  };
  std::vector<Event> ev = decode_aer(fixture);
  const bool fixture_ok =
      ev.size() == 3 && ev[0].x == 0 && ev[0].y == 0 && ev[0].polarity == 0 &&
      ev[0].timestamp_us == 0 && ev[1].x == 18 && ev[1].y == 33 && ev[1].polarity == 1 &&
      ev[1].timestamp_us == 500 && ev[2].x == 33 && ev[2].y == 1 && ev[2].polarity == 1 &&
      ev[2].timestamp_us == 8388607;
  const bool roundtrip_ok = encode_aer(ev) == fixture;

  // IDX validation
  auto be32 = [](std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(x >> 24);
    v.push_back((x >> 16) & 0xFF);
    v.push_back((x >> 8) & 0xFF);
    v.push_back(x & 0xFF);
  };
  std::vector<std::uint8_t> idx;
  be32(idx, 0x00000803);
  be32(idx, 2);
  be32(idx, 4);
  be32(idx, 5);
  for (int i = 0; i < 40; ++i) idx.push_back(static_cast<std::uint8_t>(i));
  IdxImages img = decode_idx_images(idx);
  const bool idx_ok = img.count == 2 && img.rows == 4 && img.cols == 5;

  bool magic_rejected = false, trunc_rejected = false;
  std::vector<std::uint8_t> bad_magic = idx;
  bad_magic[3] = 0x01;
  try {
    decode_idx_images(bad_magic);
  } catch (const FormatError&) {
    magic_rejected = true;
  }
  std::vector<std::uint8_t> truncated(idx.begin(), idx.end() - 7);
  try {
    decode_idx_images(truncated);
  } catch (const FormatError&) {
    trunc_rejected = true;
  }

  // Binning property over random samples
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> nd(0, 300), coord(0, 33), pol(0, 1);
  std::uniform_int_distribution<std::uint32_t> ts(0, 150000);
  bool binning_ok = true;
  for (int sample = 0; sample < 1000 && binning_ok; ++sample) {
    const int ne = nd(rng);
    std::vector<Event> evs(ne);
    for (auto& e : evs) {
      e.x = static_cast<std::uint8_t>(coord(rng));
      e.y = static_cast<std::uint8_t>(coord(rng));
      e.polarity = static_cast<std::uint8_t>(pol(rng));
      e.timestamp_us = ts(rng);
    }
    SpikeTensor s = events_to_spikes(evs, 100);
    if (!s.is_binary() || s.count() > static_cast<std::size_t>(ne)) binning_ok = false;
  }

  Result r;
  r.pass = fixture_ok && roundtrip_ok && idx_ok && magic_rejected && trunc_rejected && binning_ok;
  r.detail = std::string("AER fixture ") + (fixture_ok ? "exact" : "WRONG") + ", re-encode " +
             (roundtrip_ok ? "byte-exact" : "DIFFERS") + "; IDX dims " +
             (idx_ok ? "ok" : "WRONG") + ", bad magic/truncation rejected: " +
             (magic_rejected ? "yes" : "NO") + "/" + (trunc_rejected ? "yes" : "NO") +
             "; binning property on 1000 random samples: " + (binning_ok ? "holds" : "VIOLATED");
  return r;
}

// --------------------------------------------------------------- 10
// Determinism: identical seeds, byte-identical metrics CSVs.
std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result criterion10() {
  fs::path root = events_root();
  RunConfig cfg;
  cfg.dataset = "nmnist";
  cfg.data_root = root.string();
  cfg.arch = "34x34x2-n2c3-10";
  cfg.T = 20;
  cfg.epochs = 2;
  cfg.batch = 5;
  cfg.subsample = 0;
  cfg.max_train = 60;
  cfg.val_count = 30;
  cfg.seed = 5;

  fs::path out_a = fs::temp_directory_path() / "psn_acceptance_run_a";
  fs::path out_b = fs::temp_directory_path() / "psn_acceptance_run_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  cfg.out_dir = out_a.string();
  run_training(cfg);
  cfg.out_dir = out_b.string();
  run_training(cfg);

  const std::string a = read_text(out_a / "metrics.csv");
  const std::string b = read_text(out_b / "metrics.csv");
  Result r;
  r.pass = !a.empty() && a == b;
  r.detail = "two seed-5 runs, metrics.csv " + std::to_string(a.size()) + " bytes each, " +
             (r.pass ? "byte-identical" : "DIFFER");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto selected = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  std::map<int, Result> results;
  auto run = [&](int id, auto&& fn) {
    if (!selected(id)) return;
    std::cerr << "[criterion " << id << "] running...\n";
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
  };

  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, criterion5);
  run(9, criterion9);
  run(10, criterion10);
  if (selected(6) || selected(7)) {
    std::cerr << "[criteria 6-7] training study (9 runs)...\n";
    try {
      TrainingStudy st = run_study();
      if (selected(6)) results[6] = criterion6(st);
      if (selected(7)) results[7] = criterion7(st);
    } catch (const std::exception& e) {
      const Result err{false, std::string("exception: ") + e.what()};
      if (selected(6)) results[6] = err;
      if (selected(7)) results[7] = err;
    }
  }
  run(8, criterion8);

  int failures = 0;
  for (const auto& [id, r] : results) {
    std::cout << "CRITERION " << id << ": " << (r.pass ? "PASS" : "FAIL") << " — " << r.detail
              << "\n";
    if (!r.pass) ++failures;
  }
  std::cout << failures << " of " << results.size() << " criteria failed\n";
  return failures;
}
