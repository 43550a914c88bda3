#include <doctest.h>

#include <cmath>
#include <random>

#include "psn/kernels.hpp"

using namespace psn;

TEST_CASE("epsilon kernel samples") {
  KernelTable eps = build_epsilon(10.0, 32);
  CHECK(eps.samples[0] == doctest::Approx(0.0));
  CHECK(eps.samples[10] == doctest::Approx(1.0));          // peak at tau_s
  CHECK(eps.samples[20] == doctest::Approx(2.0 * std::exp(-1.0)));
  for (double v : eps.samples) CHECK(v >= 0.0);
  // unimodal: rises to the peak, decays after
  for (std::size_t k = 1; k <= 10; ++k) CHECK(eps.samples[k] > eps.samples[k - 1]);
  for (std::size_t k = 11; k < 32; ++k) CHECK(eps.samples[k] < eps.samples[k - 1]);
  CHECK_THROWS_AS(build_epsilon(0.0, 8), ContractError);
}

TEST_CASE("refractory kernel samples") {
  KernelTable nu = build_nu(10.0, 10.0, 16);
  CHECK(nu.samples[0] == doctest::Approx(-20.0));
  CHECK(nu.samples[10] == doctest::Approx(-20.0 * std::exp(-1.0)));
  for (std::size_t k = 1; k < 16; ++k) {
    CHECK(nu.samples[k] <= 0.0);
    CHECK(nu.samples[k] > nu.samples[k - 1]);  // recovers toward zero
  }
}

TEST_CASE("PSP superposition of two spikes") {
  const std::size_t T = 16;
  SpikeTensor s(Shape5{1, 1, 1, 1, T});
  s.set_spike(0, 0, 0, 0, 3);
  s.set_spike(0, 0, 0, 0, 8);
  KernelTable eps = build_epsilon(10.0, T);
  AnalogTensor a = causal_conv(s, eps, 0);
  // a(15) = eps(12) + eps(7), computed from the closed form
  CHECK(a.at(0, 0, 0, 0, 15) == doctest::Approx(1.9273780689967803));
  CHECK(a.at(0, 0, 0, 0, 3) == doctest::Approx(0.0));  // eps(0) = 0
  CHECK(a.at(0, 0, 0, 0, 2) == doctest::Approx(0.0));  // causal
}

TEST_CASE("causal_conv linearity and causality") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const std::size_t T = 24;
  KernelTable eps = build_epsilon(7.0, T);
  AnalogTensor x(Shape5{1, 1, 1, 1, T}), y(Shape5{1, 1, 1, 1, T});
  for (std::size_t t = 0; t < T; ++t) {
    x.values()[t] = dist(rng);
    y.values()[t] = dist(rng);
  }
  AnalogTensor cx = causal_conv(x, eps, 0), cy = causal_conv(y, eps, 0);
  AnalogTensor xy = x;
  for (std::size_t t = 0; t < T; ++t) xy.values()[t] = 2.0 * x.values()[t] - 3.0 * y.values()[t];
  AnalogTensor cxy = causal_conv(xy, eps, 0);
  for (std::size_t t = 0; t < T; ++t)
    CHECK(cxy.values()[t] ==
          doctest::Approx(2.0 * cx.values()[t] - 3.0 * cy.values()[t]).epsilon(1e-12));

  // perturbing a future input leaves earlier outputs untouched
  AnalogTensor xp = x;
  xp.values()[12] += 1.0;
  AnalogTensor cxp = causal_conv(xp, eps, 0);
  for (std::size_t t = 0; t < 12; ++t) CHECK(cxp.values()[t] == cx.values()[t]);
}

TEST_CASE("lag 1 shifts contributions strictly into the future") {
  const std::size_t T = 8;
  SpikeTensor s(Shape5{1, 1, 1, 1, T});
  s.set_spike(0, 0, 0, 0, 2);
  KernelTable nu = build_nu(10.0, 10.0, T);
  AnalogTensor r = causal_conv(s, nu, 1);
  CHECK(r.at(0, 0, 0, 0, 2) == doctest::Approx(0.0));
  CHECK(r.at(0, 0, 0, 0, 3) == doctest::Approx(-20.0));  // nu(0) one step later
}

TEST_CASE("causal_conv_adjoint satisfies the inner-product identity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const Shape5 shape{2, 1, 1, 2, 20};
  KernelTable eps = build_epsilon(6.0, 20);
  for (int lag : {0, 1}) {
    AnalogTensor x(shape), g(shape);
    for (double& v : x.values()) v = dist(rng);
    for (double& v : g.values()) v = dist(rng);
    AnalogTensor y = causal_conv(x, eps, lag);
    AnalogTensor xt = causal_conv_adjoint(g, eps, lag);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      lhs += y.values()[i] * g.values()[i];
      rhs += x.values()[i] * xt.values()[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("epsilon_scan matches the full-length kernel convolution") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const std::size_t T = 64;
  const double tau = 10.0;
  AnalogTensor x(Shape5{1, 1, 1, 1, T});
  for (double& v : x.values()) v = dist(rng);
  AnalogTensor ref = causal_conv(x, build_epsilon(tau, T), 0);
  AnalogTensor fast = epsilon_psp(x, tau);
  for (std::size_t t = 0; t < T; ++t)
    CHECK(fast.values()[t] == doctest::Approx(ref.values()[t]).epsilon(1e-12));

  AnalogTensor g(Shape5{1, 1, 1, 1, T});
  for (double& v : g.values()) v = dist(rng);
  AnalogTensor ref_adj = causal_conv_adjoint(g, build_epsilon(tau, T), 0);
  AnalogTensor fast_adj = epsilon_psp_adjoint(g, tau);
  for (std::size_t t = 0; t < T; ++t)
    CHECK(fast_adj.values()[t] == doctest::Approx(ref_adj.values()[t]).epsilon(1e-12));
}
