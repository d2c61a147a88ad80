#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "groupfed/errors.hpp"
#include "groupfed/model.hpp"
#include "groupfed/rng.hpp"

namespace groupfed {

// Sampled estimates of the loss-regularity constants: rho (Lipschitz),
// beta (smoothness), omega (inverse squared distance of virtual-global
// interval starts to the optimum).
struct Constants {
  double rho_hat = 0.0;
  double beta_hat = 0.0;
  double omega_hat = 0.0;
  std::string method = "pair_sampling";
};

// Full-batch L-BFGS (two-loop recursion, Armijo backtracking) until the
// gradient norm falls under tol. The default ridge keeps the minimizer finite
// on separable data; plain descent would crawl along the resulting valley.
inline ModelParams solve_centralized(const ModelSpec& spec, std::span<const Example> data,
                                     double l2 = 1e-6, double tol = 1e-8, long max_iters = 20000) {
  if (data.empty()) throw std::invalid_argument("solve_centralized: empty dataset");
  ModelParams w = ModelParams::zeros(spec);
  const std::size_t P = w.values.size();
  constexpr std::size_t history = 10;
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;

  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };

  std::vector<double> g;
  gradient_into(w, data, l2, g);
  double fw = loss(w, data, l2);
  double gnorm = l2_norm(g);
  for (long it = 0; it < max_iters; ++it) {
    if (gnorm <= tol) return w;

    std::vector<double> d = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], d);
      for (std::size_t j = 0; j < P; ++j) d[j] -= alpha[i] * y_hist[i][j];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], d);
      for (std::size_t j = 0; j < P; ++j) d[j] += s_hist[i][j] * (alpha[i] - beta);
    }
    for (auto& v : d) v = -v;

    double dg = dot(d, g);
    if (dg >= 0.0) {  // not a descent direction: reset to steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t j = 0; j < P; ++j) d[j] = -g[j];
      dg = -gnorm * gnorm;
    }

    double t = 1.0;
    ModelParams cand = w;
    double fc = fw;
    for (;;) {
      for (std::size_t j = 0; j < P; ++j) cand.values[j] = w.values[j] + t * d[j];
      fc = loss(cand, data, l2);
      if (fc <= fw + 1e-4 * t * dg) break;
      t *= 0.5;
      if (t < 1e-20) throw convergence_error("line search underflow", gnorm);
    }

    std::vector<double> g_new;
    gradient_into(cand, data, l2, g_new);
    std::vector<double> s(P), y(P);
    for (std::size_t j = 0; j < P; ++j) {
      s[j] = cand.values[j] - w.values[j];
      y[j] = g_new[j] - g[j];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * l2_norm(s) * l2_norm(y) && sy > 0.0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    w = std::move(cand);
    g = std::move(g_new);
    fw = fc;
    gnorm = l2_norm(g);
  }
  throw convergence_error("solve_centralized did not reach tolerance", gnorm);
}

// Max-ratio estimates of rho and beta over consecutive trajectory points plus
// random pairs drawn from the trajectory's convex hull with Gaussian
// perturbations (sigma = trajectory coordinate std).
inline void estimate_smoothness(const ModelSpec& spec, std::span<const Example> data, double l2,
                                const std::vector<ModelParams>& trajectory, long num_pairs,
                                std::uint64_t seed, double* rho_hat, double* beta_hat) {
  if (trajectory.empty()) throw std::invalid_argument("estimate_smoothness: empty trajectory");
  (void)spec;
  Rng rng(Rng::derive(seed, 0xc057));

  // sigma measures how far the trajectory itself moved: per-coordinate std
  // across time, pooled over coordinates
  const std::size_t P = trajectory.front().values.size();
  const double T = static_cast<double>(trajectory.size());
  double var_sum = 0.0;
  for (std::size_t j = 0; j < P; ++j) {
    double mean = 0.0, mean_sq = 0.0;
    for (const auto& w : trajectory) {
      mean += w.values[j];
      mean_sq += w.values[j] * w.values[j];
    }
    mean /= T;
    mean_sq /= T;
    var_sum += std::max(mean_sq - mean * mean, 0.0);
  }
  const double sigma = std::max(std::sqrt(var_sum / static_cast<double>(P)), 0.1);

  double rho = 0.0, beta = 0.0;
  auto consider = [&](const ModelParams& a, const ModelParams& b) {
    const double dist = l2_distance(a.values, b.values);
    if (dist < 1e-12) return;
    const double fa = loss(a, data, l2), fb = loss(b, data, l2);
    rho = std::max(rho, std::abs(fa - fb) / dist);
    const ModelParams ga = gradient(a, data, l2), gb = gradient(b, data, l2);
    beta = std::max(beta, l2_distance(ga.values, gb.values) / dist);
  };
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) consider(trajectory[i], trajectory[i + 1]);

  auto sample_point = [&]() {
    const auto& a = trajectory[static_cast<std::size_t>(rng.uniform_int(trajectory.size()))];
    const auto& b = trajectory[static_cast<std::size_t>(rng.uniform_int(trajectory.size()))];
    const double lam = rng.uniform01();
    ModelParams p = a;
    for (std::size_t j = 0; j < p.values.size(); ++j)
      p.values[j] = lam * a.values[j] + (1.0 - lam) * b.values[j] + rng.normal(0.0, sigma);
    return p;
  };
  for (long i = 0; i < num_pairs; ++i) consider(sample_point(), sample_point());

  *rho_hat = rho;
  *beta_hat = beta;
}

inline double estimate_omega(const std::vector<ModelParams>& v_interval_starts,
                             const ModelParams& w_star) {
  if (v_interval_starts.empty()) throw std::invalid_argument("estimate_omega: no interval starts");
  double omega = std::numeric_limits<double>::infinity();
  for (const auto& v : v_interval_starts) {
    const double d = l2_distance(v.values, w_star.values);
    if (d > 0.0) omega = std::min(omega, 1.0 / (d * d));
  }
  if (!std::isfinite(omega)) omega = 1e18;  // every start coincides with the optimum
  return omega;
}

inline Constants estimate_constants(const ModelSpec& spec, std::span<const Example> data, double l2,
                                    const ModelParams& w_star,
                                    const std::vector<ModelParams>& trajectory,
                                    const std::vector<ModelParams>& v_interval_starts, long num_pairs,
                                    std::uint64_t seed) {
  Constants c;
  estimate_smoothness(spec, data, l2, trajectory, num_pairs, seed, &c.rho_hat, &c.beta_hat);
  c.omega_hat = estimate_omega(v_interval_starts, w_star);
  return c;
}

// Right-hand side of the trajectory-divergence inequality for one global
// interval: (delta/beta)((eta beta + 1)^tau1 - 1) + (Delta/beta)((eta beta + 1)^(tau1 tau2) - 1).
inline double interval_divergence_bound(double delta, double Delta, double eta, double beta, long tau1, long tau2) {
  if (tau1 < 1 || tau2 < 1) throw std::invalid_argument("tau values must be >= 1");
  if (beta <= 0.0) {
    // limit beta -> 0: eta * (delta tau1 + Delta tau1 tau2)
    return eta * (delta * static_cast<double>(tau1) + Delta * static_cast<double>(tau1 * tau2));
  }
  const double growth = eta * beta + 1.0;
  return delta / beta * (std::pow(growth, static_cast<double>(tau1)) - 1.0) +
         Delta / beta * (std::pow(growth, static_cast<double>(tau1) * static_cast<double>(tau2)) - 1.0);
}

// Convergence upper bound after T steps:
//   1 / (2 tau1 tau2 eta omega) + rho * interval_divergence_bound(...).
// Returns +inf (with *precondition_ok = false) when eta exceeds 1/beta.
inline double convergence_bound(const Constants& c, double delta, double Delta, double eta, long tau1,
                             long tau2, bool* precondition_ok = nullptr) {
  if (tau1 < 1 || tau2 < 1) throw std::invalid_argument("tau values must be >= 1");
  if (c.beta_hat <= 0.0 || c.omega_hat <= 0.0 || eta <= 0.0)
    throw std::invalid_argument("convergence_bound requires positive beta_hat, omega_hat, eta");
  if (precondition_ok) *precondition_ok = true;
  if (eta > 1.0 / c.beta_hat) {
    if (precondition_ok) *precondition_ok = false;
    return std::numeric_limits<double>::infinity();
  }
  const double term1 =
      1.0 / (2.0 * static_cast<double>(tau1) * static_cast<double>(tau2) * eta * c.omega_hat);
  const double term2 = c.rho_hat * interval_divergence_bound(delta, Delta, eta, c.beta_hat, tau1, tau2);
  return term1 + term2;
}

}  // namespace groupfed
