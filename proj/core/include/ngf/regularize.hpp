#pragma once

#include <cstdint>
#include <vector>

#include "ngf/field.hpp"
#include "ngf/gauge.hpp"
#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"

namespace ngf {

/// Critic scoring (x, y) pairs for the Jensen-Shannon mutual-information
/// bound: concatenated input, scalar output.
struct CriticNetwork {
  Mlp net;

  static CriticNetwork init(std::int64_t x_dim, std::int64_t y_dim, Rng& rng,
                            const std::vector<std::int64_t>& hidden = {64, 64, 64});
  Tensor forward(const Tensor& x, const Tensor& y) const;  // B x 1 scores
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct InfoRegConfig {
  double gamma = 1.0;    // regularization weight
  double epsilon = 0.1;  // prior discrepancy weight
  std::int64_t prior_samples = 64;  // h
  int critic_extra_updates = 1;
};

/// Weighted JS lower bound: weighted-mean[-sp(-T(x+, y))] - mean[sp(T(x-, y))].
/// Positive-pair weights are normalized to mean one and treated as data.
Tensor js_mi_bound(const CriticNetwork& critic, const Tensor& x_pos, const Tensor& y_pos,
                   const Tensor& x_neg, const Tensor& y_neg,
                   const std::vector<double>& pos_weights);

struct EmdResult {
  Tensor cost;                          // scalar, mean matched distance
  std::vector<std::int64_t> plan;      // row i of `a` matched to plan[i] of `b`
};

/// Exact equal-mass EMD via optimal assignment. Gradient flows to `a`
/// through the cost entries with the optimal plan held fixed.
EmdResult emd_exact(const Tensor& a, const Tensor& b);

/// Jittered sqrt(h) x sqrt(h) lattice on the unit square, a quasi-uniform
/// stand-in for the continuous prior.
Tensor uniform_lattice(std::int64_t h, Rng& rng);

/// Multinomial draw of h row indices, probability proportional to weights.
std::vector<std::int64_t> radiance_weighted_sample(const std::vector<double>& weights,
                                                   std::int64_t h, Rng& rng);

/// EMD between h radiance-weighted predicted 2-D points and h quasi-uniform
/// targets on the unit square.
Tensor prior_continuous(const Tensor& predicted_2d, const std::vector<double>& weights,
                        std::int64_t h, Rng& rng);

/// KL(mean distribution || uniform) over a batch of B probability rows.
Tensor prior_discrete(const Tensor& dists);

/// -(gamma + epsilon) * mi_bound + epsilon * prior.
Tensor inforeg_loss(const Tensor& mi_bound, const Tensor& prior, const InfoRegConfig& cfg);

/// Mean squared reconstruction error of the inverse map: mean ||x - inv(g(x))||^2.
Tensor cycle_loss(const Tensor& points, const Tensor& reconstructed);

/// Mean squared offset magnitude for an offset-mode continuous gauge.
Tensor structural_loss(const ContinuousGauge& g, const Tensor& points);

}  // namespace ngf
