#include "ngf/regularize.hpp"

#include <cmath>
#include <stdexcept>

#include "ngf/assignment.hpp"

namespace ngf {

CriticNetwork CriticNetwork::init(std::int64_t x_dim, std::int64_t y_dim, Rng& rng,
                                  const std::vector<std::int64_t>& hidden) {
  CriticNetwork c;
  std::vector<std::int64_t> widths;
  widths.push_back(x_dim + y_dim);
  for (auto h : hidden) widths.push_back(h);
  widths.push_back(1);
  c.net = Mlp::init(widths, rng);
  return c;
}

Tensor CriticNetwork::forward(const Tensor& x, const Tensor& y) const {
  if (x.dim(0) != y.dim(0))
    throw std::invalid_argument("CriticNetwork: pair batch sizes differ");
  return net.forward(concat({x, y}, 1));
}

void CriticNetwork::collect_params(const std::string& prefix, ParamList& out) const {
  net.collect_params(prefix, out);
}

Tensor js_mi_bound(const CriticNetwork& critic, const Tensor& x_pos, const Tensor& y_pos,
                   const Tensor& x_neg, const Tensor& y_neg,
                   const std::vector<double>& pos_weights) {
  if (x_pos.dim(0) == 0 || x_neg.dim(0) == 0)
    throw std::invalid_argument("js_mi_bound: empty pair set");
  if (static_cast<std::int64_t>(pos_weights.size()) != x_pos.dim(0))
    throw std::invalid_argument("js_mi_bound: weight count does not match positives");
  double wsum = 0.0;
  for (double w : pos_weights) {
    if (w < 0.0) throw std::invalid_argument("js_mi_bound: negative pair weight");
    wsum += w;
  }
  if (wsum == 0.0) throw std::invalid_argument("js_mi_bound: all-zero pair weights");

  // normalize weights to mean one
  std::vector<double> w_norm(pos_weights.size());
  const double scale_w = static_cast<double>(pos_weights.size()) / wsum;
  for (std::size_t i = 0; i < pos_weights.size(); ++i) w_norm[i] = pos_weights[i] * scale_w;

  Tensor t_pos = critic.forward(x_pos, y_pos);
  Tensor t_neg = critic.forward(x_neg, y_neg);
  Tensor pos_term = mean(scale_rows(softplus(neg(t_pos)), Tensor::from_vector(w_norm)));
  Tensor neg_term = mean(softplus(t_neg));
  return neg(add(pos_term, neg_term));
}

EmdResult emd_exact(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw std::invalid_argument("emd_exact: point sets must be h x d with matching d");
  if (a.dim(0) != b.dim(0))
    throw std::invalid_argument("emd_exact: unequal point counts " +
                                std::to_string(a.dim(0)) + " vs " + std::to_string(b.dim(0)));
  const std::int64_t h = a.dim(0), d = a.dim(1);
  if (h > 512) throw std::invalid_argument("emd_exact: h > 512 not supported");
  if (!a.all_finite() || !b.all_finite())
    throw std::invalid_argument("emd_exact: non-finite point");

  std::vector<double> cost(static_cast<std::size_t>(h * h));
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < h; ++j) {
      double s = 0.0;
      for (std::int64_t c = 0; c < d; ++c) {
        const double diff = a.value(i * d + c) - b.value(j * d + c);
        s += diff * diff;
      }
      cost[static_cast<std::size_t>(i * h + j)] = std::sqrt(s);
    }

  EmdResult result;
  result.plan = solve_assignment(cost, h);
  double total = 0.0;
  for (std::int64_t i = 0; i < h; ++i)
    total += cost[static_cast<std::size_t>(i * h + result.plan[static_cast<std::size_t>(i)])];
  result.cost = Tensor::scalar(total / static_cast<double>(h));

  auto ad = a.data(), bd = b.data(), cd = result.cost.data();
  const auto plan = result.plan;
  if (Tape::active() && (a.requires_grad() || b.requires_grad())) {
    result.cost.set_requires_grad(true);
    // envelope rule: the optimal plan is held fixed in the backward pass
    Tape::active()->record([ad, bd, cd, plan, h, d]() {
      if (cd->grad.empty()) return;
      const double g = cd->grad[0] / static_cast<double>(h);
      for (std::int64_t i = 0; i < h; ++i) {
        const std::int64_t j = plan[static_cast<std::size_t>(i)];
        double dist = 0.0;
        for (std::int64_t c = 0; c < d; ++c) {
          const double diff = ad->values[static_cast<std::size_t>(i * d + c)] -
                              bd->values[static_cast<std::size_t>(j * d + c)];
          dist += diff * diff;
        }
        dist = std::sqrt(dist);
        if (dist == 0.0) continue;
        for (std::int64_t c = 0; c < d; ++c) {
          const double diff = ad->values[static_cast<std::size_t>(i * d + c)] -
                              bd->values[static_cast<std::size_t>(j * d + c)];
          const double gc = g * diff / dist;
          if (ad->requires_grad) {
            ad->ensure_grad();
            ad->grad[static_cast<std::size_t>(i * d + c)] += gc;
          }
          if (bd->requires_grad) {
            bd->ensure_grad();
            bd->grad[static_cast<std::size_t>(j * d + c)] -= gc;
          }
        }
      }
    });
  }
  return result;
}

Tensor uniform_lattice(std::int64_t h, Rng& rng) {
  if (h < 1) throw std::invalid_argument("uniform_lattice: h must be positive");
  std::int64_t side = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(h))));
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(h) * 2);
  const double cell = 1.0 / static_cast<double>(side);
  std::int64_t emitted = 0;
  for (std::int64_t r = 0; r < side && emitted < h; ++r)
    for (std::int64_t c = 0; c < side && emitted < h; ++c) {
      pts.push_back((static_cast<double>(c) + rng.uniform()) * cell);
      pts.push_back((static_cast<double>(r) + rng.uniform()) * cell);
      ++emitted;
    }
  return Tensor({h, 2}, std::move(pts));
}

std::vector<std::int64_t> radiance_weighted_sample(const std::vector<double>& weights,
                                                   std::int64_t h, Rng& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("radiance_weighted_sample: negative weight");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("radiance_weighted_sample: weights sum to zero");

  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  std::vector<std::int64_t> picks(static_cast<std::size_t>(h));
  for (std::int64_t s = 0; s < h; ++s) {
    const double u = rng.uniform() * total;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    picks[static_cast<std::size_t>(s)] =
        static_cast<std::int64_t>(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                                        weights.size() - 1));
  }
  return picks;
}

Tensor prior_continuous(const Tensor& predicted_2d, const std::vector<double>& weights,
                        std::int64_t h, Rng& rng) {
  if (predicted_2d.rank() != 2 || predicted_2d.dim(1) != 2)
    throw std::invalid_argument("prior_continuous: expects B x 2 predictions");
  if (predicted_2d.dim(0) < h)
    throw std::invalid_argument("prior_continuous: fewer points than prior samples");
  const auto picks = radiance_weighted_sample(weights, h, rng);
  Tensor sampled = gather(predicted_2d, picks);
  Tensor targets = uniform_lattice(h, rng);
  return emd_exact(sampled, targets).cost;
}

Tensor prior_discrete(const Tensor& dists) {
  if (dists.rank() != 2 || dists.dim(0) == 0)
    throw std::invalid_argument("prior_discrete: expects non-empty B x N distributions");
  const std::int64_t batch = dists.dim(0), n = dists.dim(1);
  for (std::int64_t i = 0; i < batch; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += dists.value(i * n + j);
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("prior_discrete: row " + std::to_string(i) +
                                  " sums to " + std::to_string(s));
  }
  Tensor ones_row = Tensor::full({1, batch}, 1.0 / static_cast<double>(batch));
  Tensor pbar = matmul(ones_row, dists);  // 1 x N

  // KL(pbar || uniform) = sum pbar_i * ln(pbar_i * N), with 0 ln 0 := 0
  double kl = 0.0;
  for (std::int64_t j = 0; j < n; ++j) {
    const double p = pbar.value(j);
    if (p > 0.0) kl += p * std::log(p * static_cast<double>(n));
  }
  Tensor out = Tensor::scalar(kl);
  auto pd = pbar.data(), od = out.data();
  if (Tape::active() && pbar.requires_grad()) {
    out.set_requires_grad(true);
    Tape::active()->record([pd, od, n]() {
      if (od->grad.empty()) return;
      pd->ensure_grad();
      const double g = od->grad[0];
      for (std::int64_t j = 0; j < n; ++j) {
        const double p = pd->values[static_cast<std::size_t>(j)];
        if (p > 0.0)
          pd->grad[static_cast<std::size_t>(j)] +=
              g * (std::log(p * static_cast<double>(n)) + 1.0);
      }
    });
  }
  return out;
}

Tensor inforeg_loss(const Tensor& mi_bound, const Tensor& prior, const InfoRegConfig& cfg) {
  if (cfg.gamma < 0.0 || cfg.epsilon < 0.0 || !std::isfinite(cfg.gamma) ||
      !std::isfinite(cfg.epsilon))
    throw std::invalid_argument("inforeg_loss: gamma/epsilon must be finite and non-negative");
  return add(mul(mi_bound, -(cfg.gamma + cfg.epsilon)), mul(prior, cfg.epsilon));
}

Tensor cycle_loss(const Tensor& points, const Tensor& reconstructed) {
  if (points.shape() != reconstructed.shape())
    throw std::invalid_argument("cycle_loss: shape mismatch " + shape_str(points.shape()) +
                                " vs " + shape_str(reconstructed.shape()));
  Tensor diff = sub(points, reconstructed);
  return mul(sum(mul(diff, diff)), 1.0 / static_cast<double>(points.dim(0)));
}

Tensor structural_loss(const ContinuousGauge& g, const Tensor& points) {
  if (!g.offset_mode)
    throw std::invalid_argument("structural_loss: gauge is not in offset mode");
  Tensor delta = g.offsets(points);
  return mul(sum(mul(delta, delta)), 1.0 / static_cast<double>(points.dim(0)));
}

}  // namespace ngf
