#include "ngf/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ngf {

namespace {

void check_unit_cube(const Tensor& points, const char* op) {
  for (double v : points.values())
    if (v < 0.0 || v > 1.0)
      throw std::invalid_argument(std::string(op) + ": coordinate " + std::to_string(v) +
                                  " outside the unit cube");
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

ContinuousGauge ContinuousGauge::init_mlp(const std::vector<std::int64_t>& hidden,
                                          std::int64_t target_dim, Rng& rng,
                                          bool offset_mode, int encode_freqs) {
  ContinuousGauge g;
  g.backend = Backend::kMlp;
  g.target_dim = target_dim;
  g.offset_mode = offset_mode;
  g.encode_freqs = encode_freqs;
  std::vector<std::int64_t> widths;
  widths.push_back(3 + 6 * static_cast<std::int64_t>(encode_freqs));
  for (auto h : hidden) widths.push_back(h);
  widths.push_back(target_dim);
  g.net = Mlp::init(widths, rng);
  if (offset_mode) {
    // small offsets at init, so the map starts near the projection
    auto& last = g.net.layers.back();
    last.weight = Tensor(last.weight.shape(),
                         std::vector<double>(last.weight.values().size(), 0.0), true);
  }
  return g;
}

ContinuousGauge ContinuousGauge::init_grid(std::int64_t resolution, std::int64_t target_dim,
                                           Rng& rng) {
  ContinuousGauge g;
  g.backend = Backend::kGrid;
  g.target_dim = target_dim;
  g.grid = FeatureGrid::init({resolution, resolution, resolution}, target_dim, rng, 0.1);
  return g;
}

void ContinuousGauge::collect_params(const std::string& prefix, ParamList& out) const {
  if (backend == Backend::kMlp)
    net.collect_params(prefix + ".net", out);
  else
    out.emplace_back(prefix + ".grid", grid.values);
}

namespace {

// Raw coordinates plus sinusoids at dyadic frequencies (differentiable path).
Tensor encode_input(const Tensor& points, int freqs) {
  if (freqs <= 0) return points;
  std::vector<Tensor> parts = {points};
  for (int f = 0; f < freqs; ++f) {
    const double w = std::ldexp(kPi, f);  // pi * 2^f
    parts.push_back(sin_t(mul(points, w)));
    parts.push_back(cos_t(mul(points, w)));
  }
  return concat(parts, 1);
}

}  // namespace

Tensor ContinuousGauge::offsets(const Tensor& points) const {
  if (!offset_mode)
    throw std::invalid_argument("ContinuousGauge: offsets() requires offset mode");
  return net.forward(encode_input(points, encode_freqs));
}

Tensor continuous_forward(const ContinuousGauge& g, const Tensor& points) {
  if (points.rank() != 2 || points.dim(1) != 3)
    throw std::invalid_argument("continuous_forward: expects B x 3 points, got " +
                                shape_str(points.shape()));
  check_unit_cube(points, "continuous_forward");
  if (g.offset_mode)
    return clamp01(add(orthogonal_project(points, g.projection_axis), g.offsets(points)));
  Tensor raw = g.backend == ContinuousGauge::Backend::kMlp
                   ? g.net.forward(encode_input(points, g.encode_freqs))
                   : grid_interpolate(g.grid, points);
  return sigmoid(raw);
}

DiscreteGauge DiscreteGauge::init(const std::vector<std::int64_t>& resolutions,
                                  std::int64_t entries, std::int64_t k, Rng& rng,
                                  double logit_stddev) {
  if (k < 1 || k > entries)
    throw std::invalid_argument("DiscreteGauge: k out of range [1, N]");
  DiscreteGauge g;
  g.entries = entries;
  g.k = k;
  for (auto res : resolutions) {
    DiscreteGaugeLevel level;
    level.resolution = res;
    const std::int64_t n = res * res * res;
    level.logits = Tensor({n, entries},
                          rng.normal_vector(static_cast<std::size_t>(n * entries), 0.0, logit_stddev),
                          true);
    g.levels.push_back(std::move(level));
  }
  return g;
}

DiscreteGauge DiscreteGauge::init_net(const std::vector<std::int64_t>& resolutions,
                                      std::int64_t entries, std::int64_t k,
                                      const std::vector<std::int64_t>& hidden, Rng& rng) {
  if (k < 1 || k > entries)
    throw std::invalid_argument("DiscreteGauge: k out of range [1, N]");
  DiscreteGauge g;
  g.entries = entries;
  g.k = k;
  g.use_net = true;
  std::vector<std::int64_t> widths = {3 + 6 * kNetFreqs};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(entries);
  g.net = Mlp::init(widths, rng);
  for (auto res : resolutions) {
    DiscreteGaugeLevel level;
    level.resolution = res;
    g.levels.push_back(std::move(level));
  }
  return g;
}

namespace {

// Raw coordinates plus sinusoids at dyadic frequencies, so the logit network
// can place distinct codes in nearby cells.
void push_encoded_point(std::vector<double>& out, double x, double y, double z) {
  const double p[3] = {x, y, z};
  for (double v : p) out.push_back(v);
  for (int f = 0; f < DiscreteGauge::kNetFreqs; ++f) {
    const double w = std::ldexp(kPi, f);  // pi * 2^f
    for (double v : p) {
      out.push_back(std::sin(w * v));
      out.push_back(std::cos(w * v));
    }
  }
}

}  // namespace

Tensor DiscreteGauge::level_logits(std::size_t level) const {
  const auto& lv = levels[level];
  if (!use_net) return lv.logits;
  const std::int64_t res = lv.resolution;
  const std::int64_t in_dim = 3 + 6 * kNetFreqs;
  std::vector<double> coords;
  coords.reserve(static_cast<std::size_t>(res * res * res * in_dim));
  for (std::int64_t x = 0; x < res; ++x)
    for (std::int64_t y = 0; y < res; ++y)
      for (std::int64_t z = 0; z < res; ++z)
        push_encoded_point(coords, static_cast<double>(x) / static_cast<double>(res - 1),
                           static_cast<double>(y) / static_cast<double>(res - 1),
                           static_cast<double>(z) / static_cast<double>(res - 1));
  return net.forward(Tensor({res * res * res, in_dim}, std::move(coords)));
}

void DiscreteGauge::collect_params(const std::string& prefix, ParamList& out) const {
  if (use_net) {
    net.collect_params(prefix + ".logit_net", out);
    return;
  }
  for (std::size_t l = 0; l < levels.size(); ++l)
    out.emplace_back(prefix + ".logits" + std::to_string(l), levels[l].logits);
}

TopkSelection topk_select(const std::vector<double>& p, std::int64_t k) {
  const std::int64_t n = static_cast<std::int64_t>(p.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("topk_select: k=" + std::to_string(k) +
                                " out of range [1, " + std::to_string(n) + "]");
  double total = 0.0;
  for (double v : p) total += v;
  if (total == 0.0) throw std::invalid_argument("topk_select: all-zero distribution");
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("topk_select: distribution sums to " + std::to_string(total));

  std::vector<std::int64_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  // stable partial sort by decreasing value; ties keep the lowest index first
  std::stable_sort(order.begin(), order.end(),
                   [&p](std::int64_t a, std::int64_t b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });

  TopkSelection sel;
  sel.indices.assign(order.begin(), order.begin() + k);
  double value_sum = 0.0;
  for (auto i : sel.indices) value_sum += p[static_cast<std::size_t>(i)];
  sel.mixture.assign(p.size(), 0.0);
  for (auto i : sel.indices)
    sel.mixture[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] / value_sum;
  sel.straight_through = sel.mixture;
  return sel;
}

Tensor topk_straight_through(const Tensor& soft, std::int64_t k) {
  if (soft.rank() != 2)
    throw std::invalid_argument("topk_straight_through: expects B x N distributions");
  const std::int64_t batch = soft.dim(0), n = soft.dim(1);
  std::vector<double> out(soft.values().size());
  std::vector<double> row(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < batch; ++i) {
    std::copy(soft.values().begin() + i * n, soft.values().begin() + (i + 1) * n, row.begin());
    TopkSelection sel = topk_select(row, k);
    std::copy(sel.mixture.begin(), sel.mixture.end(), out.begin() + i * n);
  }
  Tensor y(soft.shape(), std::move(out));
  auto sd = soft.data();
  auto yd = y.data();
  if (Tape::active() && soft.requires_grad()) {
    y.set_requires_grad(true);
    Tape::active()->record([sd, yd]() {
      if (yd->grad.empty()) return;
      sd->ensure_grad();
      for (std::size_t i = 0; i < yd->grad.size(); ++i) sd->grad[i] += yd->grad[i];
    });
  }
  return y;
}

DiscreteForwardResult discrete_forward(const DiscreteGauge& g, const Codebook& book,
                                       const Tensor& points) {
  if (points.rank() != 2 || points.dim(1) != 3)
    throw std::invalid_argument("discrete_forward: expects B x 3 points");
  check_unit_cube(points, "discrete_forward");
  if (g.levels.size() != book.layers.size())
    throw std::invalid_argument("discrete_forward: level count does not match codebook layers");

  const std::int64_t batch = points.dim(0);
  DiscreteForwardResult result;
  std::vector<Tensor> level_features;

  for (std::size_t l = 0; l < g.levels.size(); ++l) {
    const auto& level = g.levels[l];
    const Tensor logits = g.level_logits(l);
    const std::int64_t res = level.resolution;
    const std::int64_t cells = res - 1;

    std::vector<std::int64_t> base(static_cast<std::size_t>(batch) * 3);
    std::vector<double> frac(static_cast<std::size_t>(batch) * 3);
    for (std::int64_t i = 0; i < batch; ++i)
      for (int a = 0; a < 3; ++a) {
        double scaled = points.value(i * 3 + a) * static_cast<double>(cells);
        std::int64_t c = static_cast<std::int64_t>(scaled);
        if (c >= cells) c = cells - 1;
        base[static_cast<std::size_t>(i * 3 + a)] = c;
        frac[static_cast<std::size_t>(i * 3 + a)] = scaled - static_cast<double>(c);
      }

    Tensor acc = Tensor::zeros({batch, book.dim});
    std::vector<std::int64_t> rows(static_cast<std::size_t>(batch));
    std::vector<double> w(static_cast<std::size_t>(batch));
    for (int c = 0; c < 8; ++c) {
      for (std::int64_t i = 0; i < batch; ++i) {
        double wi = 1.0;
        std::int64_t flat = 0;
        for (int a = 0; a < 3; ++a) {
          const bool hi = (c >> a) & 1;
          const double f = frac[static_cast<std::size_t>(i * 3 + a)];
          wi *= hi ? f : (1.0 - f);
          flat = flat * res + base[static_cast<std::size_t>(i * 3 + a)] + (hi ? 1 : 0);
        }
        rows[static_cast<std::size_t>(i)] = flat;
        w[static_cast<std::size_t>(i)] = wi;
      }
      Tensor soft = softmax(gather(logits, rows));
      result.corner_soft.push_back(soft);
      Tensor st = topk_straight_through(soft, g.k);
      Tensor feat = codebook_lookup(book, l, st);
      acc = add(acc, scale_rows(feat, Tensor::from_vector(w)));
    }
    level_features.push_back(acc);
  }

  result.feature = level_features.size() == 1 ? level_features[0] : concat(level_features, 1);
  return result;
}

InfoInvEncoder InfoInvEncoder::geometric(std::int64_t input_dim, std::int64_t num_freqs,
                                         bool learnable) {
  InfoInvEncoder e;
  e.input_dim = input_dim;
  e.learnable = learnable;
  for (std::int64_t j = 0; j < num_freqs; ++j)
    e.frequencies.push_back(std::pow(2.0, static_cast<double>(j)) * kPi);
  if (learnable) {
    std::vector<double> init = e.frequencies;
    e.theta = Tensor({num_freqs, 1}, std::move(init), true);
  }
  return e;
}

void InfoInvEncoder::collect_params(const std::string& prefix, ParamList& out) const {
  if (learnable) out.emplace_back(prefix + ".theta", theta);
}

Tensor infoinv_encode(const InfoInvEncoder& e, const Tensor& points) {
  if (points.rank() != 2 || points.dim(1) != e.input_dim)
    throw std::invalid_argument("infoinv_encode: expects B x " +
                                std::to_string(e.input_dim) + " input, got " +
                                shape_str(points.shape()));
  for (double v : points.values())
    if (!std::isfinite(v)) throw std::invalid_argument("infoinv_encode: non-finite input");

  const std::int64_t batch = points.dim(0);
  const std::int64_t num_freqs = static_cast<std::int64_t>(e.frequencies.size());

  if (!e.learnable) {
    const std::int64_t out_dim = e.output_dim();
    std::vector<double> out(static_cast<std::size_t>(batch * out_dim));
    for (std::int64_t i = 0; i < batch; ++i)
      for (std::int64_t a = 0; a < e.input_dim; ++a) {
        const double m = points.value(i * e.input_dim + a);
        for (std::int64_t j = 0; j < num_freqs; ++j) {
          const double phase = m * e.frequencies[static_cast<std::size_t>(j)];
          const std::int64_t col = a * 2 * num_freqs + 2 * j;
          out[static_cast<std::size_t>(i * out_dim + col)] = std::cos(phase);
          out[static_cast<std::size_t>(i * out_dim + col + 1)] = std::sin(phase);
        }
      }
    return Tensor({batch, out_dim}, std::move(out));
  }

  // learnable frequencies: build through the tape
  std::vector<Tensor> cols;
  for (std::int64_t a = 0; a < e.input_dim; ++a) {
    std::vector<double> axis(static_cast<std::size_t>(batch));
    for (std::int64_t i = 0; i < batch; ++i)
      axis[static_cast<std::size_t>(i)] = points.value(i * e.input_dim + a);
    Tensor axis_col({batch, 1}, std::move(axis));
    for (std::int64_t j = 0; j < num_freqs; ++j) {
      Tensor theta_j = gather(e.theta, {j});
      Tensor phase = scale(axis_col, reshape(theta_j, {1}));
      cols.push_back(cos_t(phase));
      cols.push_back(sin_t(phase));
    }
  }
  return concat(cols, 1);
}

Tensor infoinv_encode(const InfoInvEncoder& e, const Tensor& points,
                      const Tensor& amplitude) {
  Tensor enc = infoinv_encode(e, points);
  if (amplitude.shape() != enc.shape())
    throw std::invalid_argument("infoinv_encode: amplitude shape " +
                                shape_str(amplitude.shape()) + " does not match encoding " +
                                shape_str(enc.shape()));
  return mul(enc, amplitude);
}

Tensor orthogonal_project(const Tensor& points, int dropped_axis) {
  if (points.rank() != 2 || points.dim(1) != 3)
    throw std::invalid_argument("orthogonal_project: expects B x 3 points");
  if (dropped_axis < 0 || dropped_axis > 2)
    throw std::invalid_argument("orthogonal_project: axis out of range");
  const std::int64_t batch = points.dim(0);
  std::vector<double> out(static_cast<std::size_t>(batch) * 2);
  std::size_t o = 0;
  for (std::int64_t i = 0; i < batch; ++i)
    for (int a = 0; a < 3; ++a)
      if (a != dropped_axis) out[o++] = points.value(i * 3 + a);
  return Tensor({batch, 2}, std::move(out));
}

std::array<Tensor, 3> orthogonal_project_triplane(const Tensor& points) {
  return {orthogonal_project(points, 2), orthogonal_project(points, 1),
          orthogonal_project(points, 0)};
}

std::int64_t spatial_hash(std::int64_t ix, std::int64_t iy, std::int64_t iz,
                          std::int64_t table_size) {
  if (table_size <= 0) throw std::invalid_argument("spatial_hash: table size must be positive");
  if (ix < 0 || iy < 0 || iz < 0)
    throw std::invalid_argument("spatial_hash: negative grid coordinate");
  const std::uint64_t h = static_cast<std::uint64_t>(ix) * 1ull ^
                          static_cast<std::uint64_t>(iy) * 2654435761ull ^
                          static_cast<std::uint64_t>(iz) * 805459861ull;
  return static_cast<std::int64_t>(h % static_cast<std::uint64_t>(table_size));
}

}  // namespace ngf
