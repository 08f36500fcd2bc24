#include "ngf/field.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ngf {

Linear Linear::init(std::int64_t in, std::int64_t out, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  Linear l;
  l.weight = Tensor({in, out}, rng.uniform_vector(static_cast<std::size_t>(in * out), -bound, bound), true);
  l.bias = Tensor::zeros({out}, true);
  return l;
}

Linear Linear::zero_init(std::int64_t in, std::int64_t out) {
  Linear l;
  l.weight = Tensor::zeros({in, out}, true);
  l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor Linear::forward(const Tensor& x) const {
  return add_rowvec(matmul(x, weight), bias);
}

Mlp Mlp::init(const std::vector<std::int64_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least in/out widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.layers.push_back(Linear::init(widths[i], widths[i + 1], rng));
  return m;
}

Tensor Mlp::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim()) {
    std::ostringstream os;
    os << "Mlp: input shape " << shape_str(x.shape()) << " does not match first layer ("
       << input_dim() << " inputs)";
    throw std::invalid_argument(os.str());
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

void Mlp::collect_params(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(prefix + ".l" + std::to_string(i) + ".w", layers[i].weight);
    out.emplace_back(prefix + ".l" + std::to_string(i) + ".b", layers[i].bias);
  }
}

MlpField MlpField::init(std::int64_t in_dim, const std::vector<std::int64_t>& hidden,
                        bool view_dependent, Rng& rng) {
  std::vector<std::int64_t> widths;
  widths.push_back(in_dim);
  for (auto h : hidden) widths.push_back(h);
  MlpField f;
  f.trunk = Mlp::init(widths, rng);
  const std::int64_t h = widths.back();
  f.density_head = Linear::init(h, 1, rng);
  f.color_head = Linear::init(view_dependent ? h + 3 : h, 3, rng);
  f.view_dependent = view_dependent;
  return f;
}

MlpField::Output MlpField::forward(const Tensor& x, const std::optional<Tensor>& view_dir) const {
  Tensor h = trunk.forward(x);
  h = relu(h);
  Tensor density = softplus(density_head.forward(h));
  Tensor hc = h;
  if (view_dependent) {
    if (!view_dir) throw std::invalid_argument("MlpField: view direction required");
    hc = concat({h, *view_dir}, 1);
  }
  Tensor color = sigmoid(color_head.forward(hc));
  return {density, color};
}

void MlpField::collect_params(const std::string& prefix, ParamList& out) const {
  trunk.collect_params(prefix + ".trunk", out);
  out.emplace_back(prefix + ".density.w", density_head.weight);
  out.emplace_back(prefix + ".density.b", density_head.bias);
  out.emplace_back(prefix + ".color.w", color_head.weight);
  out.emplace_back(prefix + ".color.b", color_head.bias);
}

FeatureGrid FeatureGrid::init(std::vector<std::int64_t> resolution, std::int64_t feature_dim,
                              Rng& rng, double stddev) {
  FeatureGrid g;
  g.resolution = std::move(resolution);
  g.feature_dim = feature_dim;
  std::int64_t n = 1;
  for (auto r : g.resolution) {
    if (r < 2) throw std::invalid_argument("FeatureGrid: resolution must be >= 2 per axis");
    n *= r;
  }
  g.values = Tensor({n, feature_dim},
                    rng.normal_vector(static_cast<std::size_t>(n * feature_dim), 0.0, stddev), true);
  return g;
}

std::int64_t FeatureGrid::num_points() const {
  std::int64_t n = 1;
  for (auto r : resolution) n *= r;
  return n;
}

std::int64_t FeatureGrid::flat_index(const std::vector<std::int64_t>& coord) const {
  std::int64_t idx = 0;
  for (std::size_t a = 0; a < resolution.size(); ++a) idx = idx * resolution[a] + coord[a];
  return idx;
}

Tensor grid_interpolate(const FeatureGrid& grid, const Tensor& points) {
  const int d = static_cast<int>(grid.resolution.size());
  if (points.rank() != 2 || points.dim(1) != d) {
    std::ostringstream os;
    os << "grid_interpolate: points " << shape_str(points.shape()) << " do not match a "
       << d << "-D grid";
    throw std::invalid_argument(os.str());
  }
  const std::int64_t batch = points.dim(0);
  const int corners = 1 << d;

  // Per point: base cell coordinate and fractional offset per axis.
  std::vector<std::int64_t> base(static_cast<std::size_t>(batch) * d);
  std::vector<double> frac(static_cast<std::size_t>(batch) * d);
  for (std::int64_t i = 0; i < batch; ++i) {
    for (int a = 0; a < d; ++a) {
      const double x = points.value(i * d + a);
      if (x < 0.0 || x > 1.0)
        throw std::invalid_argument("grid_interpolate: coordinate " + std::to_string(x) +
                                    " outside the unit cube");
      const std::int64_t cells = grid.resolution[static_cast<std::size_t>(a)] - 1;
      double scaled = x * static_cast<double>(cells);
      std::int64_t c = static_cast<std::int64_t>(scaled);
      if (c >= cells) c = cells - 1;  // x == 1 falls into the last cell
      base[static_cast<std::size_t>(i * d + a)] = c;
      frac[static_cast<std::size_t>(i * d + a)] = scaled - static_cast<double>(c);
    }
  }

  Tensor acc = Tensor::zeros({batch, grid.feature_dim});
  std::vector<std::int64_t> rows(static_cast<std::size_t>(batch));
  std::vector<double> w(static_cast<std::size_t>(batch));
  std::vector<std::int64_t> coord(static_cast<std::size_t>(d));
  for (int c = 0; c < corners; ++c) {
    for (std::int64_t i = 0; i < batch; ++i) {
      double wi = 1.0;
      for (int a = 0; a < d; ++a) {
        const bool hi = (c >> a) & 1;
        const double f = frac[static_cast<std::size_t>(i * d + a)];
        wi *= hi ? f : (1.0 - f);
        coord[static_cast<std::size_t>(a)] =
            base[static_cast<std::size_t>(i * d + a)] + (hi ? 1 : 0);
      }
      rows[static_cast<std::size_t>(i)] = grid.flat_index(coord);
      w[static_cast<std::size_t>(i)] = wi;
    }
    Tensor corner_feats = gather(grid.values, rows);
    acc = add(acc, scale_rows(corner_feats, Tensor::from_vector(w)));
  }
  return acc;
}

Codebook Codebook::init(std::int64_t num_layers, std::int64_t entries, std::int64_t dim,
                        Rng& rng, double stddev) {
  Codebook b;
  b.entries = entries;
  b.dim = dim;
  for (std::int64_t l = 0; l < num_layers; ++l)
    b.layers.push_back(Tensor({entries, dim},
                              rng.normal_vector(static_cast<std::size_t>(entries * dim), 0.0, stddev),
                              true));
  return b;
}

void Codebook::collect_params(const std::string& prefix, ParamList& out) const {
  for (std::size_t l = 0; l < layers.size(); ++l)
    out.emplace_back(prefix + ".layer" + std::to_string(l), layers[l]);
}

Tensor codebook_lookup(const Codebook& book, std::size_t layer, const Tensor& weights) {
  if (layer >= book.layers.size())
    throw std::invalid_argument("codebook_lookup: layer out of range");
  Tensor w = weights;
  if (w.rank() == 1) w = reshape(w, {1, w.numel()});
  if (w.rank() != 2 || w.dim(1) != book.entries)
    throw std::invalid_argument("codebook_lookup: weight length " +
                                std::to_string(weights.shape().back()) +
                                " does not match codebook entries " +
                                std::to_string(book.entries));
  for (double v : w.values())
    if (!std::isfinite(v))
      throw std::invalid_argument("codebook_lookup: non-finite weight");
  return matmul(w, book.layers[layer]);
}

}  // namespace ngf
