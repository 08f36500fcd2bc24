#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"

namespace ngf {

/// Named parameter list, ordered. Ordering is part of the determinism
/// contract (optimizer walks it in sequence).
using ParamList = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out

  static Linear init(std::int64_t in, std::int64_t out, Rng& rng, double gain = 1.0);
  static Linear zero_init(std::int64_t in, std::int64_t out);
  Tensor forward(const Tensor& x) const;  // x: B x in
};

/// Plain ReLU MLP trunk: widths = {in, h1, ..., out}. The last layer is
/// linear (no activation); callers attach their own heads.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp init(const std::vector<std::int64_t>& widths, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect_params(const std::string& prefix, ParamList& out) const;
  std::int64_t input_dim() const { return layers.front().weight.dim(0); }
  std::int64_t output_dim() const { return layers.back().weight.dim(1); }
};

/// Field with a softplus density head and a sigmoid color head. The trunk
/// takes coordinates or features; view direction, when enabled, is appended
/// before the color head.
struct MlpField {
  Mlp trunk;
  Linear density_head;  // hidden -> 1
  Linear color_head;    // hidden (+3 if view_dependent) -> 3
  bool view_dependent = false;

  static MlpField init(std::int64_t in_dim, const std::vector<std::int64_t>& hidden,
                       bool view_dependent, Rng& rng);

  struct Output {
    Tensor density;  // B x 1, >= 0
    Tensor color;    // B x 3, in [0,1]
  };
  Output forward(const Tensor& x, const std::optional<Tensor>& view_dir = {}) const;
  void collect_params(const std::string& prefix, ParamList& out) const;
};

/// Regular grid of learnable feature vectors over the closed unit cube.
struct FeatureGrid {
  std::vector<std::int64_t> resolution;  // grid points per axis
  std::int64_t feature_dim = 0;
  Tensor values;  // prod(resolution) x feature_dim

  static FeatureGrid init(std::vector<std::int64_t> resolution, std::int64_t feature_dim,
                          Rng& rng, double stddev = 0.1);
  std::int64_t num_points() const;
  std::int64_t flat_index(const std::vector<std::int64_t>& coord) const;
};

/// Multilinear interpolation of grid features at points inside the unit
/// cube. Differentiable with respect to the grid values; query points are
/// treated as data.
Tensor grid_interpolate(const FeatureGrid& grid, const Tensor& points);

/// Layered table of learnable feature vectors addressed by discrete gauge
/// parameters.
struct Codebook {
  std::vector<Tensor> layers;  // each N x D
  std::int64_t entries = 0;
  std::int64_t dim = 0;

  static Codebook init(std::int64_t num_layers, std::int64_t entries, std::int64_t dim,
                       Rng& rng, double stddev = 0.1);
  void collect_params(const std::string& prefix, ParamList& out) const;
};

/// weights^T * V over one layer; weights may be a length-N vector or B x N.
Tensor codebook_lookup(const Codebook& book, std::size_t layer, const Tensor& weights);

}  // namespace ngf
