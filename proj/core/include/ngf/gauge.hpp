#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ngf/field.hpp"
#include "ngf/tensor.hpp"

namespace ngf {

/// Coordinate regressor from the unit cube into the unit square (or a
/// higher-dimensional target). Output squashed by sigmoid so the target
/// support stays fixed. Offset mode instead predicts a residual on top of
/// an orthogonal projection, for the structural-regularizer baseline.
struct ContinuousGauge {
  enum class Backend { kMlp, kGrid };
  Backend backend = Backend::kMlp;
  Mlp net;          // 3 -> ... -> target_dim
  FeatureGrid grid; // grid backend: features are raw target logits
  std::int64_t target_dim = 2;
  bool offset_mode = false;
  int projection_axis = 2;  // axis dropped in offset mode
  int encode_freqs = 0;     // sinusoidal input bands for the MLP backend (0 = raw coords)

  static ContinuousGauge init_mlp(const std::vector<std::int64_t>& hidden,
                                  std::int64_t target_dim, Rng& rng,
                                  bool offset_mode = false, int encode_freqs = 0);
  static ContinuousGauge init_grid(std::int64_t resolution, std::int64_t target_dim,
                                   Rng& rng);
  void collect_params(const std::string& prefix, ParamList& out) const;

  /// Raw offset term Delta(x), defined only in offset mode.
  Tensor offsets(const Tensor& points) const;
};

/// y = sigmoid(M(x)) for each row of `points` (offset mode: clamp(proj + Delta)).
Tensor continuous_forward(const ContinuousGauge& g, const Tensor& points);

/// One level of the discrete gauge: per-grid-point logits over N codebook
/// entries, tensor-parameterized by default, optionally MLP-produced.
struct DiscreteGaugeLevel {
  std::int64_t resolution = 0;
  Tensor logits;  // resolution^3 x N
};

struct DiscreteGauge {
  std::vector<DiscreteGaugeLevel> levels;
  std::int64_t entries = 0;
  std::int64_t k = 1;
  bool use_net = false;  // logits produced by a shared MLP at grid-point coords
  static constexpr int kNetFreqs = 4;  // sinusoidal bands fed to the logit net
  Mlp net;               // encoded coords -> ... -> N

  static DiscreteGauge init(const std::vector<std::int64_t>& resolutions,
                            std::int64_t entries, std::int64_t k, Rng& rng,
                            double logit_stddev = 1e-2);
  static DiscreteGauge init_net(const std::vector<std::int64_t>& resolutions,
                                std::int64_t entries, std::int64_t k,
                                const std::vector<std::int64_t>& hidden, Rng& rng);
  /// Logits for every grid point of one level, rows in x-major flat order.
  Tensor level_logits(std::size_t level) const;
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct TopkSelection {
  std::vector<std::int64_t> indices;     // k selected, by decreasing value
  std::vector<double> mixture;           // dense length N, selected / value_sum
  std::vector<double> straight_through;  // forward values of the ST tensor (== mixture)
};

/// Forward top-k scatter-and-normalize on a probability vector. Ties break
/// toward the lowest index.
TopkSelection topk_select(const std::vector<double>& p, std::int64_t k);

/// Straight-through wrapper over a batch of soft distributions (B x N):
/// forward values are the normalized hard top-k of each row, the backward
/// gradient passes to `soft` unchanged (softmax substitution).
Tensor topk_straight_through(const Tensor& soft, std::int64_t k);

struct DiscreteForwardResult {
  Tensor feature;                   // B x (levels * D), levels concatenated
  std::vector<Tensor> corner_soft;  // softmax distributions seen this pass (B x N each)
};

/// Per level: the 8 surrounding grid points run top-k on their logits, look
/// up the mixed codebook feature, and the corner features are trilinearly
/// interpolated.
DiscreteForwardResult discrete_forward(const DiscreteGauge& g, const Codebook& book,
                                       const Tensor& points);

/// Sinusoidal gauge: per axis and frequency, (cos(m*theta), sin(m*theta)),
/// optionally modulated elementwise by an amplitude feature of matching
/// dimension.
struct InfoInvEncoder {
  std::vector<double> frequencies;  // shared across axes
  std::int64_t input_dim = 3;
  bool learnable = false;
  Tensor theta;  // learnable variant

  static InfoInvEncoder geometric(std::int64_t input_dim, std::int64_t num_freqs,
                                  bool learnable = false);
  std::int64_t output_dim() const {
    return 2 * static_cast<std::int64_t>(frequencies.size()) * input_dim;
  }
  void collect_params(const std::string& prefix, ParamList& out) const;
};

Tensor infoinv_encode(const InfoInvEncoder& e, const Tensor& points);
Tensor infoinv_encode(const InfoInvEncoder& e, const Tensor& points,
                      const Tensor& amplitude);

struct OrthogonalGauge {
  int dropped_axis = 2;
  bool triplane = false;
};

/// Exact coordinate restriction: drop one axis, or all three axis pairs for
/// the triplane variant.
Tensor orthogonal_project(const Tensor& points, int dropped_axis);
std::array<Tensor, 3> orthogonal_project_triplane(const Tensor& points);

/// Multiplicative-XOR spatial hash with pinned primes, index in [0, T).
std::int64_t spatial_hash(std::int64_t ix, std::int64_t iy, std::int64_t iz,
                          std::int64_t table_size);

struct HashGauge {
  std::int64_t table_size = 0;
};

}  // namespace ngf
