#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ngf/field.hpp"
#include "ngf/gauge.hpp"
#include "ngf/regularize.hpp"
#include "ngf/render.hpp"
#include "ngf/scene.hpp"
#include "ngf/tensor.hpp"

namespace ngf {

enum class GaugeKind { kContinuous, kDiscrete, kInfoInv, kOrthogonal, kHash };
enum class RegKind { kNone, kInfoReg, kCycle, kStructural };

std::string to_string(GaugeKind k);
std::string to_string(RegKind k);
GaugeKind gauge_kind_from_string(const std::string& s);
RegKind reg_kind_from_string(const std::string& s);

/// Full experiment description. Serializes to/from flat JSON; every field
/// can be overridden with a dotted key on the CLI.
struct TrainConfig {
  std::string scene = "sphere";
  std::uint64_t scene_seed = 0;
  GaugeKind gauge = GaugeKind::kContinuous;
  RegKind regularizer = RegKind::kNone;
  double gamma = 1.0;
  double epsilon = 0.1;
  std::int64_t k = 1;
  std::int64_t codebook_layers = 2;
  std::int64_t codebook_entries = 64;  // paper scale 256, desk default 64
  std::int64_t codebook_dim = 128;
  bool discrete_logit_net = false;  // shared-MLP logits instead of per-point tensors
  std::vector<std::int64_t> grid_resolutions = {16, 32};
  std::int64_t rays_per_batch = 256;
  std::int64_t samples_per_ray = 32;
  std::int64_t steps = 1000;
  double lr = 5e-4;
  double critic_lr = 1e-3;
  std::uint64_t seed = 1;
  std::array<double, 3> background = {0.0, 0.0, 0.0};
  std::int64_t image_size = 64;
  std::int64_t train_views = 8;
  std::int64_t heldout_views = 4;
  std::int64_t metric_cadence = 50;
  std::int64_t prior_samples = 64;   // h for the continuous prior
  std::int64_t reg_points = 256;     // positive/negative pair subsample
  std::int64_t reg_start = 0;        // regularizer window [start, end)
  std::int64_t reg_end = -1;         // -1: until the last step
  bool continuous_grid_backend = false;
  bool infoinv_modulate = true;
  bool infoinv_learnable = false;
  std::int64_t infoinv_freqs = 6;
  std::int64_t amp_grid_res = 16;
  std::vector<std::int64_t> field_hidden = {128, 128, 128, 128};
  std::vector<std::int64_t> head_hidden = {64, 64};
  std::vector<std::int64_t> gauge_hidden = {64, 64};
  std::int64_t gauge_encode_freqs = 0;  // sinusoidal input bands for the learned continuous gauge
  std::int64_t hash_table_size = 2048;
  int critic_extra_updates = 1;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  void apply_override(const std::string& key, const std::string& value);
  std::uint64_t hash() const;
};

/// Standard bias-corrected Adam over a named parameter list.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamList params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// Applies one update from the parameters' accumulated gradients, then
  /// zeroes them. A non-finite gradient anywhere rejects the whole step.
  /// Returns false on rejection.
  bool step();
  void zero_grad();
  std::int64_t rejected_steps() const { return rejected_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::int64_t rejected_ = 0;
};

/// All learnable state for one experiment, assembled from a TrainConfig.
struct Model {
  TrainConfig cfg;
  GaugeKind gauge_kind = GaugeKind::kContinuous;

  ContinuousGauge cont_gauge;
  DiscreteGauge disc_gauge;
  Codebook codebook;            // discrete gauge
  std::vector<Tensor> hash_tables;  // hash gauge, one T x D table per level
  InfoInvEncoder encoder;
  FeatureGrid amp_grid;         // infoinv amplitude / plain grid feature
  MlpField field;               // density + color heads
  Mlp inverse_net;              // cycle regularizer / visualization
  CriticNetwork critic;

  ParamList params() const;         // everything the main optimizer updates
  ParamList critic_params() const;  // critic only
};

Model build_model(const TrainConfig& cfg);

struct FieldQuery {
  Tensor sigma;  // B x 1
  Tensor color;  // B x 3
  std::optional<Tensor> gauge_2d;        // continuous-family gauges
  std::vector<Tensor> corner_soft;       // discrete gauge distributions
  std::optional<Tensor> disc_feature;    // discrete straight-through feature
};

/// Evaluates the model's field at a batch of 3-D points inside the unit cube.
FieldQuery query_model(const Model& model, const Tensor& points);

struct MetricRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double psnr = 0.0;
  std::optional<double> occupancy;
  std::optional<double> utilization;
};

std::string metrics_to_csv(const std::vector<MetricRow>& rows);

struct TrainResult {
  std::vector<MetricRow> metrics;
  std::int64_t rejected_steps = 0;
};

/// Invoked right after each metric row is recorded; the model reflects the
/// state at that step.
using MetricCallback = std::function<void(const Model&, const MetricRow&)>;

/// Optimizes the model on procedurally rendered supervision. Aborts with a
/// step-numbered error if the loss goes non-finite.
TrainResult train(Model& model, const MetricCallback& on_metric = {});

/// Cameras used for training and held-out evaluation, derived from the config.
CameraRig train_rig(const TrainConfig& cfg);
CameraRig heldout_rig(const TrainConfig& cfg);
RenderOptions render_options(const TrainConfig& cfg);

/// Renders one view with the model (no tape). Pixels in [0,1], H*W*3.
std::vector<double> render_view(const Model& model, const Camera& cam,
                                const RenderOptions& opts);

struct EvalResult {
  std::vector<double> per_view;
  double mean = 0.0;
};

EvalResult evaluate(const Model& model, const CameraRig& rig,
                    const std::vector<Image>& references, const RenderOptions& opts);

/// Fraction of a G x G partition of the unit square hit by the mapped
/// radiance-significant points (weight >= 0.01).
double occupancy_metric(const ContinuousGauge& g, const Tensor& surface_points,
                        const std::vector<double>& weights, std::int64_t grid = 64);

/// Fraction of codebook entries that are the argmax for at least one grid
/// point, averaged over levels.
double utilization_metric(const DiscreteGauge& g);

/// Radiance-significant shading points and weights gathered by rendering
/// the training views through the current model.
struct SurfaceSamples {
  Tensor points;               // M x 3
  std::vector<double> weights; // M
  std::vector<double> colors;  // M * 3, model radiance at each point
};
SurfaceSamples collect_surface_samples(const Model& model, std::int64_t max_points = 16384);

/// Trains an MLP from the target gauge back to 3-D on radiance-weighted
/// samples; returns the inverse network.
Mlp fit_inverse_gauge(const ContinuousGauge& g, const Tensor& surface_points,
                      const std::vector<double>& weights, std::int64_t steps,
                      std::uint64_t seed, double* final_loss = nullptr);

}  // namespace ngf
