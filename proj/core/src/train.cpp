#include "ngf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ngf/checkpoint.hpp"

namespace ngf {

namespace {

struct RayHit {
  Ray ray;
  double tmin = 0.0;
  double tmax = 0.0;
};

bool intersect_unit_cube(const Ray& ray, double* tmin_out, double* tmax_out) {
  double tmin = 1e-4, tmax = 1e30;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[static_cast<std::size_t>(a)];
    const double d = ray.direction[static_cast<std::size_t>(a)];
    if (std::abs(d) < 1e-12) {
      if (o < 0.0 || o > 1.0) return false;
      continue;
    }
    double t0 = (0.0 - o) / d;
    double t1 = (1.0 - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  if (tmax <= tmin) return false;
  *tmin_out = tmin;
  *tmax_out = tmax;
  return true;
}

Tensor points_along(const std::vector<RayHit>& rays,
                    const std::vector<SamplePositions>& samples, std::int64_t n) {
  std::vector<double> pts;
  pts.reserve(rays.size() * static_cast<std::size_t>(n) * 3);
  for (std::size_t r = 0; r < rays.size(); ++r)
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = samples[r].t[static_cast<std::size_t>(i)];
      for (int a = 0; a < 3; ++a) {
        const double v = rays[r].ray.origin[static_cast<std::size_t>(a)] +
                         t * rays[r].ray.direction[static_cast<std::size_t>(a)];
        pts.push_back(std::clamp(v, 0.0, 1.0));
      }
    }
  return Tensor({static_cast<std::int64_t>(rays.size()) * n, 3}, std::move(pts));
}

/// Instant-NGP style hashed multilinear feature lookup for one level.
Tensor hash_encode_level(const Tensor& points, std::int64_t res, const Tensor& table) {
  const std::int64_t batch = points.dim(0);
  const std::int64_t table_size = table.dim(0);
  const std::int64_t cells = res - 1;
  Tensor acc = Tensor::zeros({batch, table.dim(1)});
  std::vector<std::int64_t> rows(static_cast<std::size_t>(batch));
  std::vector<double> w(static_cast<std::size_t>(batch));
  for (int c = 0; c < 8; ++c) {
    for (std::int64_t i = 0; i < batch; ++i) {
      double wi = 1.0;
      std::int64_t coord[3];
      for (int a = 0; a < 3; ++a) {
        double scaled = points.value(i * 3 + a) * static_cast<double>(cells);
        std::int64_t base = static_cast<std::int64_t>(scaled);
        if (base >= cells) base = cells - 1;
        const double f = scaled - static_cast<double>(base);
        const bool hi = (c >> a) & 1;
        wi *= hi ? f : (1.0 - f);
        coord[a] = base + (hi ? 1 : 0);
      }
      rows[static_cast<std::size_t>(i)] = spatial_hash(coord[0], coord[1], coord[2], table_size);
      w[static_cast<std::size_t>(i)] = wi;
    }
    acc = add(acc, scale_rows(gather(table, rows), Tensor::from_vector(w)));
  }
  return acc;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(GaugeKind k) {
  switch (k) {
    case GaugeKind::kContinuous: return "continuous";
    case GaugeKind::kDiscrete: return "discrete";
    case GaugeKind::kInfoInv: return "infoinv";
    case GaugeKind::kOrthogonal: return "orthogonal";
    case GaugeKind::kHash: return "hash";
  }
  return "?";
}

std::string to_string(RegKind k) {
  switch (k) {
    case RegKind::kNone: return "none";
    case RegKind::kInfoReg: return "inforeg";
    case RegKind::kCycle: return "cycle";
    case RegKind::kStructural: return "structural";
  }
  return "?";
}

GaugeKind gauge_kind_from_string(const std::string& s) {
  if (s == "continuous") return GaugeKind::kContinuous;
  if (s == "discrete") return GaugeKind::kDiscrete;
  if (s == "infoinv") return GaugeKind::kInfoInv;
  if (s == "orthogonal") return GaugeKind::kOrthogonal;
  if (s == "hash") return GaugeKind::kHash;
  throw std::invalid_argument("unknown gauge kind '" + s + "'");
}

RegKind reg_kind_from_string(const std::string& s) {
  if (s == "none") return RegKind::kNone;
  if (s == "inforeg") return RegKind::kInfoReg;
  if (s == "cycle") return RegKind::kCycle;
  if (s == "structural") return RegKind::kStructural;
  throw std::invalid_argument("unknown regularizer '" + s + "'");
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["scene"] = scene;
  j["scene_seed"] = scene_seed;
  j["gauge"] = ngf::to_string(gauge);
  j["regularizer"] = ngf::to_string(regularizer);
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["k"] = k;
  j["codebook_layers"] = codebook_layers;
  j["codebook_entries"] = codebook_entries;
  j["codebook_dim"] = codebook_dim;
  j["discrete_logit_net"] = discrete_logit_net;
  j["grid_resolutions"] = grid_resolutions;
  j["rays_per_batch"] = rays_per_batch;
  j["samples_per_ray"] = samples_per_ray;
  j["steps"] = steps;
  j["lr"] = lr;
  j["critic_lr"] = critic_lr;
  j["seed"] = seed;
  j["background"] = background;
  j["image_size"] = image_size;
  j["train_views"] = train_views;
  j["heldout_views"] = heldout_views;
  j["metric_cadence"] = metric_cadence;
  j["prior_samples"] = prior_samples;
  j["reg_points"] = reg_points;
  j["reg_start"] = reg_start;
  j["reg_end"] = reg_end;
  j["continuous_grid_backend"] = continuous_grid_backend;
  j["infoinv_modulate"] = infoinv_modulate;
  j["infoinv_learnable"] = infoinv_learnable;
  j["infoinv_freqs"] = infoinv_freqs;
  j["amp_grid_res"] = amp_grid_res;
  j["field_hidden"] = field_hidden;
  j["head_hidden"] = head_hidden;
  j["gauge_hidden"] = gauge_hidden;
  j["gauge_encode_freqs"] = gauge_encode_freqs;
  j["hash_table_size"] = hash_table_size;
  j["critic_extra_updates"] = critic_extra_updates;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("TrainConfig: invalid JSON: ") + e.what());
  }
  TrainConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].template get<std::decay_t<decltype(field)>>();
  };
  get("scene", c.scene);
  get("scene_seed", c.scene_seed);
  if (j.contains("gauge")) c.gauge = gauge_kind_from_string(j["gauge"].get<std::string>());
  if (j.contains("regularizer"))
    c.regularizer = reg_kind_from_string(j["regularizer"].get<std::string>());
  get("gamma", c.gamma);
  get("epsilon", c.epsilon);
  get("k", c.k);
  get("codebook_layers", c.codebook_layers);
  get("codebook_entries", c.codebook_entries);
  get("codebook_dim", c.codebook_dim);
  get("discrete_logit_net", c.discrete_logit_net);
  get("grid_resolutions", c.grid_resolutions);
  get("rays_per_batch", c.rays_per_batch);
  get("samples_per_ray", c.samples_per_ray);
  get("steps", c.steps);
  get("lr", c.lr);
  get("critic_lr", c.critic_lr);
  get("seed", c.seed);
  get("background", c.background);
  get("image_size", c.image_size);
  get("train_views", c.train_views);
  get("heldout_views", c.heldout_views);
  get("metric_cadence", c.metric_cadence);
  get("prior_samples", c.prior_samples);
  get("reg_points", c.reg_points);
  get("reg_start", c.reg_start);
  get("reg_end", c.reg_end);
  get("continuous_grid_backend", c.continuous_grid_backend);
  get("infoinv_modulate", c.infoinv_modulate);
  get("infoinv_learnable", c.infoinv_learnable);
  get("infoinv_freqs", c.infoinv_freqs);
  get("amp_grid_res", c.amp_grid_res);
  get("field_hidden", c.field_hidden);
  get("head_hidden", c.head_hidden);
  get("gauge_hidden", c.gauge_hidden);
  get("gauge_encode_freqs", c.gauge_encode_freqs);
  get("hash_table_size", c.hash_table_size);
  get("critic_extra_updates", c.critic_extra_updates);
  return c;
}

void TrainConfig::apply_override(const std::string& key, const std::string& value) {
  nlohmann::json j = nlohmann::json::parse(to_json());
  if (!j.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;  // bare string
  }
  j[key] = parsed;
  *this = from_json(j.dump());
}

std::uint64_t TrainConfig::hash() const { return fnv1a_hash(to_json()); }

AdamOptimizer::AdamOptimizer(ParamList params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.values().size(), 0.0);
    v_.emplace_back(t.values().size(), 0.0);
  }
}

bool AdamOptimizer::step() {
  for (const auto& [name, t] : params_)
    for (double g : t.grad())
      if (!std::isfinite(g)) {
        ++rejected_;
        zero_grad();
        return false;
      }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].second;
    const auto& g = t.grad();
    auto& vals = t.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m_[p][i] / bc1;
      const double vhat = v_[p][i] / bc2;
      vals[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
  zero_grad();
  return true;
}

void AdamOptimizer::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Model build_model(const TrainConfig& cfg) {
  Model m;
  m.cfg = cfg;
  m.gauge_kind = cfg.gauge;
  Rng rng(cfg.seed);

  const bool offset_mode = cfg.regularizer == RegKind::kStructural;
  std::int64_t field_in = 0;
  std::int64_t gauge_out_dim = 0;

  switch (cfg.gauge) {
    case GaugeKind::kContinuous:
      if (cfg.continuous_grid_backend)
        m.cont_gauge = ContinuousGauge::init_grid(cfg.amp_grid_res, 2, rng);
      else
        m.cont_gauge = ContinuousGauge::init_mlp(cfg.gauge_hidden, 2, rng, offset_mode,
                                                 static_cast<int>(cfg.gauge_encode_freqs));
      [[fallthrough]];
    case GaugeKind::kOrthogonal:
      m.encoder = InfoInvEncoder::geometric(2, 4);
      field_in = 2 + m.encoder.output_dim();
      gauge_out_dim = 2;
      m.field = MlpField::init(field_in, cfg.field_hidden, false, rng);
      break;
    case GaugeKind::kDiscrete:
      m.disc_gauge =
          cfg.discrete_logit_net
              ? DiscreteGauge::init_net(cfg.grid_resolutions, cfg.codebook_entries, cfg.k,
                                        cfg.gauge_hidden, rng)
              : DiscreteGauge::init(cfg.grid_resolutions, cfg.codebook_entries, cfg.k, rng);
      m.codebook = Codebook::init(cfg.codebook_layers, cfg.codebook_entries, cfg.codebook_dim, rng);
      if (cfg.codebook_layers != static_cast<std::int64_t>(cfg.grid_resolutions.size()))
        throw std::invalid_argument("build_model: codebook_layers must match grid level count");
      field_in = cfg.codebook_layers * cfg.codebook_dim;
      gauge_out_dim = field_in;
      m.field = MlpField::init(field_in, cfg.head_hidden, false, rng);
      break;
    case GaugeKind::kHash:
      for (std::size_t l = 0; l < cfg.grid_resolutions.size(); ++l)
        m.hash_tables.push_back(
            Tensor({cfg.hash_table_size, cfg.codebook_dim},
                   rng.normal_vector(static_cast<std::size_t>(cfg.hash_table_size * cfg.codebook_dim),
                                     0.0, 0.1),
                   true));
      field_in = static_cast<std::int64_t>(cfg.grid_resolutions.size()) * cfg.codebook_dim;
      m.field = MlpField::init(field_in, cfg.head_hidden, false, rng);
      break;
    case GaugeKind::kInfoInv:
      m.encoder = InfoInvEncoder::geometric(3, cfg.infoinv_freqs, cfg.infoinv_learnable);
      m.amp_grid = FeatureGrid::init({cfg.amp_grid_res, cfg.amp_grid_res, cfg.amp_grid_res},
                                     m.encoder.output_dim(), rng, 0.3);
      field_in = m.encoder.output_dim();
      m.field = MlpField::init(field_in, cfg.field_hidden, false, rng);
      break;
  }

  if (cfg.regularizer == RegKind::kCycle) {
    std::vector<std::int64_t> widths{gauge_out_dim, 64, 64, 3};
    m.inverse_net = Mlp::init(widths, rng);
  }
  if (cfg.regularizer == RegKind::kInfoReg)
    m.critic = CriticNetwork::init(3, gauge_out_dim == 0 ? 3 : gauge_out_dim, rng);
  return m;
}

ParamList Model::params() const {
  ParamList p;
  switch (gauge_kind) {
    case GaugeKind::kContinuous:
      cont_gauge.collect_params("gauge", p);
      break;
    case GaugeKind::kDiscrete:
      disc_gauge.collect_params("gauge", p);
      codebook.collect_params("codebook", p);
      break;
    case GaugeKind::kHash:
      for (std::size_t l = 0; l < hash_tables.size(); ++l)
        p.emplace_back("hash.table" + std::to_string(l), hash_tables[l]);
      break;
    case GaugeKind::kInfoInv:
      p.emplace_back("infoinv.amp_grid", amp_grid.values);
      encoder.collect_params("infoinv", p);
      break;
    case GaugeKind::kOrthogonal:
      break;
  }
  field.collect_params("field", p);
  if (cfg.regularizer == RegKind::kCycle) inverse_net.collect_params("inverse", p);
  if (cfg.regularizer == RegKind::kInfoReg) critic.collect_params("critic", p);
  return p;
}

ParamList Model::critic_params() const {
  ParamList p;
  critic.collect_params("critic", p);
  return p;
}

FieldQuery query_model(const Model& model, const Tensor& points) {
  FieldQuery q;
  Tensor field_in;
  switch (model.gauge_kind) {
    case GaugeKind::kContinuous: {
      Tensor y = continuous_forward(model.cont_gauge, points);
      q.gauge_2d = y;
      field_in = concat({y, infoinv_encode(model.encoder, y)}, 1);
      break;
    }
    case GaugeKind::kOrthogonal: {
      Tensor y = orthogonal_project(points, 2);
      q.gauge_2d = y;
      field_in = concat({y, infoinv_encode(model.encoder, y)}, 1);
      break;
    }
    case GaugeKind::kDiscrete: {
      DiscreteForwardResult res = discrete_forward(model.disc_gauge, model.codebook, points);
      q.corner_soft = std::move(res.corner_soft);
      q.disc_feature = res.feature;
      field_in = res.feature;
      break;
    }
    case GaugeKind::kHash: {
      std::vector<Tensor> levels;
      for (std::size_t l = 0; l < model.hash_tables.size(); ++l)
        levels.push_back(hash_encode_level(points, model.cfg.grid_resolutions[l],
                                           model.hash_tables[l]));
      field_in = levels.size() == 1 ? levels[0] : concat(levels, 1);
      break;
    }
    case GaugeKind::kInfoInv: {
      Tensor amp = grid_interpolate(model.amp_grid, points);
      field_in = model.cfg.infoinv_modulate
                     ? infoinv_encode(model.encoder, points, amp)
                     : amp;
      break;
    }
  }
  auto out = model.field.forward(field_in);
  q.sigma = out.density;
  q.color = out.color;
  return q;
}

CameraRig train_rig(const TrainConfig& cfg) {
  CameraRig rig = orbit_cameras(cfg.train_views, 1.25, 0.5, {0.5, 0.5, 0.5});
  rig.width = cfg.image_size;
  rig.height = cfg.image_size;
  rig.focal = static_cast<double>(cfg.image_size);
  return rig;
}

CameraRig heldout_rig(const TrainConfig& cfg) {
  CameraRig rig = orbit_cameras(cfg.heldout_views, 1.25, 0.3, {0.5, 0.5, 0.5});
  rig.width = cfg.image_size;
  rig.height = cfg.image_size;
  rig.focal = static_cast<double>(cfg.image_size);
  return rig;
}

RenderOptions render_options(const TrainConfig& cfg) {
  RenderOptions opts;
  opts.samples_per_ray = cfg.samples_per_ray;
  opts.near = 0.2;
  opts.far = 2.6;
  opts.background = cfg.background;
  opts.seed = cfg.seed;
  opts.jitter = false;
  return opts;
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "step,loss,psnr,occupancy,utilization\n";
  for (const auto& r : rows) {
    os << r.step << "," << format_double(r.loss) << "," << format_double(r.psnr) << ",";
    if (r.occupancy) os << format_double(*r.occupancy);
    os << ",";
    if (r.utilization) os << format_double(*r.utilization);
    os << "\n";
  }
  return os.str();
}

double occupancy_metric(const ContinuousGauge& g, const Tensor& surface_points,
                        const std::vector<double>& weights, std::int64_t grid) {
  if (surface_points.rank() != 2 || surface_points.dim(1) != 3)
    throw std::invalid_argument("occupancy_metric: expects B x 3 points");
  std::vector<std::int64_t> significant;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] >= 0.01) significant.push_back(static_cast<std::int64_t>(i));
  if (significant.empty())
    throw std::invalid_argument("occupancy_metric: no radiance-significant points");
  Tensor pts = gather(surface_points, significant);
  Tensor mapped = continuous_forward(g, pts);
  std::set<std::int64_t> cells;
  for (std::int64_t i = 0; i < mapped.dim(0); ++i) {
    const auto cell = [&](int a) {
      return std::min<std::int64_t>(grid - 1,
                                    static_cast<std::int64_t>(mapped.value(i * 2 + a) *
                                                              static_cast<double>(grid)));
    };
    cells.insert(cell(0) * grid + cell(1));
  }
  return static_cast<double>(cells.size()) / static_cast<double>(grid * grid);
}

double utilization_metric(const DiscreteGauge& g) {
  double total = 0.0;
  for (std::size_t l = 0; l < g.levels.size(); ++l) {
    const Tensor logits = g.level_logits(l);
    const std::int64_t n = logits.dim(1);
    const std::int64_t rows = logits.dim(0);
    std::set<std::int64_t> used;
    for (std::int64_t r = 0; r < rows; ++r) {
      std::int64_t best = 0;
      double best_v = logits.value(r * n);
      for (std::int64_t j = 1; j < n; ++j) {
        const double v = logits.value(r * n + j);
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      used.insert(best);
    }
    total += static_cast<double>(used.size()) / static_cast<double>(n);
  }
  return total / static_cast<double>(g.levels.size());
}

std::vector<double> render_view(const Model& model, const Camera& cam,
                                const RenderOptions& opts) {
  std::vector<double> image(static_cast<std::size_t>(cam.width * cam.height) * 3);
  Rng rng(opts.seed);
  std::vector<std::pair<std::int64_t, std::int64_t>> pixels;
  for (std::int64_t y = 0; y < cam.height; ++y)
    for (std::int64_t x = 0; x < cam.width; ++x) pixels.emplace_back(x, y);
  const auto rays = make_rays(cam, pixels, opts.near, opts.far);

  const std::int64_t chunk = 1024;
  const std::int64_t n = opts.samples_per_ray;
  for (std::size_t start = 0; start < rays.size(); start += chunk) {
    const std::size_t end = std::min(rays.size(), start + static_cast<std::size_t>(chunk));
    std::vector<RayHit> hits;
    std::vector<SamplePositions> samples;
    std::vector<std::size_t> hit_pixel;
    for (std::size_t r = start; r < end; ++r) {
      double tmin, tmax;
      if (!intersect_unit_cube(rays[r], &tmin, &tmax)) {
        for (int ch = 0; ch < 3; ++ch)
          image[r * 3 + static_cast<std::size_t>(ch)] =
              opts.background[static_cast<std::size_t>(ch)];
        continue;
      }
      Ray clipped = rays[r];
      clipped.near = tmin;
      clipped.far = tmax;
      hits.push_back({clipped, tmin, tmax});
      samples.push_back(stratified_sample(clipped, n, rng, opts.jitter));
      hit_pixel.push_back(r);
    }
    if (hits.empty()) continue;
    Tensor pts = points_along(hits, samples, n);
    FieldQuery q = query_model(model, pts);
    std::vector<double> deltas;
    deltas.reserve(hits.size() * static_cast<std::size_t>(n));
    for (const auto& s : samples)
      deltas.insert(deltas.end(), s.delta.begin(), s.delta.end());
    CompositeResult comp =
        composite(reshape(q.sigma, {static_cast<std::int64_t>(hits.size()), n}), q.color, deltas);
    Tensor pred = apply_background(comp, opts.background);
    for (std::size_t i = 0; i < hits.size(); ++i)
      for (int ch = 0; ch < 3; ++ch)
        image[hit_pixel[i] * 3 + static_cast<std::size_t>(ch)] =
            pred.value(static_cast<std::int64_t>(i) * 3 + ch);
  }
  return image;
}

EvalResult evaluate(const Model& model, const CameraRig& rig,
                    const std::vector<Image>& references, const RenderOptions& opts) {
  if (rig.size() != references.size())
    throw std::invalid_argument("evaluate: view/reference count mismatch");
  EvalResult res;
  for (std::size_t v = 0; v < rig.size(); ++v) {
    if (references[v].width != rig.width || references[v].height != rig.height)
      throw std::invalid_argument("evaluate: resolution mismatch on view " + std::to_string(v));
    const auto img = render_view(model, rig.camera(v), opts);
    res.per_view.push_back(psnr(img, references[v].pixels));
  }
  double s = 0.0;
  for (double p : res.per_view) s += p;
  res.mean = s / static_cast<double>(res.per_view.size());
  return res;
}

SurfaceSamples collect_surface_samples(const Model& model, std::int64_t max_points) {
  const TrainConfig& cfg = model.cfg;
  CameraRig rig = train_rig(cfg);
  RenderOptions opts = render_options(cfg);
  Rng rng(cfg.seed + 17);

  SurfaceSamples out;
  std::vector<double> pts;
  const std::int64_t n = cfg.samples_per_ray;
  for (std::size_t v = 0; v < rig.size(); ++v) {
    Camera cam = rig.camera(v);
    std::vector<std::pair<std::int64_t, std::int64_t>> pixels;
    for (std::int64_t y = 0; y < cam.height; ++y)
      for (std::int64_t x = 0; x < cam.width; ++x) pixels.emplace_back(x, y);
    const auto rays = make_rays(cam, pixels, opts.near, opts.far);
    const std::int64_t chunk = 1024;
    for (std::size_t start = 0; start < rays.size(); start += chunk) {
      const std::size_t end = std::min(rays.size(), start + static_cast<std::size_t>(chunk));
      std::vector<RayHit> hits;
      std::vector<SamplePositions> samples;
      for (std::size_t r = start; r < end; ++r) {
        double tmin, tmax;
        if (!intersect_unit_cube(rays[r], &tmin, &tmax)) continue;
        Ray clipped = rays[r];
        clipped.near = tmin;
        clipped.far = tmax;
        hits.push_back({clipped, tmin, tmax});
        samples.push_back(stratified_sample(clipped, n, rng, false));
      }
      if (hits.empty()) continue;
      Tensor p = points_along(hits, samples, n);
      FieldQuery q = query_model(model, p);
      std::vector<double> deltas;
      for (const auto& s : samples) deltas.insert(deltas.end(), s.delta.begin(), s.delta.end());
      CompositeResult comp =
          composite(reshape(q.sigma, {static_cast<std::int64_t>(hits.size()), n}), q.color, deltas);
      for (std::int64_t i = 0; i < comp.weights.numel(); ++i) {
        const double w = comp.weights.value(i);
        if (w < 0.01) continue;
        for (int a = 0; a < 3; ++a) pts.push_back(p.value(i * 3 + a));
        for (int ch = 0; ch < 3; ++ch) out.colors.push_back(q.color.value(i * 3 + ch));
        out.weights.push_back(w);
        if (static_cast<std::int64_t>(out.weights.size()) >= max_points) break;
      }
      if (static_cast<std::int64_t>(out.weights.size()) >= max_points) break;
    }
    if (static_cast<std::int64_t>(out.weights.size()) >= max_points) break;
  }
  if (out.weights.empty()) {
    // degenerate field: fall back to uniformly sampled cube points
    for (int i = 0; i < 512; ++i) {
      for (int a = 0; a < 3; ++a) pts.push_back(rng.uniform());
      for (int ch = 0; ch < 3; ++ch) out.colors.push_back(0.5);
      out.weights.push_back(1.0);
    }
  }
  out.points = Tensor({static_cast<std::int64_t>(out.weights.size()), 3}, std::move(pts));
  return out;
}

Mlp fit_inverse_gauge(const ContinuousGauge& g, const Tensor& surface_points,
                      const std::vector<double>& weights, std::int64_t steps,
                      std::uint64_t seed, double* final_loss) {
  Rng rng(seed);
  Mlp inv = Mlp::init({2, 64, 64, 3}, rng);
  ParamList params;
  inv.collect_params("inverse", params);
  AdamOptimizer opt(params, 1e-3);

  Tensor mapped = detach(continuous_forward(g, surface_points));
  double last = 0.0;
  const std::int64_t batch = std::min<std::int64_t>(256, surface_points.dim(0));
  for (std::int64_t s = 0; s < steps; ++s) {
    const auto idx = radiance_weighted_sample(weights, batch, rng);
    Tensor x = gather(surface_points, idx);
    Tensor y = gather(mapped, idx);
    Tape tape;
    Tape::Scope scope(tape);
    Tensor recon = inv.forward(y);
    Tensor loss = cycle_loss(x, recon);
    last = loss.item();
    backward(loss);
    opt.step();
  }
  if (final_loss) *final_loss = last;
  return inv;
}

TrainResult train(Model& model, const MetricCallback& on_metric) {
  const TrainConfig& cfg = model.cfg;
  const VoxelScene scene = make_toy_scene(cfg.scene, cfg.scene_seed);
  const CameraRig rig = train_rig(cfg);
  RenderOptions opts = render_options(cfg);
  const std::vector<Image> gt = render_ground_truth(scene, rig, opts);

  AdamOptimizer opt(model.params(), cfg.lr);
  std::optional<AdamOptimizer> critic_opt;
  const bool inforeg = cfg.regularizer == RegKind::kInfoReg;
  if (inforeg) critic_opt.emplace(model.critic_params(), cfg.critic_lr);

  Rng rng(cfg.seed);
  TrainResult result;
  const std::int64_t n = cfg.samples_per_ray;
  const std::int64_t B = cfg.rays_per_batch;
  const std::int64_t reg_end = cfg.reg_end < 0 ? cfg.steps : cfg.reg_end;

  // regularizer weights of exactly zero skip the whole regularizer path,
  // RNG included, so the run is loss-identical to an unregularized one
  const bool reg_possible =
      cfg.regularizer != RegKind::kNone && !(cfg.gamma == 0.0 && cfg.epsilon == 0.0);

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    // sample a batch of rays that hit the unit cube
    std::vector<RayHit> hits;
    std::vector<SamplePositions> samples;
    std::vector<double> gt_colors;
    std::int64_t attempts = 0;
    while (static_cast<std::int64_t>(hits.size()) < B) {
      if (++attempts > B * 1000)
        throw std::runtime_error("train: cannot find rays hitting the scene");
      const std::int64_t v = rng.uniform_int(static_cast<std::int64_t>(rig.size()));
      const std::int64_t px = rng.uniform_int(rig.width);
      const std::int64_t py = rng.uniform_int(rig.height);
      const auto rays = make_rays(rig.camera(static_cast<std::size_t>(v)), {{px, py}},
                                  opts.near, opts.far);
      double tmin, tmax;
      if (!intersect_unit_cube(rays[0], &tmin, &tmax)) continue;
      Ray clipped = rays[0];
      clipped.near = tmin;
      clipped.far = tmax;
      hits.push_back({clipped, tmin, tmax});
      samples.push_back(stratified_sample(clipped, n, rng, true));
      for (int ch = 0; ch < 3; ++ch)
        gt_colors.push_back(gt[static_cast<std::size_t>(v)].at(py, px, ch));
    }

    Tensor points = points_along(hits, samples, n);
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(B * n));
    for (const auto& s : samples) deltas.insert(deltas.end(), s.delta.begin(), s.delta.end());

    Tape tape;
    Tape::Scope scope(tape);
    FieldQuery q = query_model(model, points);
    CompositeResult comp = composite(reshape(q.sigma, {B, n}), q.color, deltas);
    Tensor pred = apply_background(comp, cfg.background);
    Tensor target({B, 3}, gt_colors);
    Tensor diff = sub(pred, target);
    Tensor color_loss = mean(mul(diff, diff));
    Tensor total = color_loss;

    const bool reg_active = reg_possible && step >= cfg.reg_start && step < reg_end;
    Tensor mi_xs, mi_ys, mi_yneg;           // kept for the critic updates
    std::vector<double> mi_weights;
    if (reg_active) {
      const std::vector<double> w_all = comp.weights.values();
      double w_sum = 0.0;
      for (double w : w_all) w_sum += w;
      std::vector<double> w_use = w_all;
      if (w_sum <= 1e-12) w_use.assign(w_all.size(), 1.0);

      Tensor gauge_out;
      if (model.gauge_kind == GaugeKind::kDiscrete)
        gauge_out = *q.disc_feature;
      else if (q.gauge_2d)
        gauge_out = *q.gauge_2d;

      switch (cfg.regularizer) {
        case RegKind::kInfoReg: {
          const std::int64_t m_pairs = std::min<std::int64_t>(cfg.reg_points, B * n);
          std::vector<std::int64_t> idx(static_cast<std::size_t>(m_pairs));
          for (auto& i : idx) i = rng.uniform_int(B * n);
          std::vector<std::int64_t> idx_neg = idx;
          for (std::size_t i = idx_neg.size(); i > 1; --i)
            std::swap(idx_neg[i - 1], idx_neg[static_cast<std::size_t>(rng.uniform_int(
                                          static_cast<std::int64_t>(i)))]);
          mi_xs = gather(detach(points), idx);
          mi_ys = gather(gauge_out, idx);
          mi_yneg = gather(gauge_out, idx_neg);
          mi_weights.resize(idx.size());
          for (std::size_t i = 0; i < idx.size(); ++i)
            mi_weights[i] = w_use[static_cast<std::size_t>(idx[i])];
          double mw = 0.0;
          for (double w : mi_weights) mw += w;
          if (mw <= 1e-12) mi_weights.assign(mi_weights.size(), 1.0);
          Tensor bound = js_mi_bound(model.critic, mi_xs, mi_ys, mi_xs, mi_yneg, mi_weights);

          Tensor prior;
          if (model.gauge_kind == GaugeKind::kDiscrete) {
            prior = prior_discrete(concat(q.corner_soft, 0));
          } else {
            prior = prior_continuous(gauge_out, w_use, cfg.prior_samples, rng);
          }
          InfoRegConfig rc;
          rc.gamma = cfg.gamma;
          rc.epsilon = cfg.epsilon;
          total = add(total, inforeg_loss(bound, prior, rc));
          break;
        }
        case RegKind::kCycle: {
          const std::int64_t m_pairs = std::min<std::int64_t>(cfg.reg_points, B * n);
          std::vector<std::int64_t> idx(static_cast<std::size_t>(m_pairs));
          for (auto& i : idx) i = rng.uniform_int(B * n);
          Tensor x = gather(detach(points), idx);
          Tensor y = gather(gauge_out, idx);
          Tensor recon = model.inverse_net.forward(y);
          total = add(total, mul(cycle_loss(x, recon), cfg.gamma));
          break;
        }
        case RegKind::kStructural: {
          total = add(total, mul(structural_loss(model.cont_gauge, points), cfg.gamma));
          break;
        }
        case RegKind::kNone:
          break;
      }
    }

    const double loss_value = total.item();
    if (!std::isfinite(loss_value))
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    backward(total);
    opt.step();
    tape.clear();

    if (reg_active && cfg.regularizer == RegKind::kInfoReg) {
      Tensor xs = detach(mi_xs), ys = detach(mi_ys), yneg = detach(mi_yneg);
      for (int u = 0; u < cfg.critic_extra_updates; ++u) {
        Tape ctape;
        Tape::Scope cscope(ctape);
        Tensor bound = js_mi_bound(model.critic, xs, ys, xs, yneg, mi_weights);
        backward(neg(bound));
        critic_opt->step();
      }
    }

    if (cfg.metric_cadence > 0 &&
        (step % cfg.metric_cadence == 0 || step + 1 == cfg.steps)) {
      MetricRow row;
      row.step = step;
      row.loss = loss_value;
      const double mse = mean(mul(detach(diff), detach(diff))).item();
      row.psnr = -10.0 * std::log10(std::max(mse, 1e-10));
      if (model.gauge_kind == GaugeKind::kContinuous) {
        bool any = false;
        for (double w : comp.weights.values())
          if (w >= 0.01) {
            any = true;
            break;
          }
        if (any)
          row.occupancy = occupancy_metric(model.cont_gauge, detach(points),
                                           comp.weights.values());
      } else if (model.gauge_kind == GaugeKind::kDiscrete) {
        row.utilization = utilization_metric(model.disc_gauge);
      }
      result.metrics.push_back(row);
      if (on_metric) on_metric(model, row);
    }
  }
  result.rejected_steps = opt.rejected_steps();
  return result;
}

}  // namespace ngf
