#include "ngf/render.hpp"

#include <cmath>
#include <stdexcept>

namespace ngf {

std::vector<Ray> make_rays(const Camera& cam,
                           const std::vector<std::pair<std::int64_t, std::int64_t>>& pixels,
                           double near, double far) {
  if (cam.focal <= 0.0) throw std::invalid_argument("make_rays: focal must be positive");
  if (!(near >= 0.0 && near < far))
    throw std::invalid_argument("make_rays: need 0 <= near < far");
  double rot_norm = 0.0;
  for (double v : cam.rotation) rot_norm += v * v;
  if (rot_norm < 1e-12) throw std::invalid_argument("make_rays: degenerate pose");

  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  const double cx = static_cast<double>(cam.width) * 0.5;
  const double cy = static_cast<double>(cam.height) * 0.5;
  for (const auto& [px, py] : pixels) {
    const double dx = (static_cast<double>(px) + 0.5 - cx) / cam.focal;
    const double dy = (cy - (static_cast<double>(py) + 0.5)) / cam.focal;
    const double dz = -1.0;
    std::array<double, 3> d{};
    for (int r = 0; r < 3; ++r)
      d[static_cast<std::size_t>(r)] = cam.rotation[static_cast<std::size_t>(r * 3)] * dx +
                                       cam.rotation[static_cast<std::size_t>(r * 3 + 1)] * dy +
                                       cam.rotation[static_cast<std::size_t>(r * 3 + 2)] * dz;
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    Ray ray;
    ray.origin = cam.translation;
    ray.direction = {d[0] / norm, d[1] / norm, d[2] / norm};
    ray.near = near;
    ray.far = far;
    rays.push_back(ray);
  }
  return rays;
}

SamplePositions stratified_sample(const Ray& ray, std::int64_t n, Rng& rng, bool jitter) {
  if (n < 1) throw std::invalid_argument("stratified_sample: n must be >= 1");
  SamplePositions s;
  s.t.resize(static_cast<std::size_t>(n));
  s.delta.resize(static_cast<std::size_t>(n));
  const double span = (ray.far - ray.near) / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = jitter ? rng.uniform() : 0.5;
    s.t[static_cast<std::size_t>(i)] = ray.near + (static_cast<double>(i) + u) * span;
  }
  for (std::int64_t i = 0; i + 1 < n; ++i)
    s.delta[static_cast<std::size_t>(i)] =
        s.t[static_cast<std::size_t>(i + 1)] - s.t[static_cast<std::size_t>(i)];
  s.delta[static_cast<std::size_t>(n - 1)] = ray.far - s.t[static_cast<std::size_t>(n - 1)];
  return s;
}

CompositeResult composite(const Tensor& sigma, const Tensor& radiance,
                          const std::vector<double>& delta) {
  if (sigma.rank() != 2)
    throw std::invalid_argument("composite: sigma must be B x n, got " +
                                shape_str(sigma.shape()));
  const std::int64_t batch = sigma.dim(0), n = sigma.dim(1);
  if (radiance.rank() != 2 || radiance.dim(1) != 3 || radiance.dim(0) != batch * n)
    throw std::invalid_argument("composite: radiance must be (B*n) x 3");
  if (static_cast<std::int64_t>(delta.size()) != batch * n)
    throw std::invalid_argument("composite: delta length does not match samples");
  for (double v : sigma.values())
    if (v < 0.0) throw std::invalid_argument("composite: negative density");
  for (double v : delta)
    if (v <= 0.0) throw std::invalid_argument("composite: non-positive interval");

  std::vector<double> color(static_cast<std::size_t>(batch) * 3, 0.0);
  std::vector<double> weights(static_cast<std::size_t>(batch * n));
  std::vector<double> final_t(static_cast<std::size_t>(batch));
  for (std::int64_t r = 0; r < batch; ++r) {
    double log_t = 0.0;  // -sum sd so far
    for (std::int64_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(r * n + i);
      const double sd = sigma.values()[idx] * delta[idx];
      const double t_i = std::exp(log_t);
      const double alpha = 1.0 - std::exp(-sd);
      const double w = t_i * alpha;
      weights[idx] = w;
      for (int ch = 0; ch < 3; ++ch)
        color[static_cast<std::size_t>(r * 3 + ch)] +=
            w * radiance.values()[idx * 3 + static_cast<std::size_t>(ch)];
      log_t -= sd;
    }
    final_t[static_cast<std::size_t>(r)] = std::exp(log_t);
  }

  CompositeResult res;
  res.color = Tensor({batch, 3}, std::move(color));
  res.weights = Tensor({batch, n}, std::move(weights));
  res.final_t = Tensor({batch}, std::move(final_t));

  if (Tape::active() && (sigma.requires_grad() || radiance.requires_grad())) {
    res.color.set_requires_grad(true);
    res.weights.set_requires_grad(true);
    res.final_t.set_requires_grad(true);
    auto sd_ = sigma.data();
    auto cd_ = radiance.data();
    auto col_ = res.color.data();
    auto w_ = res.weights.data();
    auto t_ = res.final_t.data();
    Tape::active()->record([sd_, cd_, col_, w_, t_, delta, batch, n]() {
      const bool has_col = !col_->grad.empty();
      const bool has_w = !w_->grad.empty();
      const bool has_t = !t_->grad.empty();
      if (!has_col && !has_w && !has_t) return;
      if (sd_->requires_grad) sd_->ensure_grad();
      if (cd_->requires_grad) cd_->ensure_grad();
      for (std::int64_t r = 0; r < batch; ++r) {
        const double gT = has_t ? t_->grad[static_cast<std::size_t>(r)] : 0.0;
        const double t_final = t_->values[static_cast<std::size_t>(r)];
        const double* gI = has_col ? col_->grad.data() + r * 3 : nullptr;

        if (cd_->requires_grad && has_col) {
          for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(r * n + i);
            const double w = w_->values[idx];
            for (int ch = 0; ch < 3; ++ch)
              cd_->grad[idx * 3 + static_cast<std::size_t>(ch)] +=
                  w * gI[static_cast<std::size_t>(ch)];
          }
        }

        if (!sd_->requires_grad) continue;
        // T_i recomputed on the fly; suffix accumulates the effect of sd_i
        // on every later weight (dw_j/dsd_i = -w_j for j > i).
        double suffix = 0.0;
        std::vector<double> dsd(static_cast<std::size_t>(n));
        // first pass forward to get T_i
        std::vector<double> t_vals(static_cast<std::size_t>(n));
        double log_t = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
          const std::size_t idx = static_cast<std::size_t>(r * n + i);
          t_vals[static_cast<std::size_t>(i)] = std::exp(log_t);
          log_t -= sd_->values[idx] * delta[idx];
        }
        for (std::int64_t i = n - 1; i >= 0; --i) {
          const std::size_t idx = static_cast<std::size_t>(r * n + i);
          const double w = w_->values[idx];
          const double t_i = t_vals[static_cast<std::size_t>(i)];
          double own = 0.0;
          if (has_w) own += w_->grad[idx] * (t_i - w);
          if (has_col)
            for (int ch = 0; ch < 3; ++ch)
              own += gI[static_cast<std::size_t>(ch)] *
                     cd_->values[idx * 3 + static_cast<std::size_t>(ch)] * (t_i - w);
          dsd[static_cast<std::size_t>(i)] = own - suffix - gT * t_final;
          // accumulate this sample's contribution for earlier samples
          double contrib = 0.0;
          if (has_w) contrib += w_->grad[idx] * w;
          if (has_col)
            for (int ch = 0; ch < 3; ++ch)
              contrib += gI[static_cast<std::size_t>(ch)] *
                         cd_->values[idx * 3 + static_cast<std::size_t>(ch)] * w;
          suffix += contrib;
        }
        for (std::int64_t i = 0; i < n; ++i) {
          const std::size_t idx = static_cast<std::size_t>(r * n + i);
          sd_->grad[idx] += dsd[static_cast<std::size_t>(i)] * delta[idx];
        }
      }
    });
  }
  return res;
}

Tensor apply_background(const CompositeResult& comp, const std::array<double, 3>& background) {
  const std::int64_t batch = comp.color.dim(0);
  std::vector<double> bg(static_cast<std::size_t>(batch) * 3);
  for (std::int64_t r = 0; r < batch; ++r)
    for (int ch = 0; ch < 3; ++ch)
      bg[static_cast<std::size_t>(r * 3 + ch)] = background[static_cast<std::size_t>(ch)];
  return add(comp.color, scale_rows(Tensor({batch, 3}, std::move(bg)), comp.final_t));
}

double psnr(const std::vector<double>& image, const std::vector<double>& reference) {
  if (image.size() != reference.size() || image.empty())
    throw std::invalid_argument("psnr: image sizes differ (" + std::to_string(image.size()) +
                                " vs " + std::to_string(reference.size()) + ")");
  double mse = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double d = image[i] - reference[i];
    mse += d * d;
  }
  mse /= static_cast<double>(image.size());
  return -10.0 * std::log10(std::max(mse, 1e-10));
}

}  // namespace ngf
