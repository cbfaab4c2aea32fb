#include "fignn/synthdata.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fignn/error.hpp"
#include "fignn/rng.hpp"

namespace fignn::data {

ad::Tensor Trajectory::snapshot(std::size_t t) const {
  if (t >= steps) throw IndexError("snapshot " + std::to_string(t) + " out of range [0," + std::to_string(steps) + ")");
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(t * nodes * features);
  return ad::Tensor::from({nodes, features}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(nodes * features)));
}

void Trajectory::validate() const {
  if (steps < 2) throw ConfigError("trajectory needs at least 2 snapshots, has " + std::to_string(steps));
  if (values.size() != steps * nodes * features) {
    throw ContractError("trajectory holds " + std::to_string(values.size()) + " values, shape implies " +
                        std::to_string(steps * nodes * features));
  }
  if (feature_names.size() != features) throw ContractError("trajectory feature_names size mismatch");
  if (normalization && normalization->size() != features) throw ContractError("normalization size mismatch");
}

DatasetSplit make_split(const Trajectory& t, double train_fraction, std::uint64_t seed) {
  t.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0,1)");
  const std::size_t pairs = t.steps - 1;
  auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pairs)));
  if (n_train == 0 || n_train == pairs) {
    throw ConfigError("split of " + std::to_string(pairs) + " pairs leaves an empty train or test set");
  }
  return DatasetSplit{0, n_train, n_train, pairs, seed};
}

// ---- advection-diffusion ---------------------------------------------------

std::vector<graph::Point> grid_coords(std::size_t width, std::size_t height, double dx) {
  std::vector<graph::Point> pts;
  pts.reserve(width * height);
  for (std::size_t iy = 0; iy < height; ++iy)
    for (std::size_t ix = 0; ix < width; ++ix)
      pts.push_back({static_cast<double>(ix) * dx, static_cast<double>(iy) * dx});
  return pts;
}

AdvectionConfig resolve_advection(AdvectionConfig cfg, std::uint64_t seed) {
  if (cfg.width < 4 || cfg.height < 4) throw ConfigError("advection grid must be at least 4x4");
  if (cfg.steps < 2) throw ConfigError("advection needs at least 2 steps");
  if (cfg.n_features == 0) throw ConfigError("advection needs at least one feature");
  if (!(cfg.dt > 0.0) || !(cfg.dx > 0.0)) throw ConfigError("dt and dx must be positive");
  CounterRng rng(seed, stream_id("advection.params"));
  if (cfg.velocity.empty()) {
    for (std::size_t c = 0; c < cfg.n_features; ++c) {
      const double vx = rng.uniform(-0.2, 0.2) * cfg.dx / cfg.dt;
      const double vy = rng.uniform(-0.2, 0.2) * cfg.dx / cfg.dt;
      cfg.velocity.emplace_back(vx, vy);
    }
  }
  if (cfg.diffusivity.empty()) {
    for (std::size_t c = 0; c < cfg.n_features; ++c)
      cfg.diffusivity.push_back(rng.uniform(0.005, 0.03) * cfg.dx * cfg.dx / cfg.dt);
  }
  if (cfg.velocity.size() != cfg.n_features || cfg.diffusivity.size() != cfg.n_features) {
    throw ConfigError("advection: velocity/diffusivity overrides must list one entry per feature");
  }
  for (std::size_t c = 0; c < cfg.n_features; ++c) {
    const auto [vx, vy] = cfg.velocity[c];
    const double courant = std::sqrt(vx * vx + vy * vy) * cfg.dt / cfg.dx;
    const double fourier = cfg.diffusivity[c] * cfg.dt / (cfg.dx * cfg.dx);
    if (courant > 0.5) {
      throw ConfigError("advection: channel " + std::to_string(c) + " violates |v|dt/dx <= 0.5 (" +
                        std::to_string(courant) + ")");
    }
    if (fourier > 0.2 || cfg.diffusivity[c] < 0.0) {
      throw ConfigError("advection: channel " + std::to_string(c) + " violates 0 <= kappa dt/dx^2 <= 0.2 (" +
                        std::to_string(fourier) + ")");
    }
    // Monotonicity of the explicit upwind update.
    const double combined = (std::abs(vx) + std::abs(vy)) * cfg.dt / cfg.dx + 4.0 * fourier + cfg.coupling * cfg.dt;
    if (combined > 1.0) {
      throw ConfigError("advection: channel " + std::to_string(c) + " explicit update is not monotone (" +
                        std::to_string(combined) + " > 1)");
    }
  }
  if (cfg.coupling < 0.0) throw ConfigError("advection: coupling must be non-negative");
  return cfg;
}

Trajectory gen_advection_diffusion(const AdvectionConfig& in, std::uint64_t seed) {
  const AdvectionConfig cfg = resolve_advection(in, seed);
  const std::size_t w = cfg.width, h = cfg.height, n = w * h, nf = cfg.n_features;
  Trajectory t;
  t.steps = cfg.steps;
  t.nodes = n;
  t.features = nf;
  t.dt = cfg.dt;
  static const char* kNames[] = {"T", "q", "u500", "v500"};
  for (std::size_t c = 0; c < nf; ++c) t.feature_names.push_back(c < 4 ? kNames[c] : "c" + std::to_string(c));
  t.values.assign(t.steps * n * nf, 0.0);

  std::vector<double> cur(n * nf, 0.0);
  if (!cfg.initial.empty()) {
    if (cfg.initial.size() != n * nf) throw ConfigError("advection: initial field must hold N*F values");
    cur = cfg.initial;
  } else {
    CounterRng rng(seed, stream_id("advection.initial"));
    const double lx = static_cast<double>(w) * cfg.dx, ly = static_cast<double>(h) * cfg.dx;
    static const double kOffset[] = {5.0, 0.5, 0.0, 0.0};
    static const double kScale[] = {3.0, 0.2, 1.0, 1.0};
    for (std::size_t c = 0; c < nf; ++c) {
      const double off = c < 4 ? kOffset[c] : 0.0;
      const double sc = c < 4 ? kScale[c] : 1.0;
      for (std::size_t i = 0; i < n; ++i) cur[i * nf + c] = off;
      for (std::size_t m = 0; m < cfg.modes; ++m) {
        const auto kx = static_cast<double>(rng.integer(1, 3));
        const auto ky = static_cast<double>(rng.integer(0, 2));
        const double amp = sc * rng.uniform(0.5, 1.5) / std::sqrt(kx * kx + ky * ky);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t iy = 0; iy < h; ++iy) {
          for (std::size_t ix = 0; ix < w; ++ix) {
            const double x = static_cast<double>(ix) * cfg.dx, y = static_cast<double>(iy) * cfg.dx;
            const double arg = 2.0 * std::numbers::pi * (kx * x / lx + ky * y / ly) + phase;
            cur[(iy * w + ix) * nf + c] += amp * std::sin(arg);
          }
        }
      }
    }
  }

  std::vector<double> next(n * nf);
  auto idx = [w, nf](std::size_t ix, std::size_t iy, std::size_t c) { return (iy * w + ix) * nf + c; };
  const double inv_dx = 1.0 / cfg.dx, inv_dx2 = inv_dx * inv_dx;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::copy(cur.begin(), cur.end(), t.values.begin() + static_cast<std::ptrdiff_t>(step * n * nf));
    if (step + 1 == cfg.steps) break;
    for (std::size_t iy = 0; iy < h; ++iy) {
      const std::size_t ym = (iy + h - 1) % h, yp = (iy + 1) % h;
      for (std::size_t ix = 0; ix < w; ++ix) {
        const std::size_t xm = (ix + w - 1) % w, xp = (ix + 1) % w;
        for (std::size_t c = 0; c < nf; ++c) {
          const double q = cur[idx(ix, iy, c)];
          const double qxm = cur[idx(xm, iy, c)], qxp = cur[idx(xp, iy, c)];
          const double qym = cur[idx(ix, ym, c)], qyp = cur[idx(ix, yp, c)];
          const auto [vx, vy] = cfg.velocity[c];
          const double dqdx = vx > 0 ? (q - qxm) * inv_dx : (qxp - q) * inv_dx;
          const double dqdy = vy > 0 ? (q - qym) * inv_dx : (qyp - q) * inv_dx;
          const double lap = (qxm + qxp + qym + qyp - 4.0 * q) * inv_dx2;
          const double other = cur[idx(ix, iy, (c + 1) % nf)];
          const double rate = -(vx * dqdx + vy * dqdy) + cfg.diffusivity[c] * lap + cfg.coupling * (other - q);
          next[idx(ix, iy, c)] = q + cfg.dt * rate;
        }
      }
    }
    std::swap(cur, next);
  }
  return t;
}

// ---- vortices --------------------------------------------------------------

VortexConfig resolve_vortices(VortexConfig cfg, std::uint64_t seed) {
  if (cfg.steps < 2) throw ConfigError("vortex field needs at least 2 steps");
  if (!(cfg.domain_x > 0.0)) throw ConfigError("vortex domain_x must be positive");
  if (!cfg.vortices) {
    CounterRng rng(seed, stream_id("vortex.params"));
    const auto count = static_cast<std::size_t>(rng.integer(3, 6));
    std::vector<Vortex> vs;
    for (std::size_t v = 0; v < count; ++v) {
      Vortex vx;
      vx.x0 = rng.uniform(0.0, cfg.domain_x);
      vx.y0 = rng.uniform(4.0, 16.0);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      vx.amplitude = sign * rng.uniform(1.0, 3.0);
      vx.radius = rng.uniform(2.0, 4.0);
      vs.push_back(vx);
    }
    cfg.vortices = std::move(vs);
  }
  return cfg;
}

std::pair<double, double> vortex_velocity(const VortexConfig& cfg, double t, double x, double y) {
  double ux = cfg.stream_u, uy = 0.0;
  const double shift = cfg.advect ? cfg.stream_u * t * cfg.dt : 0.0;
  for (const auto& v : *cfg.vortices) {
    double xc = std::fmod(v.x0 + shift, cfg.domain_x);
    if (xc < 0) xc += cfg.domain_x;
    const double r2 = v.radius * v.radius;
    for (int image = -1; image <= 1; ++image) {
      const double dx = x - (xc + image * cfg.domain_x);
      const double dy = y - v.y0;
      const double e = std::exp(-(dx * dx + dy * dy) / r2);
      // psi = A exp(-r^2/R^2); u = (d psi/dy, -d psi/dx)
      ux += -2.0 * v.amplitude * dy / r2 * e;
      uy += 2.0 * v.amplitude * dx / r2 * e;
    }
  }
  return {ux, uy};
}

Trajectory gen_vortex_field(const std::vector<graph::Point>& points, const VortexConfig& in, std::uint64_t seed) {
  if (points.size() < 16) throw ConfigError("vortex field needs at least 16 points, got " + std::to_string(points.size()));
  const VortexConfig cfg = resolve_vortices(in, seed);
  Trajectory t;
  t.steps = cfg.steps;
  t.nodes = points.size();
  t.features = 2;
  t.dt = cfg.dt;
  t.feature_names = {"u_x", "u_y"};
  t.values.resize(t.steps * t.nodes * 2);
  for (std::size_t s = 0; s < t.steps; ++s) {
    for (std::size_t i = 0; i < t.nodes; ++i) {
      const auto [ux, uy] = vortex_velocity(cfg, static_cast<double>(s), points[i][0], points[i][1]);
      t.at(s, i, 0) = ux;
      t.at(s, i, 1) = uy;
    }
  }
  return t;
}

Mesh jittered_mesh(std::size_t nx, std::size_t ny, double jitter, std::uint64_t seed) {
  if (nx < 2 || ny < 2) throw ConfigError("jittered_mesh needs at least 2x2 cells");
  CounterRng rng(seed, stream_id("mesh.jitter"));
  Mesh m;
  m.centroids.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i) + 0.5 + jitter * rng.uniform(-0.5, 0.5);
      const double y = static_cast<double>(j) + 0.5 + jitter * rng.uniform(-0.5, 0.5);
      m.centroids.push_back({x, y});
    }
  }
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t c = j * nx + i;
      if (i + 1 < nx) m.faces.emplace_back(c, c + 1);
      if (j + 1 < ny) m.faces.emplace_back(c, c + nx);
    }
  }
  return m;
}

// ---- normalisation ---------------------------------------------------------

Trajectory normalize(const Trajectory& t, const DatasetSplit& split) {
  t.validate();
  if (t.normalization) throw ContractError("normalize: trajectory is already normalized");
  if (split.train_end > t.steps || split.train_begin >= split.train_end) {
    throw ConfigError("normalize: split does not fit the trajectory");
  }
  std::vector<ChannelStats> stats(t.features);
  const auto count = static_cast<double>((split.train_end - split.train_begin) * t.nodes);
  for (std::size_t f = 0; f < t.features; ++f) {
    double s = 0.0;
    for (std::size_t step = split.train_begin; step < split.train_end; ++step)
      for (std::size_t i = 0; i < t.nodes; ++i) s += t.at(step, i, f);
    const double mean = s / count;
    double ss = 0.0;
    for (std::size_t step = split.train_begin; step < split.train_end; ++step)
      for (std::size_t i = 0; i < t.nodes; ++i) {
        const double d = t.at(step, i, f) - mean;
        ss += d * d;
      }
    const double sd = std::sqrt(ss / count);
    if (!(sd > 1e-12)) {
      throw ConfigError("normalize: channel '" + t.feature_names[f] + "' is constant over the train split");
    }
    stats[f] = {mean, sd};
  }
  Trajectory out = t;
  for (std::size_t step = 0; step < t.steps; ++step)
    for (std::size_t i = 0; i < t.nodes; ++i)
      for (std::size_t f = 0; f < t.features; ++f) out.at(step, i, f) = (t.at(step, i, f) - stats[f].mean) / stats[f].std;
  out.normalization = std::move(stats);
  return out;
}

Trajectory denormalize(const Trajectory& t) {
  if (!t.normalization) throw ContractError("denormalize: trajectory is not normalized");
  Trajectory out = t;
  const auto& stats = *t.normalization;
  for (std::size_t step = 0; step < t.steps; ++step)
    for (std::size_t i = 0; i < t.nodes; ++i)
      for (std::size_t f = 0; f < t.features; ++f) out.at(step, i, f) = t.at(step, i, f) * stats[f].std + stats[f].mean;
  out.normalization.reset();
  return out;
}

}  // namespace fignn::data
