#include "siv/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <thread>

#include "siv/log.hpp"

namespace siv {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "n_truth", "n_rec",     "T",           "tau",           "dt",           "nu",
      "lambda",  "seed",      "k0",          "k_min",         "k_max",        "deltas",
      "window_lo", "window_hi", "slope_split", "sample_stride", "max_cg_iters", "rel_tol"};
  return keys;
}

bool is_multiple(double a, double b) {
  const double r = a / b;
  return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r) && std::round(r) >= 1.0;
}

// Experiment norms are domain averages, ||f||^2 = (1/|Omega|) int f^2, so a
// unit velocity is an O(1) speed.
double velocity_norm(const SpectralField& ux, const SpectralField& uy) {
  return std::sqrt((inner_product(ux, ux) + inner_product(uy, uy)) / kDomainArea);
}

SpectralField draw_band(int n, std::mt19937_64& rng, const ExperimentConfig& cfg) {
  SpectralField out(n);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int K = static_cast<int>(std::floor(cfg.k_max));
  // Fixed traversal of the upper half plane so the draw is independent of n.
  for (int kx = 0; kx <= K; ++kx) {
    for (int ky = -K; ky <= K; ++ky) {
      if (kx == 0 && ky <= 0) continue;
      const double k = std::hypot(kx, ky);
      if (k < cfg.k_min || k > cfg.k_max) continue;
      const double theta = phase(rng);
      if (2 * kx >= n || 2 * std::abs(ky) >= n || !dealias_keeps(kx, ky, n)) continue;
      const double amp = k * std::exp(-(k / cfg.k0) * (k / cfg.k0));
      out.set_coeff(kx, ky, std::polar(amp, theta));
    }
  }
  return out;
}

std::pair<SpectralField, SpectralField> draw_velocity(int n, std::mt19937_64& rng, const ExperimentConfig& cfg) {
  SpectralField ux = draw_band(n, rng, cfg);
  SpectralField uy = draw_band(n, rng, cfg);
  leray_project_inplace(ux, uy);
  const double norm = velocity_norm(ux, uy);
  if (!(norm > 0.0)) throw Error("random velocity has no energy in the band on this grid");
  ux *= 1.0 / norm;
  uy *= 1.0 / norm;
  return {std::move(ux), std::move(uy)};
}

double squared_distance(const SpectralField& a, const SpectralField& b) {
  const SpectralField d = a - b;
  return inner_product(d, d) / kDomainArea;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_keyvalues(const KeyValues& kv) {
  for (const auto& [key, value] : kv.entries())
    if (!known_keys().count(key)) throw Error("unknown config key '" + key + "'");
  ExperimentConfig c;
  c.n_truth = static_cast<int>(kv.get_int("n_truth", c.n_truth));
  c.n_rec = static_cast<int>(kv.get_int("n_rec", c.n_rec));
  c.T = kv.get_double("T", c.T);
  c.tau = kv.get_double("tau", c.tau);
  c.dt = kv.get_double("dt", c.dt);
  c.nu = kv.get_double("nu", c.nu);
  c.lambda = kv.get_double("lambda", c.lambda);
  const long seed = kv.get_int("seed", static_cast<long>(c.seed));
  if (seed < 0) throw Error("seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.k0 = kv.get_double("k0", c.k0);
  c.k_min = kv.get_double("k_min", c.k_min);
  c.k_max = kv.get_double("k_max", c.k_max);
  if (kv.contains("deltas")) c.deltas = kv.get_doubles("deltas");
  c.window_lo = kv.get_double("window_lo", 0.75 * c.T);
  c.window_hi = kv.get_double("window_hi", c.T);
  c.slope_split = kv.get_double("slope_split", c.slope_split);
  c.sample_stride = static_cast<int>(kv.get_int("sample_stride", c.sample_stride));
  c.max_cg_iters = static_cast<int>(kv.get_int("max_cg_iters", c.max_cg_iters));
  c.rel_tol = kv.get_double("rel_tol", c.rel_tol);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_keyvalues(KeyValues::load(path));
}

KeyValues ExperimentConfig::to_keyvalues() const {
  KeyValues kv;
  kv.set("n_truth", n_truth);
  kv.set("n_rec", n_rec);
  kv.set("T", T);
  kv.set("tau", tau);
  kv.set("dt", dt);
  kv.set("nu", nu);
  kv.set("lambda", lambda);
  kv.set("seed", static_cast<long>(seed));
  kv.set("k0", k0);
  kv.set("k_min", k_min);
  kv.set("k_max", k_max);
  std::string list;
  for (std::size_t i = 0; i < deltas.size(); ++i) list += (i ? "," : "") + format_double(deltas[i]);
  kv.set("deltas", list);
  kv.set("window_lo", window_lo);
  kv.set("window_hi", window_hi);
  kv.set("slope_split", slope_split);
  kv.set("sample_stride", sample_stride);
  kv.set("max_cg_iters", max_cg_iters);
  kv.set("rel_tol", rel_tol);
  return kv;
}

void ExperimentConfig::validate() const {
  require_grid_size(n_truth);
  require_grid_size(n_rec);
  if (n_rec > n_truth) throw Error("n_rec must not exceed n_truth");
  if (!(dt > 0.0) || !(tau > 0.0) || !(T > 0.0)) throw Error("T, tau and dt must be positive");
  if (!is_multiple(tau, dt)) throw Error("tau must be an integer multiple of dt");
  if (!is_multiple(T, tau)) throw Error("T must be an integer multiple of tau");
  if (nu < 0.0 || lambda < 0.0) throw Error("nu and lambda must be nonnegative");
  if (!(k0 > 0.0) || !(k_min >= 0.0) || !(k_max >= k_min)) throw Error("invalid spectrum band");
  if (!(window_lo > 0.0 && window_lo < window_hi && window_hi <= T))
    throw Error("averaging window must satisfy 0 < window_lo < window_hi <= T");
  for (double d : deltas)
    if (!(d >= 0.0)) throw Error("perturbation magnitudes must be nonnegative");
  if (!(slope_split > 0.0)) throw Error("slope_split must be positive");
  if (sample_stride < 1) throw Error("sample_stride must be >= 1");
  optimizer().validate();
}

long ExperimentConfig::total_steps() const { return std::lround(T / dt); }
int ExperimentConfig::segment_steps() const { return static_cast<int>(std::lround(tau / dt)); }
int ExperimentConfig::segment_count() const { return static_cast<int>(std::lround(T / tau)); }

SegmentConfig ExperimentConfig::truth_segment() const {
  SegmentConfig s;
  s.t0 = 0.0;
  s.tau = T;
  s.dt = dt;
  s.nu = nu;
  s.lambda = lambda;
  s.n = n_truth;
  return s;
}

SegmentConfig ExperimentConfig::reconstruction_segment() const {
  SegmentConfig s;
  s.tau = tau;
  s.dt = dt;
  s.nu = nu;
  s.lambda = lambda;
  s.n = n_rec;
  return s;
}

OptimizerConfig ExperimentConfig::optimizer() const {
  OptimizerConfig o;
  o.max_cg_iters = max_cg_iters;
  o.rel_tol = rel_tol;
  return o;
}

// ---------------------------------------------------------------------------
// Initial conditions

SpectralField band_field(int n, std::uint64_t seed, const ExperimentConfig& cfg) {
  std::mt19937_64 rng(seed);
  return draw_band(n, rng, cfg);
}

FlowState initial_truth(const ExperimentConfig& cfg, int n) {
  std::mt19937_64 rng(cfg.seed);
  auto [ux, uy] = draw_velocity(n, rng, cfg);
  SpectralField psi = draw_band(n, rng, cfg);
  psi *= std::sqrt(kDomainArea) / l2_norm(psi);
  return {std::move(ux), std::move(uy), std::move(psi), 0.0};
}

FlowState perturb_velocity(const FlowState& base, double delta, std::uint64_t xi_seed, const ExperimentConfig& cfg) {
  std::mt19937_64 rng(xi_seed);
  const auto [xx, xy] = draw_velocity(base.n(), rng, cfg);
  const double v_norm = velocity_norm(base.ux, base.uy);
  FlowState out = base;
  out.ux.axpy(delta * v_norm, xx);
  out.uy.axpy(delta * v_norm, xy);
  const double scale = v_norm / velocity_norm(out.ux, out.uy);
  out.ux *= scale;
  out.uy *= scale;
  return out;
}

std::uint64_t perturbation_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index + 1), 0x5349u};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// Truth

void integrate_truth(const ExperimentConfig& cfg, TruthCursor cursor,
                     const std::function<void(const TruthCursor&)>& visit) {
  const SegmentConfig seg = cfg.truth_segment();
  const long total = cfg.total_steps();
  visit(cursor);
  while (cursor.step < total) {
    StepResult r = step(cursor.state, cursor.prev ? &*cursor.prev : nullptr, seg);
    ++cursor.step;
    r.state.time = static_cast<double>(cursor.step) * cfg.dt;
    if (!r.state.ux.is_finite() || !r.state.uy.is_finite() || !r.state.phi.is_finite())
      throw Error("truth integration produced non-finite values at step " + std::to_string(cursor.step));
    cursor.state = std::move(r.state);
    cursor.prev = std::move(r.advection);
    visit(cursor);
  }
}

TruthRecord record_truth(const ExperimentConfig& cfg, const FlowState& initial) {
  cfg.validate();
  if (initial.n() != cfg.n_truth) throw Error("record_truth: initial state is not on the truth grid");
  TruthRecord rec;
  rec.dt = cfg.dt;
  rec.stride = cfg.sample_stride;
  rec.psi.reserve(static_cast<std::size_t>(cfg.total_steps()) + 1);
  integrate_truth(cfg, TruthCursor{0, initial, std::nullopt}, [&](const TruthCursor& c) {
    rec.psi.push_back(truncate(c.state.phi, cfg.n_rec));
    if (c.step % cfg.sample_stride == 0) {
      rec.vx.push_back(truncate(c.state.ux, cfg.n_rec));
      rec.vy.push_back(truncate(c.state.uy, cfg.n_rec));
    }
  });
  return rec;
}

std::vector<Trajectory> measurement_segments(const ExperimentConfig& cfg, const TruthRecord& truth) {
  const int S = cfg.segment_steps();
  const int count = cfg.segment_count();
  if (truth.psi.size() != static_cast<std::size_t>(S) * count + 1)
    throw Error("measurement_segments: truth record does not cover the horizon");
  std::vector<Trajectory> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Trajectory& t = out[static_cast<std::size_t>(i)];
    t.dt = cfg.dt;
    t.states.reserve(static_cast<std::size_t>(S) + 1);
    for (int k = 0; k <= S; ++k) {
      const long s = static_cast<long>(i) * S + k;
      FlowState st;
      // Modes outside the dealiased band are never carried by the model;
      // comparing them would only add a control-independent offset to J.
      st.phi = dealiased(truth.psi[static_cast<std::size_t>(s)]);
      st.time = static_cast<double>(s) * cfg.dt;
      t.states.push_back(std::move(st));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Twin experiment

TwinResult evaluate_reconstruction(const ExperimentConfig& cfg, const TruthRecord& truth,
                                   std::vector<SegmentResult> segments) {
  const int S = cfg.segment_steps();
  const int count = static_cast<int>(segments.size());
  TwinResult out;
  SegmentConfig seg = cfg.reconstruction_segment();
  for (int i = 0; i < count; ++i) {
    seg.t0 = static_cast<double>(i) * S * cfg.dt;
    const bool last = i + 1 == cfg.segment_count();
    double sum = 0.0;
    int samples = 0;
    const Trajectory traj = run_forward(segments[static_cast<std::size_t>(i)].control, seg);
    for (int k = 0; k <= S; ++k) {
      if (k == S && !last) break;
      const long s = static_cast<long>(i) * S + k;
      if (s % truth.stride != 0) continue;
      const std::size_t idx = static_cast<std::size_t>(s / truth.stride);
      if (idx >= truth.vx.size()) break;
      const FlowState& st = traj.states[static_cast<std::size_t>(k)];
      const double eps = squared_distance(st.ux, truth.vx[idx]) + squared_distance(st.uy, truth.vy[idx]);
      out.times.push_back(static_cast<double>(s) * cfg.dt);
      out.epsilon.push_back(eps);
      out.ux.push_back(st.ux);
      out.uy.push_back(st.uy);
      sum += eps;
      ++samples;
    }
    out.segment_epsilon.push_back(samples ? sum / samples : std::numeric_limits<double>::quiet_NaN());
  }
  out.segments = std::move(segments);
  return out;
}

TwinResult twin_experiment(const ExperimentConfig& cfg, const TruthRecord& truth, const ReconstructOptions& options) {
  cfg.validate();
  if (options.first_segment != 0)
    throw Error("twin_experiment: resumed runs must be evaluated with evaluate_reconstruction");
  const std::vector<Trajectory> segments = measurement_segments(cfg, truth);
  std::vector<SegmentResult> results = reconstruct(segments, cfg.reconstruction_segment(), cfg.optimizer(), options);
  return evaluate_reconstruction(cfg, truth, std::move(results));
}

void write_epsilon_csv(std::ostream& os, const TwinResult& result) {
  os << "t,epsilon\n";
  for (std::size_t i = 0; i < result.times.size(); ++i)
    os << format_double(result.times[i]) << ',' << format_double(result.epsilon[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Stability sweep

StabilityRecord compare_experiments(const ExperimentConfig& cfg, const TruthRecord& a, const TwinResult& ra,
                                    const TruthRecord& b, const TwinResult& rb) {
  const auto in_window = [&](double t) { return t >= cfg.window_lo - 1e-12 && t <= cfg.window_hi + 1e-12; };
  StabilityRecord r;
  int count = 0;
  for (std::size_t s = 0; s < std::min(a.psi.size(), b.psi.size()); ++s) {
    if (!in_window(static_cast<double>(s) * cfg.dt)) continue;
    r.psi_diff_sq += squared_distance(a.psi[s], b.psi[s]);
    ++count;
  }
  if (count == 0) throw Error("averaging window contains no scalar samples");
  r.psi_diff_sq /= count;

  count = 0;
  const std::size_t m = std::min({ra.times.size(), rb.times.size()});
  for (std::size_t i = 0; i < m; ++i) {
    if (!in_window(ra.times[i])) continue;
    const std::size_t idx = static_cast<std::size_t>(std::lround(ra.times[i] / cfg.dt)) / a.stride;
    r.u_diff_sq += squared_distance(ra.ux[i], rb.ux[i]) + squared_distance(ra.uy[i], rb.uy[i]);
    r.v_diff_sq += squared_distance(a.vx[idx], b.vx[idx]) + squared_distance(a.vy[idx], b.vy[idx]);
    ++count;
  }
  if (count == 0) throw Error("averaging window contains no velocity samples");
  r.u_diff_sq /= count;
  r.v_diff_sq /= count;
  return r;
}

std::vector<SlopeFit> fit_slopes(const std::vector<StabilityRecord>& records, double split) {
  std::vector<SlopeFit> fits;
  for (const char* regime : {"lower", "upper"}) {
    const bool upper = std::string(regime) == "upper";
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& r : records) {
      if (r.failed || !(r.psi_diff_sq > 0.0) || !(r.u_diff_sq > 0.0)) continue;
      if ((r.psi_diff_sq >= split) != upper) continue;
      const double x = std::log10(r.psi_diff_sq), y = std::log10(r.u_diff_sq);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++m;
    }
    SlopeFit f{regime, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), m};
    const double det = m * sxx - sx * sx;
    if (m >= 2 && det > 0.0) {
      f.slope = (m * sxy - sx * sy) / det;
      f.intercept = (sy - f.slope * sx) / m;
    }
    fits.push_back(f);
  }
  return fits;
}

SweepResult stability_sweep(const ExperimentConfig& cfg, const SweepOptions& options) {
  cfg.validate();
  std::mutex report_mutex;
  const auto report = [&](const std::string& msg) {
    if (!options.progress) return;
    std::lock_guard lock(report_mutex);
    options.progress(msg);
  };

  SweepResult out;
  out.records.resize(cfg.deltas.size());
  std::vector<std::size_t> todo;
  for (std::size_t j = 0; j < cfg.deltas.size(); ++j) {
    std::optional<StabilityRecord> hit;
    if (options.cached) hit = options.cached(j);
    if (hit) {
      out.records[j] = *hit;
      out.records[j].delta = cfg.deltas[j];
      report("delta=" + format_double(cfg.deltas[j]) + " restored");
    } else {
      todo.push_back(j);
    }
  }

  if (!todo.empty()) {
    const FlowState initial = initial_truth(cfg, cfg.n_truth);
    const TruthRecord base_truth = record_truth(cfg, initial);
    out.baseline = twin_experiment(cfg, base_truth);
    report("baseline reconstruction finished");

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (std::size_t t = next++; t < todo.size(); t = next++) {
        const std::size_t j = todo[t];
        StabilityRecord rec;
        const double delta = cfg.deltas[j];
        try {
          const TruthRecord truth =
              record_truth(cfg, perturb_velocity(initial, delta, perturbation_seed(cfg.seed, j), cfg));
          const TwinResult twin = twin_experiment(cfg, truth);
          rec = compare_experiments(cfg, base_truth, out.baseline, truth, twin);
        } catch (const std::exception& e) {
          rec = StabilityRecord{};
          rec.failed = true;
          rec.failure = e.what();
          log::warn("sweep entry delta=" + format_double(delta) + " failed: " + e.what());
        }
        rec.delta = delta;
        out.records[j] = rec;
        std::lock_guard lock(report_mutex);
        if (options.on_record) options.on_record(j, rec);
        if (options.progress) options.progress("delta=" + format_double(delta) + " finished");
      }
    };

    const int pool = std::clamp(options.threads, 1, static_cast<int>(todo.size()));
    if (pool == 1) {
      worker();
    } else {
      std::vector<std::jthread> workers;
      for (int i = 0; i < pool; ++i) workers.emplace_back(worker);
    }
  }
  out.fits = fit_slopes(out.records, cfg.slope_split);
  return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<StabilityRecord>& records) {
  os << "delta,psi_diff_sq,u_diff_sq,v_diff_sq\n";
  for (const auto& r : records) {
    if (r.failed) {
      os << format_double(r.delta) << ",nan,nan,nan\n";
      continue;
    }
    os << format_double(r.delta) << ',' << format_double(r.psi_diff_sq) << ',' << format_double(r.u_diff_sq) << ','
       << format_double(r.v_diff_sq) << '\n';
  }
}

void write_slopes_csv(std::ostream& os, const std::vector<SlopeFit>& fits) {
  os << "regime,slope,intercept,npoints\n";
  for (const auto& f : fits)
    os << f.regime << ',' << format_double(f.slope) << ',' << format_double(f.intercept) << ',' << f.npoints << '\n';
}

int worker_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SIV_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<long>(n, cap);
    else log::warn(std::string("ignoring malformed SIV_THREADS='") + env + "'");
  }
  return n;
}

SpectralField stream_function(const SpectralField& ux, const SpectralField& uy) {
  SpectralField theta = derivative(uy, Axis::X) - derivative(ux, Axis::Y);
  for (int iky = 0; iky < theta.n(); ++iky) {
    const int ky = theta.ky_of(iky);
    for (int ikx = 0; ikx < theta.nkx(); ++ikx) {
      const int k2 = ikx * ikx + ky * ky;
      theta.at(ikx, iky) = k2 == 0 ? Complex{} : theta.at(ikx, iky) / static_cast<double>(k2);
    }
  }
  return theta;
}

// ---------------------------------------------------------------------------
// Gradient check

std::vector<GradientCheckRecord> gradient_check(const ExperimentConfig& cfg, const SegmentConfig& seg, int count,
                                                double fd_step) {
  seg.validate();
  const ControlVector truth = ControlVector::from_state(initial_truth(cfg, seg.n));
  const Trajectory measurement = run_forward(truth, seg);
  ExperimentConfig other = cfg;
  other.seed = perturbation_seed(cfg.seed, 1000);
  ControlVector control = ControlVector::from_state(initial_truth(other, seg.n));
  control.project();

  const GradientResult gr = gradient(control, seg, measurement);
  std::vector<GradientCheckRecord> out;
  for (int d = 0; d < count; ++d) {
    std::mt19937_64 rng(perturbation_seed(cfg.seed, 2000 + static_cast<std::size_t>(d)));
    auto [dx, dy] = draw_velocity(seg.n, rng, cfg);
    ControlVector dir{std::move(dx), std::move(dy), draw_band(seg.n, rng, cfg)};
    dir.project();
    dir *= 1.0 / norm(dir);

    GradientCheckRecord r;
    r.direction = d;
    r.adjoint = dot(gr.gradient, dir);
    ControlVector plus = control, minus = control;
    plus.axpy(fd_step, dir);
    minus.axpy(-fd_step, dir);
    r.finite_difference = (cost_of(plus, seg, measurement) - cost_of(minus, seg, measurement)) / (2.0 * fd_step);
    r.relative_error = std::abs(r.adjoint - r.finite_difference) / std::abs(r.finite_difference);
    out.push_back(r);
  }
  return out;
}

}  // namespace siv
