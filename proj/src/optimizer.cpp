#include "siv/optimizer.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "siv/keyvalue.hpp"
#include "siv/log.hpp"

namespace siv {

void OptimizerConfig::validate() const {
  if (!(rel_tol > 0.0)) throw Error("rel_tol must be positive");
  if (max_cg_iters < 1) throw Error("max_cg_iters must be >= 1");
  if (!(brent_tol > 0.0)) throw Error("brent_tol must be positive");
  if (!(bracket_step > 0.0)) throw Error("bracket_step must be positive");
  if (max_line_evals < 3) throw Error("max_line_evals must be >= 3");
}

namespace {

constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt 5) / 2
constexpr double kTiny = 1e-12;

// Counts evaluations and tracks the best point seen.
class LineProbe {
 public:
  LineProbe(const std::function<double(double)>& f, int budget) : f_(f), budget_(budget) {}

  double operator()(double x) {
    ++count_;
    double v = f_(x);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    if (v < best_value_ || count_ == 1) {
      best_value_ = v;
      best_x_ = x;
    }
    return v;
  }
  bool exhausted() const { return count_ >= budget_; }
  int count() const { return count_; }
  double best_x() const { return best_x_; }
  double best_value() const { return best_value_; }

 private:
  const std::function<double(double)>& f_;
  int budget_;
  int count_ = 0;
  double best_x_ = 0.0;
  double best_value_ = std::numeric_limits<double>::infinity();
};

// Brent's method on the bracket a < x < b with f(x) below both ends.
void brent_refine(LineProbe& probe, double a, double b, double x, double fx, double tol) {
  double w = x, v = x, fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  while (!probe.exhausted()) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + kTiny;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) return;

    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = probe(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
}

}  // namespace

LineSearchResult brent_minimize(const std::function<double(double)>& line_cost, const OptimizerConfig& cfg) {
  cfg.validate();
  LineProbe probe(line_cost, cfg.max_line_evals);
  const double f0 = probe(0.0);
  if (!std::isfinite(f0)) throw Error("brent_minimize: line cost at 0 is not finite");

  LineSearchResult out;
  double lo = 0.0, mid = cfg.bracket_step, hi = 0.0;
  double fmid = probe(mid);
  if (fmid < f0) {
    // Expand until the cost turns up.
    for (;;) {
      if (probe.exhausted()) break;
      hi = 2.0 * mid;
      const double fhi = probe(hi);
      if (fhi >= fmid) {
        out.bracketed = true;
        break;
      }
      lo = mid;
      mid = hi;
      fmid = fhi;
    }
  } else {
    // Shrink towards 0 until something beats f(0).
    hi = mid;
    for (;;) {
      if (probe.exhausted()) break;
      mid = 0.5 * hi;
      fmid = probe(mid);
      if (fmid < f0) {
        out.bracketed = true;
        break;
      }
      hi = mid;
    }
  }

  if (out.bracketed) {
    brent_refine(probe, lo, hi, mid, fmid, cfg.brent_tol);
  } else if (probe.best_value() < f0) {
    log::warn("brent_minimize: no bracket within " + std::to_string(cfg.max_line_evals) +
              " evaluations, returning best sample");
  }

  if (probe.best_value() < f0) {
    out.step = probe.best_x();
    out.value = probe.best_value();
  } else {
    out.step = 0.0;
    out.value = f0;
  }
  out.evaluations = probe.count();
  return out;
}

SegmentResult minimize_segment(const ControlVector& guess, const Trajectory& measurement, const SegmentConfig& seg,
                               const OptimizerConfig& opt) {
  opt.validate();
  seg.validate();
  if (measurement.size() != static_cast<std::size_t>(seg.steps()) + 1 ||
      std::abs(measurement.front().time - seg.t0) > 1e-9)
    throw Error("minimize_segment: measurement does not cover the segment");

  SegmentResult result;
  result.control = guess;
  result.control.project();

  auto check_finite = [&](double J, const char* where) {
    if (!std::isfinite(J)) throw Error(std::string("minimize_segment: non-finite cost during ") + where);
  };

  GradientResult gr = gradient(result.control, seg, measurement);
  check_finite(gr.cost, "gradient evaluation");
  result.iterations = 1;
  result.initial_cost = gr.cost;
  double J = gr.cost;
  result.cost_history.push_back(J);
  result.log.push_back({0, J, norm(gr.gradient), 0.0});

  const double floor = opt.cost_floor * J;
  Gradient g = gr.gradient;
  Gradient g_old;
  ControlVector h_old;
  bool have_history = false;

  while (result.iterations < opt.max_cg_iters) {
    if (J <= floor || J == 0.0) break;
    const double gnorm = norm(g);
    if (gnorm == 0.0) break;

    ControlVector h;
    const bool steepest = !have_history || opt.steepest_descent;
    if (steepest) {
      h = -g;
      h.project();
    } else {
      h = pr_direction(g, g_old, h_old);
      if (dot(h, g) >= 0.0) {
        h = -g;  // not a descent direction: restart
        h.project();
      }
    }
    const double hnorm = norm(h);
    if (hnorm == 0.0) break;
    const ControlVector dir = (1.0 / hnorm) * h;

    const double J0 = J;
    auto line_cost = [&](double alpha) {
      if (alpha == 0.0) return J0;
      ControlVector trial = result.control;
      trial.axpy(alpha, dir);
      trial.project();
      return cost_of(trial, seg, measurement);
    };
    const LineSearchResult ls = brent_minimize(line_cost, opt);

    if (ls.step == 0.0) {
      // No decrease along h. Retry once along -g, otherwise stop.
      if (steepest) break;
      have_history = false;
      continue;
    }
    result.control.axpy(ls.step, dir);
    result.control.project();

    g_old = std::move(g);
    h_old = std::move(h);
    have_history = true;
    gr = gradient(result.control, seg, measurement);
    check_finite(gr.cost, "gradient evaluation");
    ++result.iterations;
    g = gr.gradient;
    const double J_new = gr.cost;
    result.cost_history.push_back(J_new);
    result.log.push_back({result.iterations - 1, J_new, norm(g), ls.step});

    const double rel = std::abs(J0 - J_new) / J0;
    J = J_new;
    if (rel < opt.rel_tol) break;
  }
  result.final_cost = J;
  return result;
}

SegmentConfig segment_config_for(const Trajectory& measurement, const SegmentConfig& base) {
  if (measurement.size() < 2) throw Error("measurement segment needs at least two time levels");
  SegmentConfig cfg = base;
  cfg.dt = measurement.dt;
  cfg.t0 = measurement.front().time;
  cfg.tau = measurement.back().time - cfg.t0;
  cfg.n = measurement.front().n();
  // Snap tau to an exact multiple of dt.
  cfg.tau = static_cast<double>(measurement.size() - 1) * cfg.dt;
  return cfg;
}

std::vector<SegmentResult> reconstruct(const std::vector<Trajectory>& segments, const SegmentConfig& base,
                                       const OptimizerConfig& opt, const ReconstructOptions& options) {
  std::vector<SegmentResult> results;
  if (options.first_segment >= segments.size()) return results;
  const int n = segments.front().front().n();
  ControlVector guess = options.initial_guess ? *options.initial_guess : ControlVector::zero(n);

  for (std::size_t i = options.first_segment; i < segments.size(); ++i) {
    const SegmentConfig seg = segment_config_for(segments[i], base);
    if (i > options.first_segment) {
      const double expected = segments[i - 1].back().time;
      if (std::abs(seg.t0 - expected) > 1e-9)
        throw Error("reconstruct: segments do not tile the horizon at segment " + std::to_string(i));
    }
    SegmentResult r;
    try {
      r = minimize_segment(guess, segments[i], seg, opt);
    } catch (const Error& e) {
      if (!options.continue_on_failure) throw;
      r.control = guess;
      r.failed = true;
      r.failure = e.what();
      log::warn("segment " + std::to_string(i) + " failed: " + e.what());
    }
    if (options.on_segment) options.on_segment(i, r);
    guess = ControlVector::from_state(propagate(r.control, seg));
    results.push_back(std::move(r));
  }
  return results;
}

void write_convergence_csv(std::ostream& os, const std::vector<SegmentResult>& results, std::size_t first_segment) {
  os << "segment,iter,cost,grad_norm,step\n";
  for (std::size_t s = 0; s < results.size(); ++s)
    for (const auto& rec : results[s].log)
      os << (first_segment + s) << ',' << rec.iter << ',' << format_double(rec.cost) << ','
         << format_double(rec.grad_norm) << ',' << format_double(rec.step) << '\n';
}

}  // namespace siv
