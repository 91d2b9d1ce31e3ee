#pragma once

#include <algorithm>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "siv/adjoint.hpp"

namespace siv {

struct OptimizerConfig {
  /// Stop once |J_k - J_{k-1}| / J_{k-1} drops below this.
  double rel_tol = 0.01;
  int max_cg_iters = 30;
  /// Fractional tolerance on the line-search abscissa.
  double brent_tol = 1e-2;
  /// First trial step along the unit search direction.
  double bracket_step = 1.0;
  /// Cap on line-cost evaluations per line search (bracketing included).
  int max_line_evals = 20;
  /// Treat J <= cost_floor * J_initial as converged.
  double cost_floor = 1e-12;
  /// Forces beta = 0, i.e. steepest descent.
  bool steepest_descent = false;

  void validate() const;
};

/// PR+ update: beta = max(0, <g_new, g_new - g_old> / <g_old, g_old>),
/// h = -g_new + beta h_old. Falls back to -g_new when g_old vanishes.
template <class Vec, class Dot>
Vec pr_direction(const Vec& g_new, const Vec& g_old, const Vec& h_old, Dot&& inner, double* beta_out = nullptr) {
  const double denom = inner(g_old, g_old);
  double beta = 0.0;
  if (denom > 0.0) beta = std::max(0.0, (inner(g_new, g_new) - inner(g_new, g_old)) / denom);
  if (beta_out != nullptr) *beta_out = beta;
  Vec h = -1.0 * g_new;
  if (beta != 0.0) h = h + beta * h_old;
  return h;
}

inline ControlVector pr_direction(const ControlVector& g_new, const ControlVector& g_old,
                                  const ControlVector& h_old, double* beta_out = nullptr) {
  ControlVector h = pr_direction(g_new, g_old, h_old,
                                 [](const ControlVector& a, const ControlVector& b) { return dot(a, b); }, beta_out);
  h.project();
  return h;
}

struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;
  int evaluations = 0;
  bool bracketed = false;
};

/// Brackets a minimum of line_cost on [0, inf) by halving or doubling from
/// cfg.bracket_step, then refines with Brent's parabolic/golden-section
/// iteration. The returned step never has a larger cost than step 0.
LineSearchResult brent_minimize(const std::function<double(double)>& line_cost, const OptimizerConfig& cfg);

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct SegmentResult {
  ControlVector control;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Number of gradient evaluations.
  int iterations = 0;
  std::vector<double> cost_history;
  std::vector<IterationRecord> log;
  bool failed = false;
  std::string failure;
};

SegmentResult minimize_segment(const ControlVector& guess, const Trajectory& measurement, const SegmentConfig& seg,
                               const OptimizerConfig& opt);

struct ReconstructOptions {
  /// Keep going after a failed segment, warm-starting from its guess.
  bool continue_on_failure = false;
  /// Guess for the first segment processed; zero when empty.
  std::optional<ControlVector> initial_guess;
  /// Index of the first segment to process (for resuming).
  std::size_t first_segment = 0;
  /// Called after every finished segment.
  std::function<void(std::size_t, const SegmentResult&)> on_segment;
};

/// Solves the segment problems in order. Segment i starts from the forward
/// endpoint w1 of segment i-1's optimised control. `base` supplies grid,
/// dt, nu and lambda; t0 and tau come from each measurement segment.
std::vector<SegmentResult> reconstruct(const std::vector<Trajectory>& segments, const SegmentConfig& base,
                                       const OptimizerConfig& opt, const ReconstructOptions& options = {});

/// Segment config matching a measurement segment.
SegmentConfig segment_config_for(const Trajectory& measurement, const SegmentConfig& base);

/// CSV with header `segment,iter,cost,grad_norm,step`.
void write_convergence_csv(std::ostream& os, const std::vector<SegmentResult>& results, std::size_t first_segment = 0);

}  // namespace siv
