#include "siv/store.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "siv/log.hpp"
#include "siv/snapshot.hpp"

namespace siv {

namespace fs = std::filesystem;

namespace {

std::string segment_stem(std::size_t index) {
  std::ostringstream s;
  s << "segment_" << std::setw(4) << std::setfill('0') << index;
  return s.str();
}

void write_manifest(const fs::path& dir, int n, double dt, int stride, long count) {
  KeyValues m;
  m.set("n", n);
  m.set("dt", dt);
  m.set("stride", stride);
  m.set("count", count);
  m.save(dir / "manifest");
}

}  // namespace

void save_cursor(const fs::path& path, const TruthCursor& cursor) {
  SpectralRecord rec{cursor.state.time, {cursor.state.ux, cursor.state.uy, cursor.state.phi}};
  if (cursor.prev) {
    rec.fields.push_back(cursor.prev->ux);
    rec.fields.push_back(cursor.prev->uy);
    rec.fields.push_back(cursor.prev->phi);
  }
  write_spectral_record(path, rec);
}

TruthCursor load_cursor(const fs::path& path, double dt) {
  SpectralRecord rec = read_spectral_record(path);
  if (rec.fields.size() != 3 && rec.fields.size() != 6) throw Error("checkpoint: expected 3 or 6 fields");
  TruthCursor c;
  c.step = std::lround(rec.time / dt);
  if (std::abs(static_cast<double>(c.step) * dt - rec.time) > 1e-9)
    throw Error("checkpoint: time is not on the dt grid");
  c.state = FlowState{std::move(rec.fields[0]), std::move(rec.fields[1]), std::move(rec.fields[2]), rec.time};
  if (rec.fields.size() == 6)
    c.prev = Tendency{std::move(rec.fields[3]), std::move(rec.fields[4]), std::move(rec.fields[5])};
  return c;
}

bool same_truth(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.n_truth == b.n_truth && a.n_rec == b.n_rec && a.T == b.T && a.dt == b.dt && a.nu == b.nu &&
         a.lambda == b.lambda && a.seed == b.seed && a.k0 == b.k0 && a.k_min == b.k_min && a.k_max == b.k_max &&
         a.sample_stride == b.sample_stride;
}

bool generate_truth(const ExperimentConfig& cfg, const fs::path& run, bool resume, const Progress& progress) {
  cfg.validate();
  const fs::path truth_dir = run_layout::truth(run), meas_dir = run_layout::measurement(run);
  const fs::path ckpt = run_layout::checkpoint(run);

  TruthCursor start;
  bool resumed = false;
  if (resume && fs::exists(run_layout::config(run))) {
    if (!same_truth(ExperimentConfig::load(run_layout::config(run)), cfg))
      throw Error("--resume: config differs from the one stored in " + run.string());
    if (fs::exists(truth_dir / "manifest") && fs::exists(meas_dir / "manifest") && !fs::exists(ckpt)) {
      if (progress) progress("truth already complete");
      return false;
    }
    if (fs::exists(ckpt)) {
      start = load_cursor(ckpt, cfg.dt);
      resumed = true;
      if (progress) progress("resuming truth at step " + std::to_string(start.step));
    }
  }
  if (!resumed) {
    fs::remove_all(truth_dir);
    fs::remove_all(meas_dir);
    fs::remove(ckpt);
    start = TruthCursor{0, initial_truth(cfg, cfg.n_truth), std::nullopt};
  }
  fs::create_directories(truth_dir);
  fs::create_directories(meas_dir);
  cfg.to_keyvalues().save(run_layout::config(run));
  fs::remove(truth_dir / "manifest");
  fs::remove(meas_dir / "manifest");

  const long total = cfg.total_steps();
  const long report_every = std::max<long>(1, total / 20);
  integrate_truth(cfg, start, [&](const TruthCursor& c) {
    write_snapshot(snapshot_path(meas_dir, c.step), Snapshot{c.state.time, {inverse(truncate(c.state.phi, cfg.n_rec))}});
    if (c.step % cfg.sample_stride == 0) {
      write_snapshot(snapshot_path(truth_dir, c.step),
                     Snapshot{c.state.time, {inverse(c.state.ux), inverse(c.state.uy), inverse(c.state.phi)}});
      if (c.step < total) save_cursor(ckpt, c);
    }
    if (progress && c.step % report_every == 0)
      progress("truth step " + std::to_string(c.step) + "/" + std::to_string(total));
  });
  write_manifest(truth_dir, cfg.n_truth, cfg.dt, cfg.sample_stride, total / cfg.sample_stride + 1);
  write_manifest(meas_dir, cfg.n_rec, cfg.dt, 1, total + 1);
  fs::remove(ckpt);
  return true;
}

ExperimentConfig load_run_config(const fs::path& run) {
  if (!fs::exists(run_layout::config(run))) throw Error("no config in run directory " + run.string());
  return ExperimentConfig::load(run_layout::config(run));
}

TruthRecord load_truth(const fs::path& run, const ExperimentConfig& cfg) {
  const fs::path truth_dir = run_layout::truth(run), meas_dir = run_layout::measurement(run);
  if (!fs::exists(truth_dir / "manifest") || !fs::exists(meas_dir / "manifest"))
    throw Error("truth in " + run.string() + " is missing or unfinished; run generate-truth (--resume)");
  const KeyValues tm = KeyValues::load(truth_dir / "manifest"), mm = KeyValues::load(meas_dir / "manifest");
  if (tm.get_int("n") != cfg.n_truth || mm.get_int("n") != cfg.n_rec || tm.get_int("stride") != cfg.sample_stride)
    throw Error("run manifests do not match the config");

  TruthRecord rec;
  rec.dt = cfg.dt;
  rec.stride = cfg.sample_stride;
  const long steps = mm.get_int("count");
  rec.psi.reserve(static_cast<std::size_t>(steps));
  for (long s = 0; s < steps; ++s) {
    const Snapshot snap = read_snapshot(snapshot_path(meas_dir, s));
    rec.psi.push_back(transform(snap.components.at(0)));
  }
  const long samples = tm.get_int("count");
  for (long i = 0; i < samples; ++i) {
    const Snapshot snap = read_snapshot(snapshot_path(truth_dir, i * cfg.sample_stride));
    if (snap.components.size() != 3) throw Error("truth snapshot must have 3 components");
    rec.vx.push_back(truncate(transform(snap.components[0]), cfg.n_rec));
    rec.vy.push_back(truncate(transform(snap.components[1]), cfg.n_rec));
  }
  return rec;
}

void save_segment_result(const fs::path& dir, std::size_t index, const SegmentResult& r) {
  fs::create_directories(dir);
  const std::string stem = segment_stem(index);
  KeyValues kv;
  kv.set("initial_cost", r.initial_cost);
  kv.set("final_cost", r.final_cost);
  kv.set("iterations", r.iterations);
  kv.set("failed", r.failed ? 1 : 0);
  if (r.failed) {
    std::string msg = r.failure;
    for (char& ch : msg)
      if (ch == '\n' || ch == '#') ch = ' ';
    kv.set("failure", msg);
  }
  kv.set("log_count", static_cast<long>(r.log.size()));
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& e = r.log[i];
    kv.set("log." + std::to_string(i), std::to_string(e.iter) + "," + format_double(e.cost) + "," +
                                           format_double(e.grad_norm) + "," + format_double(e.step));
  }
  kv.set("history", [&] {
    std::string s;
    for (std::size_t i = 0; i < r.cost_history.size(); ++i) s += (i ? "," : "") + format_double(r.cost_history[i]);
    return s;
  }());
  // The control goes first: a segment counts as saved once its .kv exists.
  write_spectral_record(dir / (stem + ".sivs"), SpectralRecord{0.0, {r.control.ux, r.control.uy, r.control.phi}});
  kv.save(dir / (stem + ".kv"));
}

std::optional<SegmentResult> load_segment_result(const fs::path& dir, std::size_t index) {
  const std::string stem = segment_stem(index);
  if (!fs::exists(dir / (stem + ".kv")) || !fs::exists(dir / (stem + ".sivs"))) return std::nullopt;
  const KeyValues kv = KeyValues::load(dir / (stem + ".kv"));
  SpectralRecord rec = read_spectral_record(dir / (stem + ".sivs"));
  if (rec.fields.size() != 3) throw Error("saved control must have 3 fields");
  SegmentResult r;
  r.control = ControlVector{std::move(rec.fields[0]), std::move(rec.fields[1]), std::move(rec.fields[2])};
  r.initial_cost = kv.get_double("initial_cost");
  r.final_cost = kv.get_double("final_cost");
  r.iterations = static_cast<int>(kv.get_int("iterations"));
  r.failed = kv.get_int("failed") != 0;
  if (r.failed && kv.contains("failure")) r.failure = kv.get("failure");
  const long count = kv.get_int("log_count");
  for (long i = 0; i < count; ++i) {
    const KeyValues row = KeyValues::parse("v=" + kv.get("log." + std::to_string(i)));
    const std::vector<double> v = row.get_doubles("v");
    if (v.size() != 4) throw Error("malformed log entry in " + stem);
    r.log.push_back(IterationRecord{static_cast<int>(v[0]), v[1], v[2], v[3]});
  }
  if (kv.contains("history") && !kv.get("history").empty()) r.cost_history = kv.get_doubles("history");
  return r;
}

TwinResult reconstruct_run(const ExperimentConfig& cfg, const fs::path& run, bool resume, const Progress& progress) {
  cfg.validate();
  const TruthRecord truth = load_truth(run, cfg);
  const std::vector<Trajectory> segments = measurement_segments(cfg, truth);
  const fs::path dir = run_layout::reconstruction(run);
  const SegmentConfig base = cfg.reconstruction_segment();

  std::vector<SegmentResult> done;
  if (resume) {
    while (done.size() < segments.size()) {
      auto r = load_segment_result(dir, done.size());
      if (!r) break;
      done.push_back(std::move(*r));
    }
    if (progress && !done.empty()) progress("reusing " + std::to_string(done.size()) + " finished segments");
  } else {
    fs::remove_all(dir);
  }

  ReconstructOptions options;
  options.first_segment = done.size();
  if (!done.empty())
    options.initial_guess =
        ControlVector::from_state(propagate(done.back().control, segment_config_for(segments[done.size() - 1], base)));
  options.on_segment = [&](std::size_t i, const SegmentResult& r) {
    save_segment_result(dir, i, r);
    if (progress)
      progress("segment " + std::to_string(i + 1) + "/" + std::to_string(segments.size()) +
               " cost " + format_double(r.initial_cost) + " -> " + format_double(r.final_cost));
  };
  std::vector<SegmentResult> fresh = reconstruct(segments, base, cfg.optimizer(), options);
  for (auto& r : fresh) done.push_back(std::move(r));
  return evaluate_reconstruction(cfg, truth, std::move(done));
}

void save_stability_record(const fs::path& path, const StabilityRecord& r) {
  KeyValues kv;
  kv.set("delta", r.delta);
  kv.set("psi_diff_sq", r.psi_diff_sq);
  kv.set("u_diff_sq", r.u_diff_sq);
  kv.set("v_diff_sq", r.v_diff_sq);
  kv.set("failed", r.failed ? 1 : 0);
  fs::create_directories(path.parent_path());
  kv.save(path);
}

std::optional<StabilityRecord> load_stability_record(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  const KeyValues kv = KeyValues::load(path);
  StabilityRecord r;
  r.delta = kv.get_double("delta");
  r.psi_diff_sq = kv.get_double("psi_diff_sq");
  r.u_diff_sq = kv.get_double("u_diff_sq");
  r.v_diff_sq = kv.get_double("v_diff_sq");
  r.failed = kv.get_int("failed") != 0;
  if (r.failed) return std::nullopt;
  return r;
}

LocalRecoverResult local_recover(const ExperimentConfig& cfg, const TruthRecord& truth,
                                 const LocalRecoverOptions& options) {
  if (options.half_window < 1) throw Error("local-recover: half_window must be at least 1");
  const long stride = truth.stride;
  const long last = static_cast<long>(truth.psi.size()) - 1;
  const double want = std::isnan(options.time) ? 0.5 * cfg.T : options.time;
  long sample = std::lround(want / (stride * truth.dt));
  // Keep the window inside the record and clear of the start-up step.
  const long lo = (options.half_window + 1 + stride - 1) / stride, hi = (last - options.half_window) / stride;
  if (lo > hi) throw Error("local-recover: record too short for the scalar window");
  sample = std::clamp(sample, lo, hi);
  const long centre = sample * stride;

  ScalarWindow w;
  w.dt = truth.dt;
  w.time = static_cast<double>(centre) * truth.dt;
  for (long s = centre - options.half_window; s <= centre + options.half_window; ++s)
    w.snapshots.push_back(truth.psi[static_cast<std::size_t>(s)]);

  const int n = w.n();
  const PhysicalField theta_true = inverse(stream_function(truth.vx[sample], truth.vy[sample]));
  const PhysicalField vx = inverse(truth.vx[sample]), vy = inverse(truth.vy[sample]);
  const int line_ix = static_cast<int>(std::lround((options.x_sigma + kPi) / (kDomainLength / n))) % n;
  std::vector<double> line(static_cast<std::size_t>(n));
  for (int iy = 0; iy < n; ++iy) line[iy] = theta_true.at(line_ix, iy);

  const TransportProblem problem = build_transport(w, cfg.lambda, options.x_sigma, line);
  double y0 = options.y0;
  if (std::isnan(y0)) {
    int best = 0;
    for (int iy = 1; iy < n; ++iy)
      if (std::abs(problem.dpsi_dy.at(line_ix, iy)) > std::abs(problem.dpsi_dy.at(line_ix, best))) best = iy;
    y0 = PhysicalField::node(best, n);
  }
  LocalRecoverResult out;
  out.cone = admissible_cone(problem, y0, options.max_width);
  out.time = w.time;
  out.epsilon_floor = problem.epsilon_floor;
  const TransportSolution sol = solve_transport(problem, out.cone);
  const RecoveredVelocity u = recover_velocity(sol);
  out.flagged = sol.flagged_count;
  const ConeGrid& grid = sol.grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& p = grid.points()[i];
    out.x.push_back(grid.x(p));
    out.y.push_back(grid.y(p));
    out.theta.push_back(sol.theta[i]);
    out.ux.push_back(u.ux[i]);
    out.uy.push_back(u.uy[i]);
    out.ux_true.push_back(vx.at(grid.grid_ix(p), grid.grid_iy(p)));
    out.uy_true.push_back(vy.at(grid.grid_ix(p), grid.grid_iy(p)));
    out.valid.push_back(u.valid[i] && !sol.flagged[i]);
  }
  std::vector<double> dx(grid.size()), dy(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    dx[i] = out.ux[i] - out.ux_true[i];
    dy[i] = out.uy[i] - out.uy_true[i];
  }
  out.l2_error = cone_l2(grid, dx, dy, out.valid);
  out.l2_true = cone_l2(grid, out.ux_true, out.uy_true, out.valid);

  const SpectralField mode = transform(PhysicalField::sample(n, [](double x, double y) { return std::cos(2 * x + y); }));
  for (double delta : options.deltas) {
    out.probes.push_back(stability_probe(w, w.perturbed(mode, delta), cfg.lambda, out.cone, line, problem.epsilon_floor));
    out.probes.back().delta = delta;
  }
  return out;
}

void write_recovery_csv(std::ostream& os, const LocalRecoverResult& r) {
  os << "x,y,theta,ux,uy,ux_true,uy_true,valid\n";
  for (std::size_t i = 0; i < r.x.size(); ++i)
    os << format_double(r.x[i]) << ',' << format_double(r.y[i]) << ',' << format_double(r.theta[i]) << ','
       << format_double(r.ux[i]) << ',' << format_double(r.uy[i]) << ',' << format_double(r.ux_true[i]) << ','
       << format_double(r.uy_true[i]) << ',' << int(r.valid[i]) << '\n';
}

KeyValues recovery_manifest(const LocalRecoverResult& r) {
  KeyValues kv;
  kv.set("time", r.time);
  kv.set("x_sigma", r.cone.x_sigma);
  kv.set("y0", r.cone.y0);
  kv.set("slope", r.cone.slope);
  kv.set("width", r.cone.width);
  kv.set("points", static_cast<long>(r.x.size()));
  kv.set("flagged", r.flagged);
  kv.set("epsilon_floor", r.epsilon_floor);
  kv.set("l2_error", r.l2_error);
  kv.set("l2_true", r.l2_true);
  return kv;
}

}  // namespace siv
