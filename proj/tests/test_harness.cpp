#include <doctest.h>

#include <cmath>
#include <sstream>

#include "siv/harness.hpp"

using namespace siv;

namespace {

// Small enough for unit tests: 16^2 grids, two short segments.
ExperimentConfig tiny() {
  return ExperimentConfig::from_keyvalues(KeyValues::parse(
      "n_truth=32\nn_rec=16\nT=0.04\ntau=0.02\ndt=0.002\nk_max=5\nk0=2\nsample_stride=2\nmax_cg_iters=4\n"
      "deltas=0,1e-2\nwindow_lo=0.02\nwindow_hi=0.04\n"));
}

// Grid average of f^2: the domain-averaged norm squared, for band-limited f.
double mean_square(const SpectralField& f) {
  const PhysicalField p = inverse(f);
  double sum = 0.0;
  for (double v : p.values()) sum += v * v;
  return sum / static_cast<double>(p.values().size());
}

}  // namespace

TEST_CASE("experiment config") {
  SUBCASE("defaults are the desk-scale values") {
    const ExperimentConfig c = ExperimentConfig::from_keyvalues(KeyValues{});
    CHECK(c.n_truth == 128);
    CHECK(c.n_rec == 64);
    CHECK(c.segment_count() == 25);
    CHECK(c.segment_steps() == 80);
    CHECK(c.total_steps() == 2000);
    CHECK(c.window_lo == 1.5);
    CHECK(c.window_hi == 2.0);
    CHECK(c.nu == 4e-3);
    CHECK(c.lambda == 8e-3);
    CHECK(c.deltas.size() == 5);
  }
  SUBCASE("window defaults follow the horizon") {
    const ExperimentConfig c = ExperimentConfig::from_keyvalues(KeyValues::parse("T=8\nn_truth=256\nn_rec=128"));
    CHECK(c.window_lo == 6.0);
    CHECK(c.window_hi == 8.0);
  }
  SUBCASE("round trip through key=value text") {
    ExperimentConfig c = tiny();
    c.seed = 99;
    const ExperimentConfig back = ExperimentConfig::from_keyvalues(KeyValues::parse(c.to_keyvalues().str()));
    CHECK(back.seed == 99);
    CHECK(back.deltas == c.deltas);
    CHECK(back.dt == c.dt);
  }
  SUBCASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::from_keyvalues(KeyValues::parse("bogus=1")), Error);
    CHECK_THROWS_AS(ExperimentConfig::from_keyvalues(KeyValues::parse("n_rec=256")), Error);
    CHECK_THROWS_AS(ExperimentConfig::from_keyvalues(KeyValues::parse("T=2.01")), Error);
    CHECK_THROWS_AS(ExperimentConfig::from_keyvalues(KeyValues::parse("window_lo=2.5\nwindow_hi=3")), Error);
    CHECK_THROWS_AS(ExperimentConfig::from_keyvalues(KeyValues::parse("n_truth=abc")), Error);
  }
}

TEST_CASE("random initial truth") {
  ExperimentConfig cfg;
  const FlowState s = initial_truth(cfg, 64);
  CHECK(mean_square(s.ux) + mean_square(s.uy) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_square(s.phi) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_divergence(s.ux, s.uy) < 1e-12);
  CHECK(s.phi.coeff(0, 0) == Complex{});
  CHECK(s.phi.coeff(13, 0) == Complex{});

  SUBCASE("same seed is bit-identical, other seeds differ") {
    const FlowState again = initial_truth(cfg, 64);
    CHECK(max_abs(again.ux - s.ux) == 0.0);
    CHECK(max_abs(again.phi - s.phi) == 0.0);
    cfg.seed = 2;
    CHECK(max_abs(initial_truth(cfg, 64).phi - s.phi) > 1e-3);
  }
  SUBCASE("the draw does not depend on the grid") {
    const FlowState fine = initial_truth(cfg, 128);
    CHECK(max_abs(truncate(fine.phi, 64) - s.phi) < 1e-15);
    CHECK(max_abs(truncate(fine.ux, 64) - s.ux) < 1e-15);
  }
  SUBCASE("spectrum peaks near k0") {
    double e4 = 0, e11 = 0;
    for (int kx = -12; kx <= 12; ++kx)
      for (int ky = -12; ky <= 12; ++ky) {
        const double k = std::hypot(kx, ky);
        const double a = std::norm(s.phi.coeff(kx, ky));
        if (std::abs(k - 4) < 0.5) e4 += a;
        if (std::abs(k - 11) < 0.5) e11 += a;
      }
    CHECK(e4 > 10 * e11);
  }
}

TEST_CASE("velocity perturbations have the requested relative size") {
  ExperimentConfig cfg;
  const FlowState s = initial_truth(cfg, 64);
  for (double delta : {1e-5, 1e-3, 1e-1}) {
    const FlowState p = perturb_velocity(s, delta, perturbation_seed(cfg.seed, 0), cfg);
    const SpectralField dx = p.ux - s.ux, dy = p.uy - s.uy;
    const double rel = std::sqrt(mean_square(dx) + mean_square(dy));
    CHECK(rel == doctest::Approx(delta).epsilon(0.1));
    CHECK(mean_square(p.ux) + mean_square(p.uy) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(max_abs(p.phi - s.phi) == 0.0);
    CHECK(max_divergence(p.ux, p.uy) < 1e-12);
  }
  CHECK(perturbation_seed(1, 0) != perturbation_seed(1, 1));
  CHECK(perturbation_seed(1, 0) == perturbation_seed(1, 0));
}

TEST_CASE("truth record") {
  const ExperimentConfig cfg = tiny();
  const FlowState init = initial_truth(cfg, cfg.n_truth);
  const TruthRecord rec = record_truth(cfg, init);
  CHECK(rec.psi.size() == 21);
  CHECK(rec.vx.size() == 11);
  CHECK(rec.sample_time(10) == doctest::Approx(0.04));
  CHECK(max_abs(rec.psi[0] - truncate(init.phi, 16)) == 0.0);

  SUBCASE("resuming from a cursor reproduces the run bit for bit") {
    std::vector<TruthCursor> cursors;
    integrate_truth(cfg, TruthCursor{0, init, std::nullopt}, [&](const TruthCursor& c) { cursors.push_back(c); });
    REQUIRE(cursors.size() == 21);
    FlowState resumed_end;
    integrate_truth(cfg, cursors[7], [&](const TruthCursor& c) { resumed_end = c.state; });
    CHECK(max_abs(resumed_end.phi - cursors.back().state.phi) == 0.0);
    CHECK(max_abs(resumed_end.ux - cursors.back().state.ux) == 0.0);
  }
  SUBCASE("truncation never increases the norm") {
    std::vector<TruthCursor> cursors;
    integrate_truth(cfg, TruthCursor{0, init, std::nullopt}, [&](const TruthCursor& c) { cursors.push_back(c); });
    for (std::size_t i = 0; i < cursors.size(); ++i) CHECK(l2_norm(rec.psi[i]) <= l2_norm(cursors[i].state.phi));
  }
  SUBCASE("measurement segments tile the horizon") {
    const auto segs = measurement_segments(cfg, rec);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].size() == 11);
    CHECK(segs[1].front().time == doctest::Approx(0.02));
    CHECK(max_abs(segs[1].back().phi - dealiased(rec.psi.back())) == 0.0);
  }
}

TEST_CASE("twin experiment on a tiny grid") {
  const ExperimentConfig cfg = tiny();
  const TruthRecord rec = record_truth(cfg, initial_truth(cfg, cfg.n_truth));
  const TwinResult r = twin_experiment(cfg, rec);
  REQUIRE(r.segments.size() == 2);
  CHECK(r.times.size() == 11);
  CHECK(r.segment_epsilon.size() == 2);
  // Zero first guess: the scalar hardly constrains u0 within one segment,
  // so epsilon(0) stays close to the truncated truth energy.
  const double v0 = mean_square(rec.vx[0]) + mean_square(rec.vy[0]);
  CHECK(r.epsilon[0] == doctest::Approx(v0).epsilon(0.05));
  for (const auto& s : r.segments) CHECK(s.final_cost <= s.initial_cost);

  std::ostringstream csv;
  write_epsilon_csv(csv, r);
  CHECK(csv.str().rfind("t,epsilon\n0,", 0) == 0);

  const TwinResult again = evaluate_reconstruction(cfg, rec, r.segments);
  CHECK(again.epsilon == r.epsilon);
}

TEST_CASE("zero-velocity truth is reconstructed to the numerical floor") {
  const ExperimentConfig cfg = tiny();
  FlowState init = initial_truth(cfg, cfg.n_truth);
  init.ux = SpectralField(cfg.n_truth);
  init.uy = SpectralField(cfg.n_truth);
  const TruthRecord rec = record_truth(cfg, init);
  const TwinResult r = twin_experiment(cfg, rec);
  for (double e : r.epsilon) CHECK(e < 1e-6);
}

TEST_CASE("slope fits") {
  std::vector<StabilityRecord> recs;
  for (double x : {1e-6, 1e-5, 1e-3, 1e-2, 1e-1}) {
    StabilityRecord r;
    r.delta = x;
    r.psi_diff_sq = x;
    r.u_diff_sq = x < 1e-4 ? 2e-3 : 0.5 * x;
    recs.push_back(r);
  }
  StabilityRecord failed;
  failed.failed = true;
  recs.push_back(failed);
  const auto fits = fit_slopes(recs, 1e-4);
  REQUIRE(fits.size() == 2);
  CHECK(fits[0].regime == "lower");
  CHECK(fits[0].npoints == 2);
  CHECK(fits[0].slope == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(fits[1].npoints == 3);
  CHECK(fits[1].slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fits[1].intercept == doctest::Approx(std::log10(0.5)).epsilon(1e-12));

  std::ostringstream csv;
  write_slopes_csv(csv, fits);
  CHECK(csv.str().rfind("regime,slope,intercept,npoints\nlower,", 0) == 0);
  std::ostringstream sweep;
  write_sweep_csv(sweep, recs);
  CHECK(sweep.str().rfind("delta,psi_diff_sq,u_diff_sq,v_diff_sq\n1e-06,", 0) == 0);

  const auto empty = fit_slopes({}, 1e-4);
  CHECK(std::isnan(empty[0].slope));
}

TEST_CASE("stability sweep on a tiny grid is deterministic") {
  const ExperimentConfig cfg = tiny();
  const SweepResult a = stability_sweep(cfg);
  REQUIRE(a.records.size() == 2);
  CHECK(a.records[0].psi_diff_sq == 0.0);
  CHECK(a.records[0].u_diff_sq == 0.0);
  CHECK(a.records[0].v_diff_sq == 0.0);
  CHECK(a.records[1].psi_diff_sq > 0.0);
  CHECK(a.records[1].v_diff_sq > 0.0);

  SweepOptions two;
  two.threads = 2;
  std::vector<std::size_t> finished;
  two.on_record = [&](std::size_t j, const StabilityRecord&) { finished.push_back(j); };
  const SweepResult b = stability_sweep(cfg, two);
  CHECK(finished.size() == 2);
  std::ostringstream ca, cb;
  write_sweep_csv(ca, a.records);
  write_sweep_csv(cb, b.records);
  CHECK(ca.str() == cb.str());

  SUBCASE("cached entries are not recomputed") {
    SweepOptions resume;
    resume.cached = [&](std::size_t j) { return std::optional<StabilityRecord>(a.records[j]); };
    bool ran = false;
    resume.on_record = [&](std::size_t, const StabilityRecord&) { ran = true; };
    const SweepResult c = stability_sweep(cfg, resume);
    CHECK_FALSE(ran);
    CHECK(c.baseline.epsilon.empty());
    std::ostringstream cc;
    write_sweep_csv(cc, c.records);
    CHECK(cc.str() == ca.str());
  }
}

TEST_CASE("stream function of Taylor-Green") {
  const int n = 32;
  const auto ux = transform(PhysicalField::sample(n, [](double x, double y) { return std::sin(x) * std::cos(y); }));
  const auto uy = transform(PhysicalField::sample(n, [](double x, double y) { return -std::cos(x) * std::sin(y); }));
  const auto theta = inverse(stream_function(ux, uy));
  double worst = 0.0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      worst = std::max(worst, std::abs(theta.at(ix, iy) -
                                       std::sin(PhysicalField::node(ix, n)) * std::sin(PhysicalField::node(iy, n))));
  CHECK(worst < 1e-14);
}

TEST_CASE("gradient check helper") {
  ExperimentConfig cfg = tiny();
  SegmentConfig seg = cfg.reconstruction_segment();
  seg.dt = 1e-3;
  const auto recs = gradient_check(cfg, seg, 2);
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) CHECK(r.relative_error < 1e-2);
}

TEST_CASE("worker threads honour SIV_THREADS") {
  setenv("SIV_THREADS", "1", 1);
  CHECK(worker_threads() == 1);
  unsetenv("SIV_THREADS");
  CHECK(worker_threads() >= 1);
}
