// siv: command-line driver for truth generation, reconstruction, the
// stability sweep, local recovery and the self-checks.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "siv/adjoint.hpp"
#include "siv/log.hpp"
#include "siv/store.hpp"
#include "siv/verify.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "key=value experiment config")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one config entry, key=value (repeatable)");
  }

  // Base entries come from `base` (a run directory's stored config) when no
  // file is given.
  siv::ExperimentConfig load(const std::optional<siv::KeyValues>& base = std::nullopt) const {
    try {
      siv::KeyValues kv;
      if (!file.empty()) kv = siv::KeyValues::load(file);
      else if (base) kv = *base;
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw siv::Error("--set expects key=value, got '" + o + "'");
        const siv::KeyValues one = siv::KeyValues::parse(o);
        for (const auto& [k, v] : one.entries()) kv.set(k, v);
      }
      return siv::ExperimentConfig::from_keyvalues(kv);
    } catch (const siv::Error& e) {
      throw UsageError(e.what());
    }
  }
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw siv::Error("cannot write " + path.string());
  body(os);
  if (!os) throw siv::Error("write failed for " + path.string());
}

void progress(const std::string& msg) { siv::log::info(msg); }

siv::KeyValues stored_config(const fs::path& run) {
  if (!fs::exists(siv::run_layout::config(run))) throw UsageError("no run directory at " + run.string());
  return siv::KeyValues::load(siv::run_layout::config(run));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalar image velocimetry: velocity reconstruction from passive-scalar data"};
  app.require_subcommand(1);
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "only print errors");
  app.add_flag("-v,--verbose", verbose, "print progress");

  // generate-truth
  ConfigArgs gen_cfg;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out = "run";
  bool gen_resume = false;
  auto* gen = app.add_subcommand("generate-truth", "integrate the random truth and store truth + measurement");
  gen_cfg.attach(gen);
  gen->add_option("--seed", gen_seed, "RNG seed (overrides the config)");
  gen->add_option("-o,--out", gen_out, "run directory")->capture_default_str();
  gen->add_flag("--resume", gen_resume, "continue an interrupted run from its checkpoint");

  // reconstruct
  ConfigArgs rec_cfg;
  std::string rec_run = "run";
  bool rec_resume = false;
  auto* rec = app.add_subcommand("reconstruct", "twin experiment on a generated truth");
  rec_cfg.attach(rec);
  rec->add_option("-r,--run", rec_run, "run directory from generate-truth")->capture_default_str();
  rec->add_flag("--resume", rec_resume, "reuse finished segments");

  // stability-sweep
  ConfigArgs sweep_cfg;
  std::string sweep_out = "sweep";
  bool sweep_resume = false;
  int sweep_threads = 0;
  auto* sweep = app.add_subcommand("stability-sweep", "perturbed twin experiments for each delta");
  sweep_cfg.attach(sweep);
  sweep->add_option("-o,--out", sweep_out, "output directory")->capture_default_str();
  sweep->add_option("--threads", sweep_threads, "worker threads (default: SIV_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  sweep->add_flag("--resume", sweep_resume, "skip deltas finished by an earlier run");

  // local-recover
  ConfigArgs loc_cfg;
  std::string loc_run = "run";
  siv::LocalRecoverOptions loc;
  auto* local = app.add_subcommand("local-recover", "stream-function recovery on a cone from the stored truth");
  loc_cfg.attach(local);
  local->add_option("-r,--run", loc_run, "run directory from generate-truth")->capture_default_str();
  local->add_option("--time", loc.time, "window centre (default T/2)");
  local->add_option("--x-sigma", loc.x_sigma, "x of the data line")->capture_default_str();
  local->add_option("--y0", loc.y0, "apex y (default: largest |d_y psi| on the line)");
  local->add_option("--max-width", loc.max_width, "largest cone width to try")->capture_default_str();
  local->add_option("--half-window", loc.half_window, "snapshots on each side of the centre")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  local->add_option("--deltas", loc.deltas, "probe perturbation sizes")->delimiter(',');

  // gradient-check
  ConfigArgs grad_cfg;
  int grad_dirs = 5;
  double grad_step = 1e-3, grad_tol = 1e-2;
  std::string grad_out;
  auto* grad = app.add_subcommand("gradient-check", "adjoint gradient against central differences");
  grad_cfg.attach(grad);
  grad->add_option("--directions", grad_dirs, "random directions")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--fd-step", grad_step, "finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--tol", grad_tol, "largest accepted relative error")->capture_default_str();
  grad->add_option("-o,--out", grad_out, "CSV file (default stdout)");

  // verify
  ConfigArgs ver_cfg;
  auto* ver = app.add_subcommand("verify", "analytic self-checks");
  ver_cfg.attach(ver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }
  siv::log::set_level(quiet ? siv::log::Level::Quiet : verbose ? siv::log::Level::Info : siv::log::Level::Warn);

  try {
    if (*gen) {
      siv::ExperimentConfig cfg = gen_cfg.load();
      if (gen_seed) cfg.seed = *gen_seed;
      if (!siv::generate_truth(cfg, gen_out, gen_resume, progress))
        siv::log::info("nothing to do: " + gen_out + " is complete");
    } else if (*rec) {
      const siv::ExperimentConfig stored = siv::ExperimentConfig::from_keyvalues(stored_config(rec_run));
      const siv::ExperimentConfig cfg = rec_cfg.load(stored.to_keyvalues());
      if (!siv::same_truth(cfg, stored)) throw UsageError("config does not match the truth stored in " + rec_run);
      const siv::TwinResult r = siv::reconstruct_run(cfg, rec_run, rec_resume, progress);
      write_file(fs::path(rec_run) / "convergence.csv", [&](std::ostream& os) { siv::write_convergence_csv(os, r.segments); });
      write_file(fs::path(rec_run) / "epsilon.csv", [&](std::ostream& os) { siv::write_epsilon_csv(os, r); });
      for (const auto& s : r.segments)
        if (s.failed) throw siv::Error("a segment failed: " + s.failure);
      if (!quiet)
        std::printf("epsilon first segment %.6g, last segment %.6g\n", r.segment_epsilon.front(),
                    r.segment_epsilon.back());
    } else if (*sweep) {
      const siv::ExperimentConfig cfg = sweep_cfg.load();
      const fs::path out = sweep_out;
      const fs::path records = out / "records";
      if (sweep_resume && fs::exists(out / "config") &&
          siv::ExperimentConfig::load(out / "config").to_keyvalues().str() != cfg.to_keyvalues().str())
        throw UsageError("--resume: config differs from the one stored in " + sweep_out);
      if (!sweep_resume) fs::remove_all(records);
      fs::create_directories(records);
      cfg.to_keyvalues().save(out / "config");
      const auto record_path = [&](std::size_t j) { return records / ("delta_" + std::to_string(j) + ".kv"); };
      siv::SweepOptions opts;
      opts.threads = sweep_threads > 0 ? sweep_threads : siv::worker_threads();
      opts.progress = progress;
      if (sweep_resume) opts.cached = [&](std::size_t j) { return siv::load_stability_record(record_path(j)); };
      opts.on_record = [&](std::size_t j, const siv::StabilityRecord& r) { siv::save_stability_record(record_path(j), r); };
      const siv::SweepResult r = siv::stability_sweep(cfg, opts);
      write_file(out / "sweep.csv", [&](std::ostream& os) { siv::write_sweep_csv(os, r.records); });
      write_file(out / "slopes.csv", [&](std::ostream& os) { siv::write_slopes_csv(os, r.fits); });
      if (!r.baseline.epsilon.empty())
        write_file(out / "epsilon_baseline.csv", [&](std::ostream& os) { siv::write_epsilon_csv(os, r.baseline); });
      if (!quiet) siv::write_slopes_csv(std::cout, r.fits);
      for (const auto& s : r.records)
        if (s.failed) throw siv::Error("sweep entry delta=" + siv::format_double(s.delta) + " failed: " + s.failure);
    } else if (*local) {
      const siv::ExperimentConfig cfg = loc_cfg.load(stored_config(loc_run));
      const siv::TruthRecord truth = siv::load_truth(loc_run, cfg);
      const siv::LocalRecoverResult r = siv::local_recover(cfg, truth, loc);
      const fs::path out = fs::path(loc_run) / "local_recovery";
      write_file(out / "recovery.csv", [&](std::ostream& os) { siv::write_recovery_csv(os, r); });
      write_file(out / "probe.csv", [&](std::ostream& os) { siv::write_probe_csv(os, r.probes); });
      fs::create_directories(out);
      siv::recovery_manifest(r).save(out / "manifest");
      if (!quiet) {
        std::printf("cone width %.4g slope %.4g, %zu points", r.cone.width, r.cone.slope, r.x.size());
        if (r.l2_true > 0.0) std::printf(", relative L2 velocity error %.4g\n", r.l2_error / r.l2_true);
        else std::printf(", too small for a velocity comparison\n");
      }
    } else if (*grad) {
      const siv::ExperimentConfig cfg = grad_cfg.load();
      const auto recs = siv::gradient_check(cfg, cfg.reconstruction_segment(), grad_dirs, grad_step);
      double worst = 0.0;
      const auto emit = [&](std::ostream& os) {
        os << "direction,adjoint,finite_difference,relative_error\n";
        for (const auto& g : recs) {
          os << g.direction << ',' << siv::format_double(g.adjoint) << ',' << siv::format_double(g.finite_difference)
             << ',' << siv::format_double(g.relative_error) << '\n';
          worst = std::max(worst, g.relative_error);
        }
      };
      if (grad_out.empty()) emit(std::cout);
      else write_file(grad_out, emit);
      if (!(worst <= grad_tol)) {
        std::fprintf(stderr, "siv: gradient check failed: relative error %.3g > %.3g\n", worst, grad_tol);
        return 1;
      }
    } else if (*ver) {
      ver_cfg.load();
      bool ok = true;
      siv::run_analytic_suite([&](const siv::CheckResult& c) {
        ok = ok && c.passed;
        if (!quiet) std::printf("%s %s: %.4g (limit %.4g)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.limit);
      });
      if (!ok) {
        std::fprintf(stderr, "siv: analytic checks failed\n");
        return 1;
      }
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "siv: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "siv: %s\n", e.what());
    return 1;
  }
  return 0;
}
