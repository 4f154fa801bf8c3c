#include "blochsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blochsim/errors.hpp"
#include "blochsim/rng.hpp"

namespace blochsim {

namespace {

RunConfig with_depth(const RunConfig& base, double depth_u) {
  RunConfig c = base;
  c.lattice.depth_u = depth_u;
  return c;
}

HubbardParams params_for(const RunConfig& config) {
  return derive_hubbard(config.lattice_config());
}

// sigma(N) at the array center for the requested statistics.
double central_sigma(const RunConfig& config, const HubbardParams& p, NumberRegime regime) {
  const double n = config.atoms.central_occupation;
  switch (regime) {
    case NumberRegime::coherent: return std::sqrt(n);
    case NumberRegime::squeezed:
      return squeezed_sigma(n, p.g_beta, p.gamma, config.variant());
    case NumberRegime::fock: return 1e-9;
  }
  return std::sqrt(n);
}

struct ShotResult {
  double width = 0.0;
  bool ok = false;
};

}  // namespace

std::vector<double> stroboscopic_times(double t_end, double bloch_period,
                                       double step_periods) {
  const double step = step_periods * bloch_period;
  std::vector<double> times;
  for (double t = 0.0; t <= t_end + 1e-12; t += step) times.push_back(t);
  if (times.size() < 2) times.push_back(step);
  return times;
}

std::vector<WidthStats> width_vs_time(const RunConfig& config, double depth_u,
                                      NumberRegime regime,
                                      const std::vector<double>& times) {
  RunConfig cfg = with_depth(config, depth_u);
  const LatticeConfig lattice = cfg.lattice_config();
  const HubbardParams params = params_for(cfg);
  const ImagingConfig imaging = cfg.imaging_config();

  EnsembleSpec spec = cfg.ensemble_spec();
  spec.number_sigma_model = regime;
  const std::vector<ArrayState> samples = init_array(lattice, params, spec);

  const double kinematic = imaging.bragg_separation();
  const int n_samples = static_cast<int>(samples.size());
  const int n_times = static_cast<int>(times.size());

  // An absorption image integrates over the transverse degrees of freedom,
  // which self-averages the interference speckle; one image corresponds to a
  // small ensemble mean, not to a single phase realization.  Widths are
  // therefore fitted on group-mean profiles (grouped by sample index, so the
  // layout never depends on scheduling) and averaged across groups.
  const int group_size = std::clamp(n_samples / 8, 1, 16);
  const int n_groups = (n_samples + group_size - 1) / group_size;

  std::vector<DensityProfile> profiles(static_cast<std::size_t>(n_samples) * n_times);
  const bool with_noise = imaging.noise.photon_shot || imaging.noise.atom_shot;
  parallel_for_samples(n_samples, cfg.analysis.workers, [&](int s) {
    Trajectory traj = evolve(samples[s], params, lattice.gradient_e, 0.0, times);
    for (int k = 0; k < n_times; ++k) {
      DensityProfile profile = synthesize_profile(traj.states[k], imaging);
      if (with_noise) {
        // seed bound to (sample, time), never to scheduling
        const std::uint64_t idx = 0x10000u + static_cast<std::uint64_t>(s) * 4096u + k;
        profile = add_noise(profile, imaging, splitmix64(spec.master_seed ^ idx));
      }
      profiles[static_cast<std::size_t>(s) * n_times + k] = std::move(profile);
    }
  });

  std::vector<WidthStats> out(n_times);
  std::vector<DensityProfile> group;
  for (int k = 0; k < n_times; ++k) {
    double sum = 0.0, sum2 = 0.0;
    int count = 0;
    for (int g = 0; g < n_groups; ++g) {
      group.clear();
      for (int s = g * group_size; s < std::min((g + 1) * group_size, n_samples); ++s)
        group.push_back(profiles[static_cast<std::size_t>(s) * n_times + k]);
      try {
        const DensityProfile mean_profile = average_profiles(group);
        const double w = central_moment_width(mean_profile, kinematic);
        sum += w;
        sum2 += w * w;
        ++count;
      } catch (const std::exception&) {
        // skip groups whose fit degenerates; the mean uses surviving ones
      }
    }
    if (count == 0)
      throw ConvergenceError("width_vs_time: every group fit failed at one hold time");
    const double mean = sum / count;
    const double var = std::max(sum2 / count - mean * mean, 0.0);
    out[k].time = times[k];
    out[k].mean_width = mean;
    out[k].sem_width = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
  }
  return out;
}

CoherenceRun coherence_run(const RunConfig& config, double depth_u, NumberRegime regime) {
  RunConfig cfg = with_depth(config, depth_u);
  CoherenceRun run;
  run.params = params_for(cfg);
  run.sigma_used = central_sigma(cfg, run.params, regime);
  run.tau_theory = 1.0 / (run.params.g_beta * run.sigma_used);

  // sample out to 3 expected collapse times, stroboscopically (the grid rule
  // is part of the measurement definition; tau_c comparisons assume it)
  const double period = bloch_period(cfg.gradient_e());
  const double t_end = 3.0 * run.tau_theory;
  const std::vector<double> times =
      stroboscopic_times(t_end, period, cfg.times.bloch_step_periods);

  run.widths = width_vs_time(cfg, depth_u, regime, times);

  std::vector<double> t, w;
  for (const auto& p : run.widths) {
    t.push_back(p.time);
    w.push_back(p.mean_width);
  }
  run.scan = fit_coherence_time(t, w);
  return run;
}

std::vector<CoherenceDepthPoint> coherence_vs_depth(const RunConfig& config,
                                                    const std::vector<double>& depths) {
  std::vector<CoherenceDepthPoint> table;
  for (double d : depths) {
    CoherenceDepthPoint point;
    point.depth_u = d;
    try {
      RunConfig cfg = with_depth(config, d);
      const HubbardParams p = params_for(cfg);
      const double n = cfg.atoms.central_occupation;
      point.tau_theory_coherent = 1.0 / (p.g_beta * std::sqrt(n));
      point.tau_theory_squeezed =
          1.0 / (p.g_beta * squeezed_sigma(n, p.g_beta, p.gamma, cfg.variant()));
      point.tau_pipeline_squeezed =
          coherence_run(cfg, d, NumberRegime::squeezed).scan.tau_c;
      point.tau_pipeline_coherent =
          coherence_run(cfg, d, NumberRegime::coherent).scan.tau_c;
    } catch (const std::exception& err) {
      point.failed = true;
      point.failure = err.what();
    }
    table.push_back(point);
  }
  return table;
}

std::vector<SqueezingPoint> squeezing_sweep(const RunConfig& config,
                                            const std::vector<double>& depths) {
  std::vector<SqueezingPoint> table;
  for (double d : depths) {
    RunConfig cfg = with_depth(config, d);
    const LatticeConfig lattice = cfg.lattice_config();
    const HubbardParams params = params_for(cfg);
    const ImagingConfig imaging = cfg.imaging_config();

    EnsembleSpec spec = cfg.ensemble_spec();
    const std::vector<ArrayState> samples = init_array(lattice, params, spec);

    std::vector<DensityProfile> profiles(samples.size());
    parallel_for_samples(static_cast<int>(samples.size()), cfg.analysis.workers,
                         [&](int s) { profiles[s] = synthesize_profile(samples[s], imaging); });
    DensityProfile mean = average_profiles(profiles);

    FitResult fit = fit_peaks(mean, imaging.bragg_separation());
    SqueezingPoint point;
    point.depth_u = d;
    point.incoherent_fraction = incoherent_fraction(fit);
    const double n = cfg.atoms.central_occupation;
    point.depletion = quantum_depletion(n, params.g_beta, params.gamma);
    point.sigma_s = spec.number_sigma_model == NumberRegime::squeezed
                        ? squeezed_sigma(n, params.g_beta, params.gamma, cfg.variant())
                        : std::sqrt(n);
    point.sigma_ratio = std::sqrt(n) / point.sigma_s;
    table.push_back(point);
  }
  return table;
}

GradientScan width_vs_gradient(const RunConfig& config,
                               const std::vector<double>& gradient_hz,
                               double hold_time) {
  GradientScan scan;

  // transform limit: clean phase-locked array through the same imaging + fit
  {
    RunConfig quiet = config;
    quiet.ensemble.n_samples = 1;
    quiet.ensemble.model = "fock";
    const LatticeConfig lattice = quiet.lattice_config();
    const HubbardParams params = params_for(quiet);
    const ImagingConfig imaging = quiet.imaging_config();
    EnsembleSpec spec = quiet.ensemble_spec();
    spec.phase_sigma = 0.0;
    const std::vector<ArrayState> clean = init_array(lattice, params, spec);
    DensityProfile profile = synthesize_profile(clean[0], imaging);
    scan.transform_limit = central_moment_width(profile, imaging.bragg_separation());
  }

  for (double f : gradient_hz) {
    RunConfig cfg = config;
    cfg.gradient.frequency_hz = f;
    // stroboscopic hold: the nearest whole number of Bloch periods
    const double period = bloch_period(cfg.gradient_e());
    double hold = hold_time;
    if (period <= hold_time)
      hold = period * std::max(1.0, std::round(hold_time / period));

    const std::vector<WidthStats> stats =
        width_vs_time(cfg, cfg.lattice.depth_u, cfg.regime(), {hold});
    GradientScanPoint point;
    point.gradient_hz = f;
    point.hold_time = hold;
    point.mean_width = stats[0].mean_width;
    point.sem_width = stats[0].sem_width;
    scan.points.push_back(point);
  }
  return scan;
}

RephaseRun rephase_run(const RunConfig& config, double t_bloch,
                       const std::vector<double>& t_rephase_grid) {
  const LatticeConfig lattice = config.lattice_config();
  const HubbardParams params = params_for(config);
  const ImagingConfig imaging = config.imaging_config();
  const double kinematic = imaging.bragg_separation();

  EnsembleSpec spec = config.ensemble_spec();
  const std::vector<ArrayState> samples = init_array(lattice, params, spec);
  const int n_samples = static_cast<int>(samples.size());
  const int n_times = static_cast<int>(t_rephase_grid.size());

  // dephasing-completeness check: the tilted hold must have run the phase
  // spread well past a radian so width(t_bloch) sits at the plateau
  const double sigma = central_sigma(config, params, config.regime());
  if (params.g_beta * sigma * t_bloch < 2.0)
    throw DomainError("rephase_run: t_bloch too short to dephase the array");

  std::vector<ShotResult> shots(static_cast<std::size_t>(n_samples) * n_times);
  std::vector<ShotResult> dephased(n_samples);

  const bool with_noise = imaging.noise.photon_shot || imaging.noise.atom_shot;
  parallel_for_samples(n_samples, config.analysis.workers, [&](int s) {
    // tilted hold
    Trajectory tilted = evolve(samples[s], params, lattice.gradient_e, 0.0, {t_bloch});
    ArrayState end = tilted.states.back();

    DensityProfile profile = synthesize_profile(end, imaging);
    try {
      dephased[s].width = central_moment_width(profile, kinematic);
      dephased[s].ok = true;
    } catch (const std::exception&) {
    }

    // gradient off, tunneling on
    end.time = 0.0;
    for (auto& e : end.site_energies) e = 0.0;
    Trajectory free_run = evolve(end, params, 0.0, 0.0, t_rephase_grid);
    for (int k = 0; k < n_times; ++k) {
      DensityProfile p = synthesize_profile(free_run.states[k], imaging);
      if (with_noise) {
        const std::uint64_t idx = 0x20000u + static_cast<std::uint64_t>(s) * 4096u + k;
        p = add_noise(p, imaging, splitmix64(spec.master_seed ^ idx));
      }
      ShotResult& slot = shots[static_cast<std::size_t>(s) * n_times + k];
      try {
        slot.width = central_moment_width(p, kinematic);
        slot.ok = true;
      } catch (const std::exception&) {
      }
    }
  });

  RephaseRun run;
  double dsum = 0.0;
  int dcount = 0;
  for (const auto& d : dephased)
    if (d.ok) {
      dsum += d.width;
      ++dcount;
    }
  run.dephased_width = dcount > 0 ? dsum / dcount : 0.0;

  for (int k = 0; k < n_times; ++k) {
    double sum = 0.0, sum2 = 0.0;
    int count = 0;
    for (int s = 0; s < n_samples; ++s) {
      const ShotResult& slot = shots[static_cast<std::size_t>(s) * n_times + k];
      if (!slot.ok) continue;
      sum += slot.width;
      sum2 += slot.width * slot.width;
      ++count;
    }
    if (count == 0)
      throw ConvergenceError("rephase_run: every per-shot fit failed at one rephase time");
    RephasePoint point;
    point.t_rephase = t_rephase_grid[k];
    point.mean_width = sum / count;
    const double var = std::max(sum2 / count - point.mean_width * point.mean_width, 0.0);
    point.sem_width = count > 1 ? std::sqrt(var / (count - 1)) : 0.0;
    run.points.push_back(point);
  }

  auto min_it = std::min_element(
      run.points.begin(), run.points.end(),
      [](const RephasePoint& a, const RephasePoint& b) { return a.mean_width < b.mean_width; });
  run.t_revival = min_it->t_rephase;
  return run;
}

BlochTrajectory bloch_trajectory(const RunConfig& config, int sample_index,
                                 const std::vector<double>& times) {
  const LatticeConfig lattice = config.lattice_config();
  const HubbardParams params = params_for(config);
  EnsembleSpec spec = config.ensemble_spec();
  if (sample_index < 0 || sample_index >= spec.n_samples)
    throw DomainError("bloch_trajectory: sample index out of range");
  const std::vector<ArrayState> samples = init_array(lattice, params, spec);

  Trajectory traj = evolve(samples[sample_index], params, lattice.gradient_e, 0.0, times);
  BlochTrajectory out;
  out.times = times;
  out.norm_drift_per_ms = traj.norm_drift_per_ms;
  for (const auto& state : traj.states) {
    const Quasimomentum q = quasimomentum(state);
    out.q_zone_fraction.push_back(q.defined ? q.zone_fraction
                                            : std::numeric_limits<double>::quiet_NaN());
    out.norm.push_back(state.norm());
    std::vector<double> dens(state.amplitudes.size());
    for (std::size_t i = 0; i < dens.size(); ++i) dens[i] = std::norm(state.amplitudes[i]);
    out.site_density.push_back(std::move(dens));
  }
  return out;
}

std::optional<double> sawtooth_period(const std::vector<double>& t,
                                      const std::vector<double>& q) {
  // wrap crossings: |dq| > 0.5 between neighbours, linear interpolation of
  // the crossing instant through the +-1/2 jump
  std::vector<double> crossings;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::isnan(q[i]) || std::isnan(q[i - 1])) continue;
    const double dq = q[i] - q[i - 1];
    if (std::abs(dq) > 0.5) {
      const double jump = dq > 0.0 ? dq - 1.0 : dq + 1.0;
      const double edge = dq > 0.0 ? -0.5 : 0.5;  // value approached before the wrap
      const double frac = jump != 0.0 ? (edge - q[i - 1]) / jump : 0.5;
      crossings.push_back(t[i - 1] + std::clamp(frac, 0.0, 1.0) * (t[i] - t[i - 1]));
    }
  }
  if (crossings.size() < 2) return std::nullopt;
  return (crossings.back() - crossings.front()) / (crossings.size() - 1);
}

}  // namespace blochsim
