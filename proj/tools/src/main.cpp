// blochsim: simulator and analysis toolkit for Bloch-oscillation coherence
// of a condensate array in a tilted 1-D optical lattice.
//
// Subcommands map onto the standard measurement sequences: parameter tables,
// Bloch-oscillation runs with synthetic absorption profiles, squeezing
// calibration sweeps, coherence-time scans, and gradient-off rephasing.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blochsim/analysis.hpp"
#include "blochsim/config.hpp"
#include "blochsim/csv.hpp"
#include "blochsim/ensemble.hpp"
#include "blochsim/errors.hpp"
#include "blochsim/imaging.hpp"
#include "blochsim/lattice.hpp"
#include "blochsim/pipeline.hpp"
#include "blochsim/rng.hpp"
#include "blochsim/states.hpp"
#include "blochsim/version.hpp"

namespace fs = std::filesystem;
using namespace blochsim;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> workers;
  bool no_noise = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "configuration file (key = value sections)");
  cmd->add_option("--out", flags.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "override ensemble.seed");
  cmd->add_option("--samples", flags.samples, "override ensemble.n_samples");
  cmd->add_option("--workers", flags.workers, "worker thread cap");
  cmd->add_flag("--no-noise", flags.no_noise, "disable imaging noise");
}

RunConfig load_config(const CommonFlags& flags) {
  RunConfig config =
      flags.config_path.empty() ? RunConfig{} : parse_config_file(flags.config_path);
  if (flags.seed) config.ensemble.seed = *flags.seed;
  if (flags.samples) config.ensemble.n_samples = *flags.samples;
  if (flags.workers) config.analysis.workers = *flags.workers;
  if (flags.no_noise) {
    config.imaging.photon_shot = false;
    config.imaging.atom_shot = false;
  }
  config.validate();
  return config;
}

fs::path ensure_out_dir(const CommonFlags& flags) {
  fs::path dir(flags.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

// "A:B:STEP" inclusive sweep
std::vector<double> parse_range(const std::string& text) {
  double a = 0, b = 0, step = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0.0 ||
      b < a)
    throw ConfigError("range must be A:B:STEP with STEP > 0, got '" + text + "'");
  std::vector<double> values;
  for (double v = a; v <= b + 1e-9 * step; v += step) values.push_back(v);
  return values;
}

CsvWriter make_writer(std::vector<std::string> columns, const RunConfig& config) {
  return CsvWriter(std::move(columns), config_hash(config), config.ensemble.seed);
}

// ---------------------------------------------------------------------------

int cmd_init(const std::string& path) {
  const RunConfig defaults;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# blochsim run configuration (defaults written by `blochsim init`)\n"
      << serialize_config(defaults);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_params(const CommonFlags& flags, const std::string& depths_arg) {
  const RunConfig config = load_config(flags);
  const fs::path dir = ensure_out_dir(flags);

  std::vector<double> depths = depths_arg.empty()
                                   ? parse_range("5:24:0.5")
                                   : parse_range(depths_arg);

  CsvWriter csv = make_writer(
      {"depth_u", "gamma_hz", "g_beta_hz", "recoil_hz", "bloch_period_ms"}, config);
  for (double u : depths) {
    RunConfig c = config;
    c.lattice.depth_u = u;
    const HubbardParams p = derive_hubbard(c.lattice_config());
    csv.add_row({u, rad_to_hz(p.gamma), rad_to_hz(p.g_beta), rad_to_hz(p.recoil),
                 bloch_period(c.gradient_e()) / kMs});
  }
  csv.write((dir / "params.csv").string());

  const HubbardParams p0 = derive_hubbard(config.lattice_config());
  const ZenerAdvisory zener =
      zener_warning(p0, config.gradient_e(), config.analysis.zener_fraction);
  std::cout << "params.csv written (" << depths.size() << " depths)\n";
  if (zener.flagged)
    std::cout << "advisory: gradient exceeds " << config.analysis.zener_fraction
              << " of the band gap (ratio " << format_double(zener.ratio)
              << "); Landau-Zener loss likely\n";
  return 0;
}

void write_profile_csv(const DensityProfile& profile, const RunConfig& config,
                       const fs::path& path, double t_ms) {
  CsvWriter csv = make_writer({"x_um", "density"}, config);
  csv.add_meta("t_ms", format_double(t_ms));
  csv.add_meta("samples", std::to_string(profile.meta.samples));
  for (std::size_t i = 0; i < profile.x.size(); ++i)
    csv.add_row({profile.x[i] / kUm, profile.density[i]});
  csv.write(path.string());
}

int cmd_bloch(const CommonFlags& flags, const std::string& scan_arg, bool frames,
              bool wide) {
  const RunConfig config = load_config(flags);
  const fs::path dir = ensure_out_dir(flags);

  if (!scan_arg.empty()) {
    // width after a fixed hold vs gradient strength
    const std::vector<double> gradient_hz = parse_range(scan_arg);
    const double hold = config.times.t_bloch_ms * kMs;
    const GradientScan scan = width_vs_gradient(config, gradient_hz, hold);
    CsvWriter csv = make_writer(
        {"gradient_hz", "hold_ms", "mean_width_2hbark", "sem_width", "transform_limit"},
        config);
    for (const auto& pt : scan.points)
      csv.add_row({pt.gradient_hz, pt.hold_time / kMs, pt.mean_width, pt.sem_width,
                   scan.transform_limit});
    csv.write((dir / "width_vs_gradient.csv").string());
    std::cout << "width_vs_gradient.csv written (" << scan.points.size()
              << " gradients, transform limit "
              << format_double(scan.transform_limit) << ")\n";
    return 0;
  }

  // single-sample quasimomentum trajectory + ensemble-mean profiles
  const double period = bloch_period(config.gradient_e());
  const double t_end = config.times.t_bloch_ms * kMs;
  std::vector<double> traj_times;
  for (double t = 0.0; t <= t_end + 1e-12; t += period / 16.0) traj_times.push_back(t);

  const BlochTrajectory traj = bloch_trajectory(config, 0, traj_times);
  {
    std::vector<std::string> cols = {"t_ms", "q_zone_fraction", "norm"};
    if (wide)
      for (std::size_t i = 0; i < traj.site_density[0].size(); ++i)
        cols.push_back("site_" + std::to_string(i));
    CsvWriter csv = make_writer(cols, config);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      std::vector<double> row = {traj.times[k] / kMs, traj.q_zone_fraction[k],
                                 traj.norm[k]};
      if (wide)
        row.insert(row.end(), traj.site_density[k].begin(), traj.site_density[k].end());
      csv.add_row(row);
    }
    csv.write((dir / "trajectory.csv").string());
  }

  // profiles across one period (quarter-period sampling)
  const LatticeConfig lattice = config.lattice_config();
  const HubbardParams params = derive_hubbard(lattice);
  const ImagingConfig imaging = config.imaging_config();
  const EnsembleSpec spec = config.ensemble_spec();
  const auto samples = init_array(lattice, params, spec);

  std::vector<double> snap_times;
  for (int k = 0; k <= 4; ++k) snap_times.push_back(t_end + k * period / 4.0);

  std::vector<std::vector<DensityProfile>> per_time(snap_times.size());
  for (auto& v : per_time) v.resize(samples.size());
  parallel_for_samples(static_cast<int>(samples.size()), config.analysis.workers,
                       [&](int s) {
                         const Trajectory tr =
                             evolve(samples[s], params, lattice.gradient_e, 0.0, snap_times);
                         for (std::size_t k = 0; k < snap_times.size(); ++k) {
                           DensityProfile p = synthesize_profile(tr.states[k], imaging);
                           if (imaging.noise.photon_shot || imaging.noise.atom_shot)
                             p = add_noise(p, imaging,
                                           splitmix64(spec.master_seed ^
                                                      (0x30000u + s * 64u + k)));
                           per_time[k][s] = std::move(p);
                         }
                       });

  for (std::size_t k = 0; k < snap_times.size(); ++k) {
    DensityProfile mean = average_profiles(per_time[k]);
    mean.meta.config_hash = config_hash(config);
    mean.meta.seed = config.ensemble.seed;
    char name[64];
    std::snprintf(name, sizeof(name), "profile_%02zu.csv", k);
    write_profile_csv(mean, config, dir / name, snap_times[k] / kMs);
    if (frames) {
      std::snprintf(name, sizeof(name), "frame_%02zu.pgm", k);
      render_image(mean, config.imaging.image_transverse_width_um * kUm,
                   (dir / name).string());
    }
  }
  std::cout << "trajectory.csv and " << snap_times.size() << " profiles written\n";
  if (frames) std::cout << snap_times.size() << " PGM frames written\n";
  return 0;
}

int cmd_squeezing(const CommonFlags& flags, const std::string& depths_arg,
                  const std::string& model) {
  RunConfig config = load_config(flags);
  if (!model.empty()) config.ensemble.model = model;
  config.validate();
  const fs::path dir = ensure_out_dir(flags);

  const std::vector<double> depths =
      depths_arg.empty() ? parse_range("5:24:1") : parse_range(depths_arg);
  const auto table = squeezing_sweep(config, depths);

  CsvWriter csv = make_writer({"depth_u", "incoherent_fraction", "bogoliubov_depletion",
                               "sigma_s", "sigma_ratio"},
                              config);
  for (const auto& pt : table)
    csv.add_row({pt.depth_u, pt.incoherent_fraction, pt.depletion, pt.sigma_s,
                 pt.sigma_ratio});
  csv.write((dir / "squeezing.csv").string());
  std::cout << "squeezing.csv written (" << table.size() << " depths, model "
            << config.ensemble.model << ")\n";
  return 0;
}

int cmd_coherence(const CommonFlags& flags, const std::string& depths_arg) {
  const RunConfig config = load_config(flags);
  const fs::path dir = ensure_out_dir(flags);

  if (!depths_arg.empty()) {
    const std::vector<double> depths = parse_range(depths_arg);
    const auto table = coherence_vs_depth(config, depths);
    CsvWriter csv = make_writer(
        {"depth_u", "tau_pipeline_squeezed_ms", "tau_pipeline_coherent_ms",
         "tau_theory_squeezed_ms", "tau_theory_coherent_ms", "failed"},
        config);
    for (const auto& pt : table) {
      csv.add_row({pt.depth_u, pt.tau_pipeline_squeezed / kMs,
                   pt.tau_pipeline_coherent / kMs, pt.tau_theory_squeezed / kMs,
                   pt.tau_theory_coherent / kMs, pt.failed ? 1.0 : 0.0});
      if (pt.failed)
        std::cerr << "depth " << pt.depth_u << " failed: " << pt.failure << "\n";
    }
    csv.write((dir / "coherence_vs_depth.csv").string());
    std::cout << "coherence_vs_depth.csv written (" << table.size() << " depths)\n";
    return 0;
  }

  const CoherenceRun run =
      coherence_run(config, config.lattice.depth_u, config.regime());

  CsvWriter widths = make_writer({"t_ms", "mean_width", "sem_width"}, config);
  for (const auto& pt : run.widths)
    widths.add_row({pt.time / kMs, pt.mean_width, pt.sem_width});
  widths.write((dir / "widths.csv").string());

  CsvWriter fit = make_writer(
      {"tau_c_ms", "tau_c_err_ms", "w0", "w0_err", "wf", "wf_err", "tau_theory_ms",
       "sigma_used", "converged", "extrapolated", "poor_fit"},
      config);
  fit.add_row({run.scan.tau_c / kMs, run.scan.tau_c_err / kMs, run.scan.w0,
               run.scan.w0_err, run.scan.wf, run.scan.wf_err, run.tau_theory / kMs,
               run.sigma_used, run.scan.converged ? 1.0 : 0.0,
               run.scan.extrapolated ? 1.0 : 0.0, run.scan.poor_fit ? 1.0 : 0.0});
  fit.write((dir / "coherence_fit.csv").string());

  // order-parameter time series at the same statistics (theory overlay)
  {
    const double n = config.atoms.central_occupation;
    NumberStatistics stats =
        config.regime() == NumberRegime::coherent
            ? NumberStatistics::coherent(n)
            : NumberStatistics{n, run.sigma_used, config.regime()};
    const FockState state = make_fock_state(stats);
    CsvWriter series = make_writer({"t_ms", "re", "im", "abs"}, config);
    const double t_max = 2.5 * run.tau_theory;
    for (int k = 0; k <= 200; ++k) {
      const double t = t_max * k / 200.0;
      const std::complex<double> a = order_parameter(state, run.params.g_beta, t);
      series.add_row({t / kMs, a.real(), a.imag(), std::abs(a)});
    }
    series.write((dir / "order_parameter.csv").string());
  }

  std::printf("tau_c = %.3g +- %.2g ms (theory (gbeta sigma)^-1 = %.3g ms)\n",
              run.scan.tau_c / kMs, run.scan.tau_c_err / kMs, run.tau_theory / kMs);
  std::printf("w0 = %.4g, wf = %.4g (units of 2 hbar k); %s\n", run.scan.w0,
              run.scan.wf, run.scan.converged ? "fit converged" : "FIT NOT CONVERGED");
  if (!run.scan.converged) throw ConvergenceError("coherence-time fit did not converge");
  return 0;
}

int cmd_rephase(const CommonFlags& flags) {
  const RunConfig config = load_config(flags);
  const fs::path dir = ensure_out_dir(flags);

  const double t_bloch = config.times.t_bloch_ms * kMs;
  std::vector<double> grid;
  const double step = config.times.rephase_step_ms * kMs;
  for (double t = 0.0; t <= config.times.t_rephase_ms * kMs + 1e-12; t += step)
    grid.push_back(t);

  const RephaseRun run = rephase_run(config, t_bloch, grid);
  CsvWriter csv = make_writer({"t_rephase_ms", "mean_width", "sem_width"}, config);
  for (const auto& pt : run.points)
    csv.add_row({pt.t_rephase / kMs, pt.mean_width, pt.sem_width});
  csv.write((dir / "rephase.csv").string());

  // two-well exact overlay at matched parameters
  const HubbardParams p = derive_hubbard(config.lattice_config());
  const int n_total =
      std::max(4, static_cast<int>(config.atoms.central_occupation / 2.0));
  std::vector<double> t_grid;
  for (int k = 0; k < 1024; ++k)
    t_grid.push_back(config.times.t_rephase_ms * kMs * k / 1024.0);
  const TwoSiteResult dimer = two_site_exact(n_total, p.gamma, p.g_beta, t_grid);
  CsvWriter overlay = make_writer({"t_ms", "coherence_abs", "imbalance"}, config);
  overlay.add_meta("dominant_omega_rad_s", format_double(dimer.dominant_omega));
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    overlay.add_row({t_grid[k] / kMs, std::abs(dimer.coherence[k]), dimer.imbalance[k]});
  overlay.write((dir / "two_site.csv").string());

  std::printf("width minimum at t_rephase = %.3g ms (dephased width %.4g)\n",
              run.t_revival / kMs, run.dephased_width);
  std::printf("two-well spectral peak %.4g rad/s, sqrt(N gbeta gamma) = %.4g rad/s\n",
              dimer.dominant_omega,
              std::sqrt(config.atoms.central_occupation * p.g_beta * p.gamma));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch-oscillation coherence simulator for condensate arrays in a "
               "tilted optical lattice"};
  app.set_version_flag("--version", std::string(kArtifactName) + " " + kVersion);
  app.require_subcommand(1);

  auto* init = app.add_subcommand("init", "write a config file with all defaults");
  std::string init_path = "blochsim.conf";
  init->add_option("path", init_path, "destination file")->capture_default_str();

  CommonFlags params_flags;
  auto* params = app.add_subcommand("params", "Bose-Hubbard parameter table vs depth");
  add_common(params, params_flags);
  std::string params_depths;
  params->add_option("--depths", params_depths, "depth sweep A:B:STEP (units of E_R)");

  CommonFlags bloch_flags;
  auto* bloch = app.add_subcommand("bloch", "Bloch-oscillation run: trajectory + profiles");
  add_common(bloch, bloch_flags);
  std::string scan_gradient;
  bool frames = false, wide = false;
  bloch->add_option("--scan-gradient", scan_gradient,
                    "width-vs-gradient scan A:B:STEP in Hz (uses t_bloch as hold)");
  bloch->add_flag("--frames", frames, "write PGM frames");
  bloch->add_flag("--wide", wide, "per-site densities in trajectory.csv");

  CommonFlags squeezing_flags;
  auto* squeezing =
      app.add_subcommand("squeezing", "incoherent fraction and depletion vs depth");
  add_common(squeezing, squeezing_flags);
  std::string squeezing_depths, squeezing_model;
  squeezing->add_option("--depths", squeezing_depths, "depth sweep A:B:STEP");
  squeezing->add_option("--model", squeezing_model,
                        "initial statistics: coherent | squeezed | fock");

  CommonFlags coherence_flags;
  auto* coherence =
      app.add_subcommand("coherence", "width-decay scan and coherence-time fit");
  add_common(coherence, coherence_flags);
  std::string coherence_depths;
  coherence->add_option("--depths", coherence_depths,
                        "sweep depths and fit tau_c at each (overlay table)");

  CommonFlags rephase_flags;
  auto* rephase =
      app.add_subcommand("rephase", "gradient-off revival scan after dephasing");
  add_common(rephase, rephase_flags);

  try {
    app.parse(argc, argv);
    if (init->parsed()) return cmd_init(init_path);
    if (params->parsed()) return cmd_params(params_flags, params_depths);
    if (bloch->parsed()) return cmd_bloch(bloch_flags, scan_gradient, frames, wide);
    if (squeezing->parsed())
      return cmd_squeezing(squeezing_flags, squeezing_depths, squeezing_model);
    if (coherence->parsed()) return cmd_coherence(coherence_flags, coherence_depths);
    if (rephase->parsed()) return cmd_rephase(rephase_flags);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
