#ifndef BLOCHSIM_PIPELINE_HPP
#define BLOCHSIM_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "blochsim/analysis.hpp"
#include "blochsim/config.hpp"
#include "blochsim/ensemble.hpp"
#include "blochsim/imaging.hpp"

namespace blochsim {

// End-to-end runs shared by the CLI subcommands and the acceptance suite.
// Every function is deterministic in (config, seed) and independent of the
// worker count.

struct WidthStats {
  double time = 0.0;         // s
  double mean_width = 0.0;   // units of 2 hbar k
  double sem_width = 0.0;
};

// Per-sample pipeline at a sequence of hold times: evolve under the tilt,
// synthesize the time-of-flight profile, fit, convert the central width.
// Widths are averaged over samples (per-shot fits, like repeated images).
std::vector<WidthStats> width_vs_time(const RunConfig& config, double depth_u,
                                      NumberRegime regime,
                                      const std::vector<double>& times);

// Stroboscopic grid k * step_periods * T covering [0, t_end].
std::vector<double> stroboscopic_times(double t_end, double bloch_period,
                                       double step_periods);

struct CoherenceRun {
  std::vector<WidthStats> widths;
  CoherenceScan scan;
  double tau_theory = 0.0;     // (gbeta sigma)^(-1) at the central occupation
  double sigma_used = 0.0;
  HubbardParams params;
};

// Fig.-2B style run at one depth: width tracking plus the w(t) fit.
CoherenceRun coherence_run(const RunConfig& config, double depth_u, NumberRegime regime);

struct CoherenceDepthPoint {
  double depth_u = 0.0;
  double tau_pipeline_squeezed = 0.0;   // s
  double tau_pipeline_coherent = 0.0;   // s
  double tau_theory_squeezed = 0.0;
  double tau_theory_coherent = 0.0;
  bool failed = false;
  std::string failure;
};

// Fig.-2C: pipeline and closed-form coherence times under both initial
// statistics, per depth.  Per-depth failures are collected, not fatal.
std::vector<CoherenceDepthPoint> coherence_vs_depth(const RunConfig& config,
                                                    const std::vector<double>& depths);

struct SqueezingPoint {
  double depth_u = 0.0;
  double incoherent_fraction = 0.0;  // ensemble-mean profile, 3+1 Gaussian fit
  double depletion = 0.0;            // Bogoliubov closed form
  double sigma_s = 0.0;
  double sigma_ratio = 0.0;          // sqrt(N)/sigma_S
};

// Fig.-2A: interference right after preparation (no hold), fraction vs depth.
std::vector<SqueezingPoint> squeezing_sweep(const RunConfig& config,
                                            const std::vector<double>& depths);

struct GradientScanPoint {
  double gradient_hz = 0.0;
  double mean_width = 0.0;
  double sem_width = 0.0;
  double hold_time = 0.0;  // actual (stroboscopic) hold, s
};

struct GradientScan {
  std::vector<GradientScanPoint> points;
  double transform_limit = 0.0;  // width of the clean phase-locked profile
};

// Fig.-1C: width after a fixed hold vs gradient strength.
GradientScan width_vs_gradient(const RunConfig& config,
                               const std::vector<double>& gradient_hz,
                               double hold_time);

struct RephasePoint {
  double t_rephase = 0.0;  // s
  double mean_width = 0.0;
  double sem_width = 0.0;
};

struct RephaseRun {
  std::vector<RephasePoint> points;
  double dephased_width = 0.0;  // width at the end of the tilted hold
  double t_revival = 0.0;       // argmin of the width
};

// Fig. 4: dephase under the tilt for t_bloch, then keep tunneling on with the
// gradient off and track the width vs continued hold time.
RephaseRun rephase_run(const RunConfig& config, double t_bloch,
                       const std::vector<double>& t_rephase_grid);

// Bloch-oscillation trajectory of a single sample (quasimomentum + norm).
struct BlochTrajectory {
  std::vector<double> times;
  std::vector<double> q_zone_fraction;
  std::vector<double> norm;
  std::vector<std::vector<double>> site_density;  // |a_i|^2 per snapshot
  double norm_drift_per_ms = 0.0;
};

BlochTrajectory bloch_trajectory(const RunConfig& config, int sample_index,
                                 const std::vector<double>& times);

// Sawtooth period of a quasimomentum trace via wrap-crossing spacing.
std::optional<double> sawtooth_period(const std::vector<double>& t,
                                      const std::vector<double>& q);

}  // namespace blochsim

#endif
