#ifndef BLOCHSIM_ANALYSIS_HPP
#define BLOCHSIM_ANALYSIS_HPP

#include <array>
#include <functional>
#include <vector>

#include "blochsim/imaging.hpp"

namespace blochsim {

struct GaussPeak {
  double center = 0.0;
  double width = 1.0;      // Gaussian sigma
  double amplitude = 0.0;  // peak height
};

// Three narrow interference peaks plus one broad incoherent component on a
// constant baseline.
struct PeakModel {
  std::array<GaussPeak, 3> narrow;  // ordered left, center, right
  GaussPeak broad;
  double baseline = 0.0;

  double eval(double x) const;
  double narrow_area() const;
  double broad_area() const;
};

struct FitResult {
  PeakModel model;
  double residual_rms = 0.0;
  std::vector<double> variance;  // per-parameter, packed as the internal vector
  bool converged = false;
  int n_iterations = 0;
  bool identifiability_warning = false;  // broad width < 2x max narrow width
  double spacing = 0.0;                  // fitted side-peak separation
  double spacing_variance = 0.0;
  double center_variance = 0.0;
  std::array<double, 3> narrow_width_variance{};
  std::array<double, 3> narrow_amplitude_variance{};
};

// Damped Gauss-Newton decomposition of a profile into 3 narrow + 1 broad
// Gaussians.  `spacing_hint` is the kinematic side-peak separation; narrow
// centers stay within +-20% of it by construction.
FitResult fit_peaks(const DensityProfile& profile, double spacing_hint);

// Broad-peak area over total fitted area, clamped to [0, 1].
double incoherent_fraction(const FitResult& fit);

struct CentralWidth {
  double value = 0.0;          // central narrow sigma in units of the peak spacing (2 hbar k)
  bool kinematic_fallback = false;
};

// Central narrow width over the side-peak spacing; falls back to the
// kinematic spacing when the fitted one is unresolved.
CentralWidth central_width(const FitResult& fit, double kinematic_spacing);

struct CentralPeakFit {
  double center = 0.0;
  double width = 0.0;      // Gaussian sigma, same length unit as the profile
  double amplitude = 0.0;
  double baseline = 0.0;
  bool converged = false;
};

// Width-tracking measurement: a single Gaussian on a constant baseline,
// fitted over a window of +-0.45 spacing around the central peak.  Unlike
// the 3+1 decomposition this absorbs the incoherent pedestal into the
// Gaussian, so the width responds directly to contrast loss.
CentralPeakFit fit_central_peak(const DensityProfile& profile, double spacing_hint);

// Rms width of the central peak region (+-0.45 spacing around the central
// maximum), in units of the peak spacing.  Linear in the profile, so it
// averages cleanly over shots; for a Gaussian peak it equals the Gaussian
// sigma.  This is the width tracked through dephasing scans.
double central_moment_width(const DensityProfile& profile, double spacing_hint);

struct CoherenceScan {
  std::vector<double> times;   // s
  std::vector<double> widths;  // units of 2 hbar k
  double tau_c = 0.0;          // s
  double tau_c_err = 0.0;
  double w0 = 0.0, wf = 0.0;
  double w0_err = 0.0, wf_err = 0.0;
  bool converged = false;
  bool extrapolated = false;   // tau_c beyond the sampled window
  bool poor_fit = false;       // widths non-monotone beyond noise
};

// Three-parameter fit of w(t) = wf - (wf - w0) exp(-(t/tau)^2).
CoherenceScan fit_coherence_time(const std::vector<double>& times,
                                 const std::vector<double>& widths);

// ---------------------------------------------------------------------------
// Generic damped Gauss-Newton / Levenberg machinery (numeric Jacobian).

struct LsqOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-10;  // relative to the residual scale
  double relative_step = 1e-6;  // Jacobian differencing
  double lambda0 = 1e-3;
};

struct LsqResult {
  std::vector<double> params;
  std::vector<double> variance;  // sigma^2 estimates from SSR/(n-p) (J^T J)^-1
  double ssr = 0.0;
  bool converged = false;
  int n_iterations = 0;
};

using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;
using ClampFn = std::function<void(std::vector<double>&)>;

// Minimizes |r(p)|^2.  Accepted steps never increase the residual; `clamp`
// (optional) projects parameters back into their admissible box after each
// trial step.
LsqResult levenberg_least_squares(const ResidualFn& residuals, std::vector<double> p0,
                                  int n_residuals, const LsqOptions& options = {},
                                  const ClampFn& clamp = nullptr);

}  // namespace blochsim

#endif
