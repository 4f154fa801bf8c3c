#include "blochsim/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "blochsim/errors.hpp"

namespace blochsim {

namespace {

double gauss(double x, double center, double sigma, double amplitude) {
  const double z = (x - center) / sigma;
  return amplitude * std::exp(-0.5 * z * z);
}

}  // namespace

double PeakModel::eval(double x) const {
  double y = baseline;
  for (const auto& p : narrow) y += gauss(x, p.center, p.width, p.amplitude);
  y += gauss(x, broad.center, broad.width, broad.amplitude);
  return y;
}

double PeakModel::narrow_area() const {
  double a = 0.0;
  for (const auto& p : narrow) a += std::abs(p.amplitude) * p.width;
  return std::sqrt(kTwoPi) * a;
}

double PeakModel::broad_area() const {
  return std::sqrt(kTwoPi) * std::abs(broad.amplitude) * broad.width;
}

LsqResult levenberg_least_squares(const ResidualFn& residuals, std::vector<double> p0,
                                  int n_residuals, const LsqOptions& options,
                                  const ClampFn& clamp) {
  const int n_params = static_cast<int>(p0.size());
  std::vector<double> r(n_residuals), r_trial(n_residuals), r_step(n_residuals);

  auto ssr_of = [&](const std::vector<double>& res) {
    double s = 0.0;
    for (double v : res) s += v * v;
    return s;
  };

  if (clamp) clamp(p0);
  residuals(p0, r);
  double ssr = ssr_of(r);

  Eigen::MatrixXd jac(n_residuals, n_params);
  double lambda = options.lambda0;
  bool converged = false;
  int iter = 0;
  int stall = 0;

  // Stopping rules, any of which counts as convergence:
  //  - relative gradient below gradient_tol
  //  - relative SSR improvement below 1e-10 on an accepted step, or below
  //    1e-8 for eight accepted steps in a row (slow crawl)
  //  - stationary point (no trial step improves, damping escalated away)
  // Running out of iterations leaves converged = false with best-so-far params.
  for (; iter < options.max_iterations; ++iter) {
    // forward-difference Jacobian, relative step per parameter
    for (int j = 0; j < n_params; ++j) {
      std::vector<double> p_step = p0;
      const double h = options.relative_step * std::max(std::abs(p0[j]), 1e-12);
      p_step[j] += h;
      residuals(p_step, r_step);
      for (int i = 0; i < n_residuals; ++i) jac(i, j) = (r_step[i] - r[i]) / h;
    }

    Eigen::VectorXd rv = Eigen::Map<Eigen::VectorXd>(r.data(), n_residuals);
    Eigen::VectorXd g = jac.transpose() * rv;

    const double scale = std::max(ssr, 1e-300);
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tol * std::max(1.0, scale)) {
      converged = true;
      break;
    }

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    bool accepted = false;
    for (int attempt = 0; attempt < 14; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      for (int j = 0; j < n_params; ++j)
        damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      Eigen::VectorXd delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> p_trial = p0;
      for (int j = 0; j < n_params; ++j) p_trial[j] += delta(j);
      if (clamp) clamp(p_trial);
      residuals(p_trial, r_trial);
      const double ssr_trial = ssr_of(r_trial);
      if (std::isfinite(ssr_trial) && ssr_trial <= ssr) {
        // accepted steps never increase the residual
        const double rel_improvement = (ssr - ssr_trial) / std::max(ssr, 1e-300);
        p0 = std::move(p_trial);
        r.swap(r_trial);
        ssr = ssr_trial;
        lambda = std::max(lambda * 0.1, 1e-14);
        accepted = true;
        stall = rel_improvement < 1e-8 ? stall + 1 : 0;
        if (rel_improvement < 1e-10 || stall >= 8 || ssr < 1e-280) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      converged = std::isfinite(ssr);  // stationary to machine precision
      break;
    }
    if (converged) break;
  }

  LsqResult out;
  out.params = p0;
  out.ssr = ssr;
  out.converged = converged;
  out.n_iterations = iter + 1;

  // covariance from the final Jacobian
  for (int j = 0; j < n_params; ++j) {
    std::vector<double> p_step = p0;
    const double h = options.relative_step * std::max(std::abs(p0[j]), 1e-12);
    p_step[j] += h;
    residuals(p_step, r_step);
    for (int i = 0; i < n_residuals; ++i) jac(i, j) = (r_step[i] - r[i]) / h;
  }
  const int dof = std::max(1, n_residuals - n_params);
  const double sigma2 = ssr / dof;
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse() * sigma2;
  out.variance.resize(n_params);
  for (int j = 0; j < n_params; ++j) out.variance[j] = std::max(cov(j, j), 0.0);
  return out;
}

namespace {

// Internal fit parameterization:
//   [0] central narrow center
//   [1] side-peak spacing (clamped to hint * [0.8, 1.2])
//   [2..4] narrow sigmas (left, center, right)
//   [5..7] narrow amplitudes
//   [8] broad center, [9] broad sigma, [10] broad amplitude, [11] baseline
constexpr int kNumPeakParams = 12;

void peak_model_from_params(const std::vector<double>& p, PeakModel& m) {
  const double xc = p[0], s = p[1];
  m.narrow[0] = {xc - s, std::abs(p[2]), p[5]};
  m.narrow[1] = {xc, std::abs(p[3]), p[6]};
  m.narrow[2] = {xc + s, std::abs(p[4]), p[7]};
  m.broad = {p[8], std::abs(p[9]), p[10]};
  m.baseline = p[11];
}

struct SmoothedMax {
  double position = 0.0;
  double value = 0.0;
};

SmoothedMax smoothed_maximum(const DensityProfile& profile, double smooth_sigma_px,
                             double x_lo, double x_hi) {
  std::vector<double> y = profile.density;
  const int n = static_cast<int>(y.size());
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * smooth_sigma_px)));
  std::vector<double> smooth(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0, wsum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
      const int src = i + j;
      if (src < 0 || src >= n) continue;
      const double w = std::exp(-0.5 * j * j / (smooth_sigma_px * smooth_sigma_px));
      acc += w * y[src];
      wsum += w;
    }
    smooth[i] = acc / wsum;
  }
  SmoothedMax best;
  bool found = false;
  for (int i = 0; i < n; ++i) {
    if (profile.x[i] < x_lo || profile.x[i] > x_hi) continue;
    if (!found || smooth[i] > best.value) {
      best = {profile.x[i], smooth[i]};
      found = true;
    }
  }
  return best;
}

}  // namespace

FitResult fit_peaks(const DensityProfile& profile, double spacing_hint) {
  const int n = static_cast<int>(profile.density.size());
  if (n < 2 * kNumPeakParams)
    throw DomainError("fit_peaks: profile too short");
  if (!(spacing_hint > 0.0))
    throw DomainError("fit_peaks: spacing hint must be positive");
  const double x_min = profile.x.front(), x_max = profile.x.back();
  if (x_max - x_min < 2.0 * spacing_hint)
    throw DomainError("fit_peaks: profile does not cover the three peak locations");

  const double px = profile.x[1] - profile.x[0];
  const double smooth_px = std::max(1.0, spacing_hint / (12.0 * px));

  // Initialization: the tallest smoothed peak near the profile centroid is
  // the central narrow peak; sides sit one spacing away.
  double total = 0.0, centroid = 0.0;
  for (int i = 0; i < n; ++i) {
    total += profile.density[i];
    centroid += profile.density[i] * profile.x[i];
  }
  centroid = total > 0.0 ? centroid / total : 0.0;

  SmoothedMax central =
      smoothed_maximum(profile, smooth_px, centroid - 0.6 * spacing_hint,
                       centroid + 0.6 * spacing_hint);

  std::vector<double> p0(kNumPeakParams);
  p0[0] = central.position;
  p0[1] = spacing_hint;
  p0[2] = p0[3] = p0[4] = std::max(2.0 * px, spacing_hint / 40.0);
  const double base0 = *std::min_element(profile.density.begin(), profile.density.end());
  const double broad_sigma0 = 0.5 * spacing_hint;
  const double broad_amp0 = std::max(0.1 * (central.value - base0), 1e-12);
  for (int side = 0; side < 3; ++side) {
    const double cx = central.position + (side - 1) * spacing_hint;
    SmoothedMax m = smoothed_maximum(profile, smooth_px, cx - 0.3 * spacing_hint,
                                     cx + 0.3 * spacing_hint);
    p0[5 + side] = std::max(m.value - base0 - broad_amp0, 1e-12);
  }
  p0[8] = centroid;
  p0[9] = broad_sigma0;
  p0[10] = broad_amp0;
  p0[11] = base0;

  // identifiability: narrow widths and the broad width live on separated
  // scales (the model class is otherwise degenerate)
  const double min_width = 0.3 * px;
  const double max_narrow = 0.18 * spacing_hint;
  const double min_broad = 0.3 * spacing_hint;
  auto clamp = [&](std::vector<double>& p) {
    p[1] = std::clamp(p[1], 0.8 * spacing_hint, 1.2 * spacing_hint);
    for (int j : {2, 3, 4}) p[j] = std::clamp(std::abs(p[j]), min_width, max_narrow);
    p[9] = std::clamp(std::abs(p[9]), min_broad, x_max - x_min);
  };

  auto residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
    PeakModel m;
    peak_model_from_params(p, m);
    for (int i = 0; i < n; ++i) r[i] = m.eval(profile.x[i]) - profile.density[i];
  };

  LsqResult lsq = levenberg_least_squares(residuals, p0, n, {}, clamp);

  FitResult fit;
  peak_model_from_params(lsq.params, fit.model);
  fit.converged = lsq.converged;
  fit.n_iterations = lsq.n_iterations;
  fit.residual_rms = std::sqrt(lsq.ssr / n);
  fit.variance = lsq.variance;
  fit.spacing = lsq.params[1];
  fit.spacing_variance = lsq.variance[1];
  fit.center_variance = lsq.variance[0];
  for (int k = 0; k < 3; ++k) {
    fit.narrow_width_variance[k] = lsq.variance[2 + k];
    fit.narrow_amplitude_variance[k] = lsq.variance[5 + k];
  }

  const double widest_narrow =
      std::max({fit.model.narrow[0].width, fit.model.narrow[1].width,
                fit.model.narrow[2].width});
  fit.identifiability_warning = fit.model.broad.width < 2.0 * widest_narrow;
  return fit;
}

double incoherent_fraction(const FitResult& fit) {
  if (!fit.converged)
    throw DomainError("incoherent_fraction: fit did not converge");
  double broad = std::sqrt(kTwoPi) * fit.model.broad.amplitude * fit.model.broad.width;
  double narrow = 0.0;
  for (const auto& p : fit.model.narrow)
    narrow += std::sqrt(kTwoPi) * p.amplitude * p.width;
  // negative fitted amplitudes clamp to zero area
  broad = std::max(broad, 0.0);
  narrow = std::max(narrow, 0.0);
  const double total = broad + narrow;
  if (total <= 0.0) return 0.0;
  return std::clamp(broad / total, 0.0, 1.0);
}

CentralWidth central_width(const FitResult& fit, double kinematic_spacing) {
  if (!fit.converged)
    throw DomainError("central_width: fit did not converge");
  CentralWidth w;
  double spacing = fit.spacing;
  // side peaks too weak to pin the spacing -> kinematic fallback
  const double side_amp = std::max(fit.model.narrow[0].amplitude,
                                   fit.model.narrow[2].amplitude);
  const double side_err = std::sqrt(std::max(fit.narrow_amplitude_variance[0],
                                             fit.narrow_amplitude_variance[2]));
  const double central_amp = std::abs(fit.model.narrow[1].amplitude);
  if (spacing <= 0.0 || side_amp < 3.0 * side_err ||
      side_amp < 1e-3 * central_amp) {
    spacing = kinematic_spacing;
    w.kinematic_fallback = true;
  }
  w.value = fit.model.narrow[1].width / spacing;
  return w;
}

CentralPeakFit fit_central_peak(const DensityProfile& profile, double spacing_hint) {
  const int n = static_cast<int>(profile.density.size());
  if (n < 16) throw DomainError("fit_central_peak: profile too short");
  if (!(spacing_hint > 0.0))
    throw DomainError("fit_central_peak: spacing hint must be positive");

  // locate the central peak: brightest pixel within the central zone
  int peak_idx = -1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(profile.x[i]) > 0.75 * spacing_hint) continue;
    if (peak_idx < 0 || profile.density[i] > profile.density[peak_idx]) peak_idx = i;
  }
  if (peak_idx < 0) throw DomainError("fit_central_peak: no pixels in the central zone");
  const double x_peak = profile.x[peak_idx];

  std::vector<double> xs, ys;
  for (int i = 0; i < n; ++i) {
    if (std::abs(profile.x[i] - x_peak) > 0.45 * spacing_hint) continue;
    xs.push_back(profile.x[i]);
    ys.push_back(profile.density[i]);
  }
  const int m = static_cast<int>(xs.size());
  if (m < 8) throw DomainError("fit_central_peak: window too small");

  const double px = profile.x[1] - profile.x[0];
  const double y_min = *std::min_element(ys.begin(), ys.end());
  const double y_max = *std::max_element(ys.begin(), ys.end());

  auto residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (int i = 0; i < m; ++i)
      r[i] = gauss(xs[i], p[0], p[1], p[2]) + p[3] - ys[i];
  };
  auto clamp = [&](std::vector<double>& p) {
    p[0] = std::clamp(p[0], x_peak - 0.25 * spacing_hint, x_peak + 0.25 * spacing_hint);
    p[1] = std::clamp(std::abs(p[1]), 0.3 * px, 0.6 * spacing_hint);
    p[2] = std::max(p[2], 0.0);
  };
  std::vector<double> p0 = {x_peak, std::max(2.0 * px, spacing_hint / 40.0),
                            std::max(y_max - y_min, 1e-12), y_min};
  LsqResult lsq = levenberg_least_squares(residuals, p0, m, {}, clamp);

  CentralPeakFit fit;
  fit.center = lsq.params[0];
  fit.width = std::abs(lsq.params[1]);
  fit.amplitude = lsq.params[2];
  fit.baseline = lsq.params[3];
  fit.converged = lsq.converged;
  return fit;
}

double central_moment_width(const DensityProfile& profile, double spacing_hint) {
  const int n = static_cast<int>(profile.density.size());
  if (n < 16) throw DomainError("central_moment_width: profile too short");
  if (!(spacing_hint > 0.0))
    throw DomainError("central_moment_width: spacing hint must be positive");

  int peak_idx = -1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(profile.x[i]) > 0.75 * spacing_hint) continue;
    if (peak_idx < 0 || profile.density[i] > profile.density[peak_idx]) peak_idx = i;
  }
  if (peak_idx < 0)
    throw DomainError("central_moment_width: no pixels in the central zone");
  const double x_peak = profile.x[peak_idx];

  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = profile.x[i] - x_peak;
    if (std::abs(dx) > 0.45 * spacing_hint) continue;
    const double w = std::max(profile.density[i], 0.0);
    m0 += w;
    m1 += w * dx;
    m2 += w * dx * dx;
  }
  if (m0 <= 0.0) throw DomainError("central_moment_width: empty window");
  const double mean = m1 / m0;
  const double var = std::max(m2 / m0 - mean * mean, 0.0);
  return std::sqrt(var) / spacing_hint;
}

CoherenceScan fit_coherence_time(const std::vector<double>& times,
                                 const std::vector<double>& widths) {
  if (times.size() != widths.size())
    throw DomainError("fit_coherence_time: size mismatch");
  if (times.size() < 5)
    throw DomainError("fit_coherence_time: need at least 5 time points");

  const int n = static_cast<int>(times.size());
  const double w_min = *std::min_element(widths.begin(), widths.end());
  const double w_max = *std::max_element(widths.begin(), widths.end());
  const double t_max = *std::max_element(times.begin(), times.end());

  // params: [w0, wf, tau]
  auto residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
    for (int i = 0; i < n; ++i) {
      const double z = times[i] / p[2];
      r[i] = p[1] - (p[1] - p[0]) * std::exp(-z * z) - widths[i];
    }
  };
  auto clamp = [&](std::vector<double>& p) {
    p[0] = std::max(p[0], 1e-12);
    p[1] = std::max(p[1], p[0] * (1.0 + 1e-9));
    p[2] = std::clamp(p[2], 1e-6 * std::max(t_max, 1e-12), 100.0 * std::max(t_max, 1e-12));
  };

  std::vector<double> p0 = {std::max(w_min, 1e-12),
                            std::max(w_max, 2e-12),
                            std::max(0.5 * t_max, 1e-9)};
  LsqResult lsq = levenberg_least_squares(residuals, p0, n, {}, clamp);

  CoherenceScan scan;
  scan.times = times;
  scan.widths = widths;
  scan.w0 = lsq.params[0];
  scan.wf = lsq.params[1];
  scan.tau_c = lsq.params[2];
  scan.w0_err = std::sqrt(lsq.variance[0]);
  scan.wf_err = std::sqrt(lsq.variance[1]);
  scan.tau_c_err = std::sqrt(lsq.variance[2]);
  scan.converged = lsq.converged;
  scan.extrapolated = scan.tau_c > t_max / 1.5;

  // widths decreasing beyond the fit scatter -> poor-fit warning; the
  // scatter scale is the median absolute residual so a single deep dip
  // cannot mask itself
  std::vector<double> abs_res(n);
  {
    std::vector<double> r(n);
    residuals({scan.w0, scan.wf, scan.tau_c}, r);
    for (int i = 0; i < n; ++i) abs_res[i] = std::abs(r[i]);
    std::nth_element(abs_res.begin(), abs_res.begin() + n / 2, abs_res.end());
  }
  const double scatter = abs_res[n / 2];
  double worst_drop = 0.0;
  double running_max = widths[0];
  for (int i = 1; i < n; ++i) {
    worst_drop = std::max(worst_drop, running_max - widths[i]);
    running_max = std::max(running_max, widths[i]);
  }
  scan.poor_fit = worst_drop > 6.0 * scatter + 1e-9 * std::abs(scan.wf);
  return scan;
}

}  // namespace blochsim
