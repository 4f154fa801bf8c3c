#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "blochsim/analysis.hpp"
#include "blochsim/constants.hpp"
#include "blochsim/errors.hpp"
#include "blochsim/rng.hpp"

using namespace blochsim;

namespace {

// synthetic 3+1 profile on the standard grid; the model class is its own
// round-trip oracle
DensityProfile profile_from_model(const PeakModel& m, int n_px = 257,
                                  double pixel = 2.0 * kUm) {
  DensityProfile p;
  p.x.resize(n_px);
  p.density.resize(n_px);
  for (int i = 0; i < n_px; ++i) {
    p.x[i] = (i - (n_px - 1) / 2.0) * pixel;
    p.density[i] = m.eval(p.x[i]);
  }
  return p;
}

PeakModel reference_model(double spacing) {
  PeakModel m;
  m.narrow[0] = {-spacing, 3.2 * kUm, 140.0};
  m.narrow[1] = {0.0, 2.8 * kUm, 400.0};
  m.narrow[2] = {spacing, 3.5 * kUm, 150.0};
  m.broad = {4.0 * kUm, 55.0 * kUm, 60.0};
  m.baseline = 0.0;
  return m;
}

constexpr double kSpacing = 129.33 * kUm;

}  // namespace

TEST_CASE("noiseless synthetic profile is recovered to 1e-6 relative") {
  const PeakModel truth = reference_model(kSpacing);
  const DensityProfile p = profile_from_model(truth);
  const FitResult fit = fit_peaks(p, kSpacing);
  REQUIRE(fit.converged);

  for (int k = 0; k < 3; ++k) {
    CHECK(fit.model.narrow[k].width ==
          doctest::Approx(truth.narrow[k].width).epsilon(1e-6));
    CHECK(fit.model.narrow[k].amplitude ==
          doctest::Approx(truth.narrow[k].amplitude).epsilon(1e-6));
    CHECK(std::abs(fit.model.narrow[k].center - truth.narrow[k].center) <
          1e-6 * kSpacing);
  }
  CHECK(fit.model.broad.width == doctest::Approx(truth.broad.width).epsilon(1e-6));
  CHECK(fit.model.broad.amplitude ==
        doctest::Approx(truth.broad.amplitude).epsilon(1e-6));
  CHECK(fit.residual_rms < 1e-6 * 400.0);
  CHECK_FALSE(fit.identifiability_warning);
}

TEST_CASE("Poisson noise at 1500 atoms: central width recovered within 10% (MC)") {
  // Mostly coherent shot: ~60% of the atoms in the central peak.  The
  // tracked observable is the central narrow width; at 1500 atoms per shot
  // its Cramer-Rao floor is ~4.5%, so a 10% tolerance holds 95+ of 100
  // trials.  (The broad width holds only ~250 atoms here; its floor alone
  // is near 10%, so it is reported but not gated.)
  const double total = 1500.0;
  const double wc = 5.0 * kUm, ws = 5.75 * kUm, wb = 55.0 * kUm;
  PeakModel truth;
  truth.narrow[0] = {-kSpacing, ws, 0.14 * total / (std::sqrt(kTwoPi) * ws / (2.0 * kUm))};
  truth.narrow[1] = {0.0, wc, 0.60 * total / (std::sqrt(kTwoPi) * wc / (2.0 * kUm))};
  truth.narrow[2] = {kSpacing, 1.08 * ws,
                     0.93 * 0.14 * total / (std::sqrt(kTwoPi) * ws / (2.0 * kUm))};
  truth.broad = {4.0 * kUm, wb, 0.12 * total / (std::sqrt(kTwoPi) * wb / (2.0 * kUm))};
  const DensityProfile clean = profile_from_model(truth);

  ImagingConfig img;
  img.onsite_width = 50e-9;
  img.noise.photon_shot = true;
  img.noise.atom_shot = false;

  int pass = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const DensityProfile noisy = add_noise(clean, img, 9000 + t);
    try {
      const FitResult fit = fit_peaks(noisy, kSpacing);
      if (!fit.converged) continue;
      const double err =
          std::abs(fit.model.narrow[1].width - truth.narrow[1].width) /
          truth.narrow[1].width;
      if (err < 0.10) ++pass;
    } catch (const std::exception&) {
    }
  }
  CHECK(pass >= 95);
}

TEST_CASE("pure broad input leaves the narrow amplitudes consistent with zero") {
  PeakModel truth;
  truth.narrow[0] = {-kSpacing, 3.0 * kUm, 0.0};
  truth.narrow[1] = {0.0, 3.0 * kUm, 0.0};
  truth.narrow[2] = {kSpacing, 3.0 * kUm, 0.0};
  truth.broad = {0.0, 60.0 * kUm, 200.0};
  truth.baseline = 0.0;
  const DensityProfile p = profile_from_model(truth);
  const FitResult fit = fit_peaks(p, kSpacing);
  REQUIRE(fit.converged);
  for (int k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(fit.narrow_amplitude_variance[k]);
    CHECK(std::abs(fit.model.narrow[k].amplitude) <=
          std::max(2.0 * sigma, 1e-6 * truth.broad.amplitude));
  }
  CHECK(incoherent_fraction(fit) > 0.999);
}

TEST_CASE("fit is translation covariant") {
  const PeakModel truth = reference_model(kSpacing);
  DensityProfile p = profile_from_model(truth, 301);
  const FitResult base = fit_peaks(p, kSpacing);

  // integer-pixel shift keeps the discretization identical
  const int shift_px = 7;
  const double pixel = p.x[1] - p.x[0];
  DensityProfile shifted = p;
  for (auto& x : shifted.x) x += shift_px * pixel;
  const FitResult moved = fit_peaks(shifted, kSpacing);
  REQUIRE(base.converged);
  REQUIRE(moved.converged);

  const double dx = shift_px * pixel;
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(moved.model.narrow[k].center - base.model.narrow[k].center - dx) <
          1e-8 * kSpacing);
    CHECK(moved.model.narrow[k].width ==
          doctest::Approx(base.model.narrow[k].width).epsilon(1e-8));
    CHECK(moved.model.narrow[k].amplitude ==
          doctest::Approx(base.model.narrow[k].amplitude).epsilon(1e-8));
  }
  CHECK(std::abs(moved.model.broad.center - base.model.broad.center - dx) <
        1e-8 * kSpacing);
}

TEST_CASE("fit is scale equivariant") {
  const PeakModel truth = reference_model(kSpacing);
  const DensityProfile p = profile_from_model(truth);
  const double c = 37.5;
  DensityProfile scaled = p;
  for (auto& d : scaled.density) d *= c;

  const FitResult base = fit_peaks(p, kSpacing);
  const FitResult big = fit_peaks(scaled, kSpacing);
  REQUIRE(base.converged);
  REQUIRE(big.converged);
  for (int k = 0; k < 3; ++k) {
    CHECK(big.model.narrow[k].amplitude ==
          doctest::Approx(c * base.model.narrow[k].amplitude).epsilon(1e-8));
    CHECK(big.model.narrow[k].width ==
          doctest::Approx(base.model.narrow[k].width).epsilon(1e-8));
    CHECK(big.model.narrow[k].center ==
          doctest::Approx(base.model.narrow[k].center).epsilon(1e-8));
  }
  CHECK(incoherent_fraction(big) ==
        doctest::Approx(incoherent_fraction(base)).epsilon(1e-8));
}

TEST_CASE("incoherent fraction arithmetic") {
  FitResult fit;
  fit.converged = true;
  fit.model.narrow[0] = {-kSpacing, 3.0 * kUm, 0.0};
  fit.model.narrow[1] = {0.0, 3.0 * kUm, 0.0};
  fit.model.narrow[2] = {kSpacing, 3.0 * kUm, 0.0};
  fit.model.broad = {0.0, 60.0 * kUm, 0.0};

  // no broad component -> 0
  fit.model.narrow[1].amplitude = 100.0;
  CHECK(incoherent_fraction(fit) == 0.0);

  // equal areas -> 1/2
  fit.model.broad.amplitude = 100.0 * (3.0 / 60.0);
  CHECK(incoherent_fraction(fit) == doctest::Approx(0.5).epsilon(1e-12));

  // negative narrow amplitude clamps
  fit.model.narrow[1].amplitude = -5.0;
  CHECK(incoherent_fraction(fit) == doctest::Approx(1.0).epsilon(1e-12));

  fit.converged = false;
  CHECK_THROWS_AS(incoherent_fraction(fit), DomainError);
}

TEST_CASE("central width conversion and kinematic fallback") {
  FitResult fit;
  fit.converged = true;
  fit.spacing = 100.0 * kUm;
  fit.model.narrow[0] = {-100.0 * kUm, 4.0 * kUm, 120.0};
  fit.model.narrow[1] = {0.0, 50.0 * kUm, 300.0};
  fit.model.narrow[2] = {100.0 * kUm, 4.0 * kUm, 120.0};
  fit.model.broad = {0.0, 80.0 * kUm, 10.0};

  // width equal to half the spacing -> 0.5
  const CentralWidth w = central_width(fit, 90.0 * kUm);
  CHECK_FALSE(w.kinematic_fallback);
  CHECK(w.value == doctest::Approx(0.5).epsilon(1e-12));

  // unresolved side peaks -> kinematic spacing with the flag set
  fit.model.narrow[0].amplitude = 0.0;
  fit.model.narrow[2].amplitude = 0.0;
  fit.narrow_amplitude_variance = {1.0, 1.0, 1.0};
  const CentralWidth wk = central_width(fit, 90.0 * kUm);
  CHECK(wk.kinematic_fallback);
  CHECK(wk.value == doctest::Approx(50.0 / 90.0).epsilon(1e-12));
}

TEST_CASE("coherence-time fit: exact round trip") {
  const double w0 = 0.02, wf = 0.08, tau = 14.2e-3;
  std::vector<double> t, w;
  for (int k = 0; k <= 12; ++k) {
    const double tk = k * 2.5e-3;
    t.push_back(tk);
    w.push_back(wf - (wf - w0) * std::exp(-(tk / tau) * (tk / tau)));
  }
  const CoherenceScan scan = fit_coherence_time(t, w);
  REQUIRE(scan.converged);
  CHECK(scan.tau_c == doctest::Approx(tau).epsilon(1e-8));
  CHECK(scan.w0 == doctest::Approx(w0).epsilon(1e-8));
  CHECK(scan.wf == doctest::Approx(wf).epsilon(1e-8));
  CHECK_FALSE(scan.poor_fit);
  CHECK_FALSE(scan.extrapolated);
}

TEST_CASE("coherence-time fit: property round trip over random parameters") {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double w0 = 0.01 + 0.05 * u01(rng);
    const double wf = w0 * (1.5 + 3.0 * u01(rng));
    const double tau = (5.0 + 20.0 * u01(rng)) * 1e-3;
    std::vector<double> t, w;
    for (int k = 0; k <= 10; ++k) {
      const double tk = k * 0.25 * tau;
      t.push_back(tk);
      w.push_back(wf - (wf - w0) * std::exp(-(tk / tau) * (tk / tau)));
    }
    const CoherenceScan scan = fit_coherence_time(t, w);
    REQUIRE(scan.converged);
    CHECK(scan.tau_c == doctest::Approx(tau).epsilon(1e-7));
    CHECK(scan.w0 == doctest::Approx(w0).epsilon(1e-7));
    CHECK(scan.wf == doctest::Approx(wf).epsilon(1e-7));
  }
}

TEST_CASE("coherence-time fit: warnings") {
  // non-monotone widths well beyond the fit scatter
  std::vector<double> t, w;
  for (int k = 0; k <= 8; ++k) {
    t.push_back(k * 2e-3);
    w.push_back(0.02 + 0.01 * k);
  }
  w[5] = 0.01;  // deep dip
  const CoherenceScan scan = fit_coherence_time(t, w);
  CHECK(scan.poor_fit);

  // tau far beyond the sampled range -> extrapolation flag
  std::vector<double> t2, w2;
  const double tau = 80e-3;
  for (int k = 0; k <= 8; ++k) {
    const double tk = k * 1e-3;
    t2.push_back(tk);
    w2.push_back(0.08 - 0.06 * std::exp(-(tk / tau) * (tk / tau)));
  }
  const CoherenceScan far = fit_coherence_time(t2, w2);
  CHECK(far.extrapolated);

  CHECK_THROWS_AS(fit_coherence_time({0.0, 1.0}, {0.1, 0.2}), DomainError);
}

TEST_CASE("levenberg engine improves the residual and converges on a toy problem") {
  auto residuals = [](const std::vector<double>& p, std::vector<double>& r) {
    r[0] = p[0] * p[0] - 2.0;
    r[1] = p[0] + p[1] * p[1] - 4.0;
    r[2] = 0.3 * (p[1] - 1.0);
  };
  std::vector<double> r0(3);
  residuals({5.0, -3.0}, r0);
  const double ssr0 = r0[0] * r0[0] + r0[1] * r0[1] + r0[2] * r0[2];

  const LsqResult res = levenberg_least_squares(residuals, {5.0, -3.0}, 3);
  CHECK(res.converged);
  CHECK(res.ssr < ssr0);
  CHECK(res.ssr < 1.0);  // lands in a stationary basin of the toy problem
  CHECK(res.n_iterations <= 200);
}
