#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "blochsim/constants.hpp"
#include "blochsim/ensemble.hpp"
#include "blochsim/errors.hpp"
#include "blochsim/imaging.hpp"
#include "blochsim/lattice.hpp"
#include "blochsim/rng.hpp"

using namespace blochsim;

namespace {

LatticeConfig default_lattice(double depth = 10.0) {
  LatticeConfig c;
  c.depth_u = depth;
  return c;
}

// hand-built array state with given per-site occupations and phases
ArrayState make_state(const std::vector<double>& n, const std::vector<double>& theta) {
  ArrayState st;
  const double total = std::accumulate(n.begin(), n.end(), 0.0);
  st.total_atoms = total;
  st.occupations = n;
  st.site_energies.assign(n.size(), 0.0);
  st.amplitudes.resize(n.size());
  for (std::size_t i = 0; i < n.size(); ++i)
    st.amplitudes[i] = std::polar(std::sqrt(n[i] / total), theta[i]);
  return st;
}

ArrayState phase_locked_array(const LatticeConfig& c) {
  std::vector<double> n = mean_occupations(c);
  std::vector<double> theta(n.size(), 0.0);
  return make_state(n, theta);
}

std::vector<double> local_maxima_positions(const DensityProfile& p, double floor) {
  std::vector<double> pos;
  for (std::size_t i = 1; i + 1 < p.density.size(); ++i)
    if (p.density[i] > floor && p.density[i] >= p.density[i - 1] &&
        p.density[i] >= p.density[i + 1])
      pos.push_back(p.x[i]);
  return pos;
}

}  // namespace

TEST_CASE("phase-locked array puts side peaks at the Bragg separation") {
  // oracle: (2 hbar k / m) * t for 852 nm Rb-87 and 12 ms TOF = 129.3 um
  const double k = kTwoPi / 852e-9;
  const double expected = 2.0 * kHbar * k * 12e-3 / kRb87Mass;
  CHECK(expected / kUm == doctest::Approx(129.33).epsilon(1e-3));

  const LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  CHECK(img.bragg_separation() == doctest::Approx(expected).epsilon(1e-12));

  const DensityProfile p = synthesize_profile(phase_locked_array(c), img);
  double peak = *std::max_element(p.density.begin(), p.density.end());
  const auto maxima = local_maxima_positions(p, 0.05 * peak);
  REQUIRE(maxima.size() == 3);
  CHECK(std::abs(maxima[0] + expected) < img.pixel_size);
  CHECK(std::abs(maxima[1]) < img.pixel_size);
  CHECK(std::abs(maxima[2] - expected) < img.pixel_size);
}

TEST_CASE("peak spacing is set by kinematics alone") {
  // vary depth, occupancy, radius: spacing stays (2 hbar k / m) t within a pixel
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> depth(6.0, 24.0);
  std::uniform_real_distribution<double> occupancy(80.0, 160.0);
  std::uniform_real_distribution<double> radius(5.0, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    LatticeConfig c = default_lattice(depth(rng));
    c.central_occupation = occupancy(rng);
    c.array_radius_sites = radius(rng);
    const ImagingConfig img = make_imaging_config(c);
    const DensityProfile p = synthesize_profile(phase_locked_array(c), img);
    double peak = *std::max_element(p.density.begin(), p.density.end());
    const auto maxima = local_maxima_positions(p, 0.05 * peak);
    REQUIRE(maxima.size() == 3);
    CHECK(std::abs((maxima[2] - maxima[0]) / 2.0 - img.bragg_separation()) <
          img.pixel_size);
  }
}

TEST_CASE("two-slit fringes: period and phase shift") {
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  const double fringe = kPlanck * img.tof_time / (img.atom_mass * img.site_spacing);
  CHECK(fringe == doctest::Approx(img.bragg_separation()).epsilon(1e-12));

  const DensityProfile p0 = synthesize_profile(make_state({50, 50}, {0.0, 0.0}), img);
  const double phi = 0.8;
  const DensityProfile p1 = synthesize_profile(make_state({50, 50}, {0.0, phi}), img);

  // fringe minima sit at odd multiples of half a period regardless of the
  // envelope, so their spacing measures the period cleanly
  auto minima_positions = [](const DensityProfile& p) {
    std::vector<double> pos;
    const double peak = *std::max_element(p.density.begin(), p.density.end());
    for (std::size_t i = 1; i + 1 < p.density.size(); ++i)
      if (p.density[i] < 0.2 * peak && p.density[i] <= p.density[i - 1] &&
          p.density[i] <= p.density[i + 1])
        pos.push_back(p.x[i]);
    return pos;
  };
  const auto minima0 = minima_positions(p0);
  REQUIRE(minima0.size() >= 3);
  double spacing_sum = 0.0;
  for (std::size_t i = 1; i < minima0.size(); ++i)
    spacing_sum += minima0[i] - minima0[i - 1];
  const double measured = spacing_sum / (minima0.size() - 1);
  CHECK(std::abs(measured - fringe) < 2.0 * img.pixel_size);

  // the pattern shifts by phi/(2 pi) of a fringe
  const auto minima1 = minima_positions(p1);
  REQUIRE(!minima1.empty());
  const double expected_shift = phi / kTwoPi * fringe;
  double best = 1e300;
  for (double m0 : minima0)
    for (double m1 : minima1) best = std::min(best, std::abs(m1 - (m0 - expected_shift)));
  CHECK(best < 2.0 * img.pixel_size);
}

TEST_CASE("incoherent limit: averaged dephased samples approach the envelope") {
  LatticeConfig c = default_lattice();
  ImagingConfig img = make_imaging_config(c);
  img.resolution_blur = 0.0;  // compare against the unblurred analytic envelope
  const std::vector<double> mean_occ = mean_occupations(c);

  auto rng = substream(77, 1);
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  auto dephased_sample = [&]() {
    std::vector<double> theta(mean_occ.size());
    for (auto& t : theta) t = uniform(rng);
    return make_state(mean_occ, theta);
  };

  auto mean_profile = [&](int m) {
    std::vector<DensityProfile> profiles;
    for (int s = 0; s < m; ++s)
      profiles.push_back(synthesize_profile(dephased_sample(), img));
    return average_profiles(profiles);
  };

  auto normalized = [](const DensityProfile& p) {
    std::vector<double> y = p.density;
    double total = 0.0;
    for (double v : y) total += v;
    for (auto& v : y) v /= total;
    return y;
  };

  // the many-sample mean lands on the analytic incoherent envelope
  const std::vector<double> reference = normalized(mean_profile(4096));
  const double env_sigma = kHbar * img.tof_time / (2.0 * img.atom_mass * img.onsite_width);
  {
    const DensityProfile probe = mean_profile(1);  // just for the grid
    double env_norm = 0.0;
    std::vector<double> env(probe.x.size());
    for (std::size_t i = 0; i < probe.x.size(); ++i) {
      env[i] = std::exp(-0.5 * probe.x[i] * probe.x[i] / (env_sigma * env_sigma));
      env_norm += env[i];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < env.size(); ++i)
      worst = std::max(worst, std::abs(reference[i] - env[i] / env_norm));
    const double peak = *std::max_element(reference.begin(), reference.end());
    CHECK(worst < 0.05 * peak);
  }

  // residual fluctuation around the limit halves for every 4x in samples
  auto rms_vs_reference = [&](int m) {
    const std::vector<double> y = normalized(mean_profile(m));
    double rms = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double diff = y[i] - reference[i];
      rms += diff * diff;
    }
    return std::sqrt(rms / y.size());
  };
  const double r16 = rms_vs_reference(16);
  const double r64 = rms_vs_reference(64);
  const double r256 = rms_vs_reference(256);
  CHECK(r16 / r64 > 1.4);
  CHECK(r16 / r64 < 3.0);
  CHECK(r64 / r256 > 1.4);
  CHECK(r64 / r256 < 3.0);
}

TEST_CASE("profile integral equals the atom number") {
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  const ArrayState st = phase_locked_array(c);
  const DensityProfile p = synthesize_profile(st, img);
  CHECK(p.total_atoms() == doctest::Approx(st.total_atoms).epsilon(1e-9));
  for (double d : p.density) CHECK(d >= 0.0);
}

TEST_CASE("parity symmetries of the far-field density") {
  // site reversal alone and phase conjugation alone each mirror the profile;
  // applied together they reproduce it
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);

  auto rng = substream(99, 2);
  std::uniform_real_distribution<double> uniform(-1.5, 1.5);
  std::vector<double> n = mean_occupations(c);
  std::vector<double> theta(n.size());
  for (auto& t : theta) t = uniform(rng);
  // make the occupations asymmetric too
  n[3] *= 2.0;
  n[n.size() - 2] *= 0.35;

  std::vector<double> n_rev(n.rbegin(), n.rend());
  std::vector<double> theta_rev(theta.rbegin(), theta.rend());
  std::vector<double> theta_conj(theta);
  for (auto& t : theta_conj) t = -t;
  std::vector<double> theta_both(theta_rev);
  for (auto& t : theta_both) t = -t;

  const DensityProfile p = synthesize_profile(make_state(n, theta), img);
  const DensityProfile rev = synthesize_profile(make_state(n_rev, theta_rev), img);
  const DensityProfile conj = synthesize_profile(make_state(n, theta_conj), img);
  const DensityProfile both = synthesize_profile(make_state(n_rev, theta_both), img);
  const std::size_t m = p.density.size();
  for (std::size_t i = 0; i < m; ++i) {
    CHECK(p.density[i] == doctest::Approx(rev.density[m - 1 - i]).epsilon(1e-9));
    CHECK(p.density[i] == doctest::Approx(conj.density[m - 1 - i]).epsilon(1e-9));
    CHECK(p.density[i] == doctest::Approx(both.density[i]).epsilon(1e-9));
  }
}

TEST_CASE("field-of-view clipping guard") {
  LatticeConfig c = default_lattice(24.0);  // widest envelope
  ImagingConfig img = make_imaging_config(c);
  img.n_pixels = 201;  // +-200 um: envelope tail above 2%
  const ArrayState st = phase_locked_array(c);
  CHECK_THROWS_AS(synthesize_profile(st, img), DomainError);
}

TEST_CASE("noise: identity when off, calibrated moments when on") {
  LatticeConfig c = default_lattice();
  ImagingConfig img = make_imaging_config(c);
  const DensityProfile clean = synthesize_profile(phase_locked_array(c), img);

  img.noise.photon_shot = false;
  img.noise.atom_shot = false;
  const DensityProfile same = add_noise(clean, img, 5);
  for (std::size_t i = 0; i < clean.density.size(); ++i)
    CHECK(same.density[i] == clean.density[i]);

  // shot-to-shot sigma: sample std/mean of totals over 1e4 shots within 10% of 0.20
  img.noise.atom_shot = true;
  img.noise.photon_shot = false;
  img.noise.number_fluct_sigma = 0.20;
  double sum = 0.0, sum2 = 0.0;
  const int shots = 10000;
  for (int s = 0; s < shots; ++s) {
    const DensityProfile noisy = add_noise(clean, img, 1000 + s);
    const double tot = noisy.total_atoms();
    sum += tot;
    sum2 += tot * tot;
  }
  const double mean = sum / shots;
  const double sd = std::sqrt(sum2 / shots - mean * mean);
  CHECK(sd / mean == doctest::Approx(0.20).epsilon(0.10));

  // Poisson-only: bright pixel with mean 400 fluctuates by ~20
  img.noise.atom_shot = false;
  img.noise.photon_shot = true;
  DensityProfile flat = clean;
  std::fill(flat.density.begin(), flat.density.end(), 400.0);
  double psum = 0.0, psum2 = 0.0;
  int count = 0;
  for (int s = 0; s < 200; ++s) {
    const DensityProfile noisy = add_noise(flat, img, 5000 + s);
    for (double d : noisy.density) {
      psum += d;
      psum2 += d * d;
      ++count;
    }
  }
  const double pmean = psum / count;
  const double psd = std::sqrt(psum2 / count - pmean * pmean);
  CHECK(pmean == doctest::Approx(400.0).epsilon(0.02));
  CHECK(psd == doctest::Approx(20.0).epsilon(0.10));

  // determinism under seed
  img.noise.atom_shot = true;
  const DensityProfile n1 = add_noise(clean, img, 123);
  const DensityProfile n2 = add_noise(clean, img, 123);
  for (std::size_t i = 0; i < n1.density.size(); ++i)
    CHECK(n1.density[i] == n2.density[i]);
}

TEST_CASE("rendered image column sums reproduce the profile") {
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  DensityProfile p = synthesize_profile(phase_locked_array(c), img);
  p.meta.config_hash = "deadbeefdeadbeef";
  p.meta.seed = 7;

  const std::string path = "/tmp/blochsim_test_render.pgm";
  render_image(p, 25.0 * kUm, path);

  // minimal 16-bit PGM reader
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string magic;
  int cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  REQUIRE(magic == "P5");
  REQUIRE(maxval == 65535);
  REQUIRE(cols == static_cast<int>(p.density.size()));
  in.get();  // single whitespace after header
  std::vector<std::vector<double>> img2d(rows, std::vector<double>(cols));
  std::uint16_t top = 0;
  for (int r = 0; r < rows; ++r)
    for (int col = 0; col < cols; ++col) {
      const int hi = in.get(), lo = in.get();
      const std::uint16_t v = static_cast<std::uint16_t>((hi << 8) | lo);
      top = std::max(top, v);
      img2d[r][col] = v;
    }
  CHECK(top == 65535);  // peak maps to the maximum gray level

  std::vector<double> colsum(cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int col = 0; col < cols; ++col) colsum[col] += img2d[r][col];

  // column sums proportional to the profile on non-negligible columns
  const double peak = *std::max_element(p.density.begin(), p.density.end());
  const double peak_sum = *std::max_element(colsum.begin(), colsum.end());
  for (int col = 0; col < cols; ++col) {
    if (p.density[col] < 0.01 * peak) continue;
    CHECK(colsum[col] / peak_sum ==
          doctest::Approx(p.density[col] / peak).epsilon(1e-3));
  }

  // sidecar metadata exists and carries provenance
  std::ifstream meta(path + ".txt");
  REQUIRE(meta.good());
  std::string text((std::istreambuf_iterator<char>(meta)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("deadbeefdeadbeef") != std::string::npos);
  CHECK(text.find("seed=7") != std::string::npos);
}

TEST_CASE("zero-density profile renders black") {
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  DensityProfile p = synthesize_profile(phase_locked_array(c), img);
  std::fill(p.density.begin(), p.density.end(), 0.0);
  const std::string path = "/tmp/blochsim_test_black.pgm";
  render_image(p, 25.0 * kUm, path);

  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int cols, rows, maxval;
  in >> magic >> cols >> rows >> maxval;
  in.get();
  bool all_black = true;
  for (int i = 0; i < rows * cols * 2; ++i)
    if (in.get() != 0) all_black = false;
  CHECK(all_black);
}

TEST_CASE("render rejects an unwritable destination") {
  LatticeConfig c = default_lattice();
  const ImagingConfig img = make_imaging_config(c);
  const DensityProfile p = synthesize_profile(phase_locked_array(c), img);
  CHECK_THROWS_AS(render_image(p, 25.0 * kUm, "/nonexistent_dir/out.pgm"), IoError);
}
