#include "blochsim/imaging.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "blochsim/errors.hpp"
#include "blochsim/rng.hpp"
#include "blochsim/version.hpp"

namespace blochsim {

void ImagingConfig::validate() const {
  if (!(tof_time > 0.0)) throw DomainError("imaging: tof_time must be positive");
  if (!(pixel_size > 0.0)) throw DomainError("imaging: pixel_size must be positive");
  if (n_pixels < 16) throw DomainError("imaging: n_pixels must be >= 16");
  if (!(onsite_width > 0.0)) throw DomainError("imaging: onsite_width must be set");
  if (resolution_blur < 0.0) throw DomainError("imaging: resolution_blur must be >= 0");
  if (noise.number_fluct_sigma < 0.0 || noise.number_fluct_sigma >= 1.0)
    throw DomainError("imaging: number_fluct_sigma must lie in [0, 1)");
  if (field_of_view() < 1.5 * bragg_separation())
    throw DomainError("imaging: field of view must span 1.5x the side-peak offset");
}

double ImagingConfig::bragg_separation() const {
  const double two_hbar_k = 2.0 * kHbar * kPi / site_spacing;  // 2 hbar k = h / d
  return two_hbar_k * tof_time / atom_mass;
}

ImagingConfig make_imaging_config(const LatticeConfig& lattice) {
  ImagingConfig img;
  img.onsite_width = axial_site_width(lattice);
  img.atom_mass = lattice.atom_mass;
  img.site_spacing = lattice.wavelength / 2.0;
  img.noise.number_fluct_sigma = lattice.shot_to_shot_sigma;
  return img;
}

double DensityProfile::total_atoms() const {
  double s = 0.0;
  for (double d : density) s += d;
  return s;
}

namespace {

// Area-preserving discrete Gaussian convolution.
void blur_in_place(std::vector<double>& y, double sigma_px) {
  if (sigma_px <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_px)));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int j = -radius; j <= radius; ++j) {
    kernel[j + radius] = std::exp(-0.5 * j * j / (sigma_px * sigma_px));
    ksum += kernel[j + radius];
  }
  for (auto& k : kernel) k /= ksum;

  const int n = static_cast<int>(y.size());
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -radius; j <= radius; ++j) {
      const int src = i + j;
      if (src >= 0 && src < n) acc += kernel[j + radius] * y[src];
    }
    out[i] = acc;
  }
  y.swap(out);
}

}  // namespace

DensityProfile synthesize_profile(const ArrayState& state, const ImagingConfig& config) {
  config.validate();
  const int n_px = config.n_pixels;
  const int sites = static_cast<int>(state.amplitudes.size());
  const int c = state.center_index();

  DensityProfile profile;
  profile.x.resize(n_px);
  profile.density.resize(n_px);

  // Envelope: Fourier transform of the on-site Gaussian orbital.  Density
  // width sigma_ax maps to an intensity envelope of width hbar t / (2 m sigma_ax).
  const double env_sigma =
      kHbar * config.tof_time / (2.0 * config.atom_mass * config.onsite_width);
  const double phase_scale = config.atom_mass / (kHbar * config.tof_time);

  // sqrt(N_tot) a_i = sqrt(n_i) e^{i theta_i}
  const double amp_scale = std::sqrt(state.total_atoms);

  for (int p = 0; p < n_px; ++p) {
    const double x = (p - (n_px - 1) / 2.0) * config.pixel_size;
    profile.x[p] = x;
    std::complex<double> sum{0.0, 0.0};
    const double kx = phase_scale * x;  // m x / (hbar t)
    for (int i = 0; i < sites; ++i) {
      const double xi = (i - c) * config.site_spacing;
      sum += state.amplitudes[i] * std::polar(amp_scale, kx * xi);
    }
    const double env = std::exp(-0.25 * x * x / (env_sigma * env_sigma));
    profile.density[p] = std::norm(sum) * env * env;
  }

  // Clipping estimate from the analytic envelope tail outside the grid.
  const double fov = config.field_of_view();
  const double outside = std::erfc(fov / (env_sigma * std::sqrt(2.0)));
  if (outside > 0.02)
    throw DomainError("synthesize_profile: more than 2% of the signal falls outside the field of view");

  blur_in_place(profile.density, config.resolution_blur / config.pixel_size);

  double raw = 0.0;
  for (double d : profile.density) raw += d;
  const double target = state.total_atoms;
  if (raw > 0.0) {
    const double scale = target / raw;
    for (auto& d : profile.density) d *= scale;
  }
  profile.meta.samples = 1;
  return profile;
}

DensityProfile average_profiles(std::span<const DensityProfile> profiles) {
  if (profiles.empty()) throw DomainError("average_profiles: empty input");
  DensityProfile mean = profiles[0];
  for (std::size_t s = 1; s < profiles.size(); ++s) {
    if (profiles[s].density.size() != mean.density.size())
      throw DomainError("average_profiles: grids differ");
    for (std::size_t p = 0; p < mean.density.size(); ++p)
      mean.density[p] += profiles[s].density[p];
  }
  const double inv = 1.0 / static_cast<double>(profiles.size());
  for (auto& d : mean.density) d *= inv;
  mean.meta.samples = static_cast<int>(profiles.size());
  return mean;
}

DensityProfile add_noise(const DensityProfile& profile, const ImagingConfig& config,
                         std::uint64_t seed) {
  DensityProfile noisy = profile;
  if (!config.noise.atom_shot && !config.noise.photon_shot) return noisy;

  auto rng = substream(seed, 0);
  if (config.noise.atom_shot && config.noise.number_fluct_sigma > 0.0) {
    // lognormal with unit mean and sd/mean = number_fluct_sigma
    const double s2 = std::log(1.0 + config.noise.number_fluct_sigma *
                                         config.noise.number_fluct_sigma);
    std::lognormal_distribution<double> factor(-0.5 * s2, std::sqrt(s2));
    const double f = factor(rng);
    for (auto& d : noisy.density) d *= f;
  }
  if (config.noise.photon_shot) {
    for (auto& d : noisy.density) {
      if (d <= 0.0) { d = 0.0; continue; }
      std::poisson_distribution<long> counts(d);
      d = static_cast<double>(counts(rng));
    }
  }
  return noisy;
}

void render_image(const DensityProfile& profile, double transverse_width,
                  const std::string& path) {
  if (!(transverse_width > 0.0))
    throw DomainError("render_image: transverse_width must be positive");
  const int cols = static_cast<int>(profile.density.size());
  const int rows = cols;
  const double pixel = cols > 1 ? profile.x[1] - profile.x[0] : 1.0;

  std::vector<double> column(rows);
  for (int r = 0; r < rows; ++r) {
    const double y = (r - (rows - 1) / 2.0) * pixel;
    column[r] = std::exp(-0.5 * y * y / (transverse_width * transverse_width));
  }

  double peak = 0.0;
  for (double d : profile.density) peak = std::max(peak, d);
  double col_peak = 0.0;
  for (double v : column) col_peak = std::max(col_peak, v);
  const double outer_peak = peak * col_peak;
  const double scale = outer_peak > 0.0 ? 65535.0 / outer_peak : 0.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("render_image: cannot open " + path);
  out << "P5\n" << cols << " " << rows << "\n65535\n";
  for (int r = 0; r < rows; ++r) {
    for (int p = 0; p < cols; ++p) {
      const double v = profile.density[p] * column[r] * scale;
      const auto g = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 65535.0)));
      const unsigned char bytes[2] = {static_cast<unsigned char>(g >> 8),
                                      static_cast<unsigned char>(g & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
  if (!out) throw IoError("render_image: write failed for " + path);
  out.close();

  std::ofstream meta(path + ".txt");
  if (!meta) throw IoError("render_image: cannot open " + path + ".txt");
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "artifact=%s %s\nconfig_hash=%s\nseed=%llu\nsamples=%d\n"
                "rows=%d\ncols=%d\npixel_um=%.10g\ntransverse_width_um=%.10g\n"
                "atoms_per_graylevel=%.10g\n",
                kArtifactName, kVersion, profile.meta.config_hash.c_str(),
                static_cast<unsigned long long>(profile.meta.seed),
                profile.meta.samples, rows, cols, pixel / kUm,
                transverse_width / kUm, scale > 0.0 ? 1.0 / scale : 0.0);
  meta << buf;
}

}  // namespace blochsim
