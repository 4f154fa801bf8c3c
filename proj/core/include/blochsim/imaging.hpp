#ifndef BLOCHSIM_IMAGING_HPP
#define BLOCHSIM_IMAGING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blochsim/ensemble.hpp"
#include "blochsim/lattice.hpp"

namespace blochsim {

struct NoiseConfig {
  bool photon_shot = true;          // per-pixel counting noise (Poisson)
  bool atom_shot = true;            // shot-to-shot total-number fluctuation
  double number_fluct_sigma = 0.20;
};

struct ImagingConfig {
  double tof_time = 12.0 * kMs;     // s
  double pixel_size = 2.0 * kUm;    // m
  int n_pixels = 257;               // odd keeps the grid symmetric about 0
  double onsite_width = 0.0;        // axial on-site density width, m
  double resolution_blur = 2.0 * kUm;  // optical PSF (Gaussian sigma), m
  NoiseConfig noise;
  double atom_mass = kRb87Mass;     // kg
  double site_spacing = 426.0 * kNm;  // m

  void validate() const;
  double field_of_view() const { return 0.5 * pixel_size * (n_pixels - 1); }
  double bragg_separation() const;  // (2 hbar k / m) * tof, the side-peak offset
};

// Convenience: fill the kinematic fields from a lattice configuration.
ImagingConfig make_imaging_config(const LatticeConfig& lattice);

struct ProfileMeta {
  int samples = 1;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// 1-D column-summed density after time of flight: positions (m) and atoms
// per pixel.
struct DensityProfile {
  std::vector<double> x;
  std::vector<double> density;
  ProfileMeta meta;

  double total_atoms() const;
};

// Far-field interference of the array: each site contributes a Gaussian
// wavepacket, giving density(x) ~ |envelope(x)|^2 |sum_i sqrt(n_i) e^{i
// theta_i} e^{i m x x_i / (hbar t)}|^2, blurred by the optical resolution and
// scaled so the integral equals the atom number.  Throws when more than 2% of
// the signal would fall outside the field of view.
DensityProfile synthesize_profile(const ArrayState& state, const ImagingConfig& config);

// Mean of profiles sharing a common grid.
DensityProfile average_profiles(std::span<const DensityProfile> profiles);

// Shot-to-shot lognormal number fluctuation plus per-pixel Poisson counting
// noise; identity when both flags are off.  Deterministic under `seed`.
DensityProfile add_noise(const DensityProfile& profile, const ImagingConfig& config,
                         std::uint64_t seed);

// Expands the 1-D profile with a transverse Gaussian column profile and
// writes a 16-bit PGM plus a `.txt` metadata sidecar (scale, provenance).
void render_image(const DensityProfile& profile, double transverse_width,
                  const std::string& path);

}  // namespace blochsim

#endif
