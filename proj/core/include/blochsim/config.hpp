#ifndef BLOCHSIM_CONFIG_HPP
#define BLOCHSIM_CONFIG_HPP

#include <cstdint>
#include <string>

#include "blochsim/ensemble.hpp"
#include "blochsim/imaging.hpp"
#include "blochsim/lattice.hpp"
#include "blochsim/states.hpp"

namespace blochsim {

// Full run configuration, one section per concern.  Defaults mirror the
// calibrated apparatus scale; `blochsim init` writes them out as a file.
struct RunConfig {
  struct Lattice {
    double depth_u = 10.0;
    double wavelength_nm = 852.0;
    double atom_mass_kg = kRb87Mass;
    double scattering_length_nm = 5.3;
  } lattice;

  struct Atoms {
    double total_atoms = 1500.0;
    double central_occupation = 120.0;
    double array_radius_sites = 7.0;
    int n_sites = 0;  // 0 = auto
    double transverse_width_um = 1.6;
    double shot_to_shot_sigma = 0.20;
    std::string squeezing_variant = "half";  // half | full (Eq.-2 style denominator)
  } atoms;

  struct Gradient {
    double frequency_hz = 900.0;  // E/hbar = 2 pi * frequency
  } gradient;

  struct Times {
    double t_ramp_ms = 350.0;  // informational; state preparation is not simulated
    double t_bloch_ms = 30.0;
    double t_rephase_ms = 25.0;
    double tof_ms = 12.0;
    double bloch_step_periods = 2.0;  // width-scan sampling, in Bloch periods
    double rephase_step_ms = 0.5;
  } times;

  struct Ensemble {
    int n_samples = 128;
    std::uint64_t seed = 20260810;
    std::string model = "squeezed";  // coherent | squeezed | fock
  } ensemble;

  struct Imaging {
    double pixel_size_um = 2.0;
    int n_pixels = 257;
    double resolution_blur_um = 2.0;
    bool photon_shot = true;
    bool atom_shot = true;
    double image_transverse_width_um = 25.0;
  } imaging;

  struct Analysis {
    double noise_floor = 0.05;       // incoherent-fraction floor, Fig.-2A style
    double zener_fraction = 0.5;     // advisory threshold on E vs band gap
    int workers = 1;
  } analysis;

  void validate() const;

  LatticeConfig lattice_config() const;
  ImagingConfig imaging_config() const;
  EnsembleSpec ensemble_spec() const;
  NumberRegime regime() const;
  SqueezingVariant variant() const;
  double gradient_e() const { return hz_to_rad(gradient.frequency_hz); }
};

// Sectioned key-value file ([section] / key = value).  Unknown sections or
// keys are rejected with a line diagnostic; all keys are optional.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Canonical serialization: every key in a fixed order.  parse(serialize(c))
// round-trips exactly.
std::string serialize_config(const RunConfig& config);

// FNV-1a over the canonical serialization; embedded in every output file.
std::string config_hash(const RunConfig& config);

}  // namespace blochsim

#endif
