#ifndef BLOCHSIM_LATTICE_HPP
#define BLOCHSIM_LATTICE_HPP

#include <vector>

#include "blochsim/constants.hpp"

namespace blochsim {

// Experimental knobs for a 1-D optical lattice holding an array of small
// condensates.  Defaults reproduce the apparatus scale used for all
// calibrations: Rb-87 in an 852 nm standing wave, ~1500 atoms over ~15 sites.
struct LatticeConfig {
  double depth_u = 10.0;               // lattice depth, units of E_R
  double wavelength = 852.0 * kNm;     // m
  double atom_mass = kRb87Mass;        // kg
  double scattering_length = 5.3 * kNm;  // m
  double total_atoms = 1500.0;         // informational cross-check
  double central_occupation = 120.0;   // N at the array center
  double array_radius_sites = 7.0;     // 1/e radius of the density envelope
  int n_sites = 0;                     // 0 = auto (4 x radius, centered)
  double gradient_e = hz_to_rad(900.0);  // site-to-site energy offset E/hbar, rad/s
  double transverse_width = 1.6 * kUm;   // on-site transverse density width (gbeta knob)
  double shot_to_shot_sigma = 0.20;      // fractional atom-number fluctuation

  void validate() const;  // throws DomainError on out-of-range values
  int site_count() const;  // resolved window size (odd)
};

// Everything Eq.-of-motion-level code needs, derived once from LatticeConfig.
struct HubbardParams {
  double gamma = 0.0;          // tunneling matrix element / hbar, rad/s
  double g_beta = 0.0;         // on-site interaction / hbar, rad/s
  double recoil = 0.0;         // E_R / hbar, rad/s
  double site_spacing = 0.0;   // d = lambda/2, m
  double bragg_momentum = 0.0;  // 2 hbar k, kg m/s
  double band_gap_edge_er = 0.0;  // first gap at the zone edge, units of E_R
};

// Lowest two bands over the first Brillouin zone, energies in units of E_R.
struct BandStructure {
  std::vector<double> q_frac;    // quasimomentum / (hbar k), spanning [-1, 1]
  std::vector<double> band0_er;
  std::vector<double> band1_er;

  double bandwidth_er() const;   // max - min of the lowest band
  double gap_edge_er() const;    // band1 - band0 at the zone edge
};

// E_R/hbar = hbar k^2 / 2m with k = 2 pi / lambda.  rad/s.
double recoil_energy(const LatticeConfig& config);

// Plane-wave diagonalization of the single-particle lattice Hamiltonian.
// Throws ConvergenceError if enlarging the basis by 10 still moves the band
// edges by more than 1e-6 E_R.
BandStructure band_structure(double depth_u, int n_plane_waves = 31, int n_q = 65);

// Lowest-band width / 4, units of E_R (1-D nearest-neighbour identification).
double tunneling_er(double depth_u, int n_plane_waves = 31);

// Same, converted to rad/s for a given configuration.  Valid for depth_u in [1, 40].
double tunneling(const LatticeConfig& config);

// Density width of the Gaussian on-site orbital along the lattice axis,
// from the harmonic approximation of a site (omega_ax = 2 sqrt(U) E_R/hbar).
double axial_site_width(const LatticeConfig& config);

// gbeta/hbar = (4 pi hbar a_s / m) * integral |w|^4 for a 3-D Gaussian
// orbital: axial width from the site curvature, transverse width from config.
double onsite_interaction(const LatticeConfig& config);

// Bloch period T = 2 pi / (E/hbar), seconds.
double bloch_period(double gradient_e);

struct ZenerAdvisory {
  bool flagged = false;
  double ratio = 0.0;    // (E per site) / (fraction * gap)
  double gap_er = 0.0;
};

// Advisory only: flags when the per-site energy drop exceeds `fraction` of
// the band gap at the zone edge.
ZenerAdvisory zener_warning(const HubbardParams& params, double gradient_e,
                            double fraction = 0.5);

// One-stop derivation of HubbardParams from a configuration.
HubbardParams derive_hubbard(const LatticeConfig& config);

}  // namespace blochsim

#endif
