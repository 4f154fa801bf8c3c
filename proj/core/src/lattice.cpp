#include "blochsim/lattice.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "blochsim/errors.hpp"

namespace blochsim {

void LatticeConfig::validate() const {
  if (!(depth_u > 0.0)) throw DomainError("lattice depth_u must be positive");
  if (!(wavelength > 0.0)) throw DomainError("wavelength must be positive");
  if (!(atom_mass > 0.0)) throw DomainError("atom_mass must be positive");
  if (scattering_length < 0.0) throw DomainError("scattering_length must be >= 0");
  if (!(central_occupation >= 1.0))
    throw DomainError("central_occupation must be >= 1");
  if (!(array_radius_sites > 0.0))
    throw DomainError("array_radius_sites must be positive");
  if (!(transverse_width > 0.0))
    throw DomainError("transverse_width must be positive");
  if (shot_to_shot_sigma < 0.0 || shot_to_shot_sigma >= 1.0)
    throw DomainError("shot_to_shot_sigma must lie in [0, 1)");
  if (n_sites < 0) throw DomainError("n_sites must be >= 0");
}

int LatticeConfig::site_count() const {
  if (n_sites > 0) return n_sites | 1;  // force odd, centered window
  int half = static_cast<int>(std::ceil(2.0 * array_radius_sites));
  return 2 * half + 1;
}

double recoil_energy(const LatticeConfig& config) {
  if (!(config.wavelength > 0.0))
    throw DomainError("recoil_energy: wavelength must be positive");
  const double k = kTwoPi / config.wavelength;
  return kHbar * k * k / (2.0 * config.atom_mass);
}

double BandStructure::bandwidth_er() const {
  auto [lo, hi] = std::minmax_element(band0_er.begin(), band0_er.end());
  return *hi - *lo;
}

double BandStructure::gap_edge_er() const {
  return band1_er.front() - band0_er.front();  // grid starts at the zone edge q = -k
}

namespace {

// Lowest two eigenvalues of the lattice Hamiltonian at quasimomentum q_frac
// (units of hbar k) in a truncated plane-wave basis e^{i(q + 2 k j)x}.
// V = U E_R sin^2(kx) contributes U/2 on the diagonal and -U/4 on the first
// off-diagonals.  Energies in units of E_R.
std::pair<double, double> lowest_two(double depth_u, double q_frac, int m) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  const int jmax = m / 2;
  for (int r = 0; r < m; ++r) {
    const double j = static_cast<double>(r - jmax);
    const double kq = q_frac + 2.0 * j;
    h(r, r) = kq * kq + 0.5 * depth_u;
    if (r + 1 < m) {
      h(r, r + 1) = -0.25 * depth_u;
      h(r + 1, r) = -0.25 * depth_u;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  return {solver.eigenvalues()(0), solver.eigenvalues()(1)};
}

}  // namespace

BandStructure band_structure(double depth_u, int n_plane_waves, int n_q) {
  if (depth_u < 0.0) throw DomainError("band_structure: depth_u must be >= 0");
  if (n_plane_waves < 11 || n_plane_waves % 2 == 0)
    throw DomainError("band_structure: n_plane_waves must be odd and >= 11");
  if (n_q < 3 || n_q % 2 == 0)
    throw DomainError("band_structure: n_q must be odd and >= 3");

  // Convergence check at the band edges before filling the zone.
  for (double q : {0.0, 1.0}) {
    auto [a, a2] = lowest_two(depth_u, q, n_plane_waves);
    auto [b, b2] = lowest_two(depth_u, q, n_plane_waves + 10);
    if (std::abs(a - b) > 1e-6 || std::abs(a2 - b2) > 1e-6)
      throw ConvergenceError("band_structure: plane-wave basis not converged to 1e-6 E_R");
  }

  BandStructure bs;
  bs.q_frac.resize(n_q);
  bs.band0_er.resize(n_q);
  bs.band1_er.resize(n_q);
  for (int i = 0; i < n_q; ++i) {
    const double q = -1.0 + 2.0 * i / (n_q - 1);
    auto [e0, e1] = lowest_two(depth_u, q, n_plane_waves);
    bs.q_frac[i] = q;
    bs.band0_er[i] = e0;
    bs.band1_er[i] = e1;
  }
  return bs;
}

double tunneling_er(double depth_u, int n_plane_waves) {
  // Band edges sit at q = 0 and the zone boundary; no need for the full grid.
  auto [bottom, b1] = lowest_two(depth_u, 0.0, n_plane_waves);
  auto [top, t1] = lowest_two(depth_u, 1.0, n_plane_waves);
  auto [bottom2, b2] = lowest_two(depth_u, 0.0, n_plane_waves + 10);
  auto [top2, t2] = lowest_two(depth_u, 1.0, n_plane_waves + 10);
  (void)b1; (void)t1; (void)b2; (void)t2;
  if (std::abs(bottom - bottom2) > 1e-6 || std::abs(top - top2) > 1e-6)
    throw ConvergenceError("tunneling: plane-wave basis not converged to 1e-6 E_R");
  return (top - bottom) / 4.0;
}

double tunneling(const LatticeConfig& config) {
  if (config.depth_u < 1.0 || config.depth_u > 40.0)
    throw DomainError("tunneling: depth_u outside [1, 40] E_R");
  return tunneling_er(config.depth_u) * recoil_energy(config);
}

double axial_site_width(const LatticeConfig& config) {
  config.validate();
  const double omega_ax = 2.0 * std::sqrt(config.depth_u) * recoil_energy(config);
  return std::sqrt(kHbar / (2.0 * config.atom_mass * omega_ax));
}

double onsite_interaction(const LatticeConfig& config) {
  const double sig_ax = axial_site_width(config);
  const double sig_t = config.transverse_width;
  if (!(sig_ax > 0.0) || !(sig_t > 0.0))
    throw DomainError("onsite_interaction: widths must be positive");
  // (4 pi hbar a_s / m) * 1/(8 pi^{3/2} s_ax s_t^2)
  return kHbar * config.scattering_length /
         (2.0 * std::sqrt(kPi) * config.atom_mass * sig_ax * sig_t * sig_t);
}

double bloch_period(double gradient_e) {
  if (!(gradient_e > 0.0)) throw DomainError("bloch_period: gradient_e must be positive");
  return kTwoPi / gradient_e;
}

ZenerAdvisory zener_warning(const HubbardParams& params, double gradient_e,
                            double fraction) {
  ZenerAdvisory adv;
  adv.gap_er = params.band_gap_edge_er;
  const double gap = params.band_gap_edge_er * params.recoil;  // rad/s
  if (gradient_e <= 0.0 || gap <= 0.0) return adv;
  adv.ratio = gradient_e / (fraction * gap);
  adv.flagged = adv.ratio > 1.0;
  return adv;
}

HubbardParams derive_hubbard(const LatticeConfig& config) {
  config.validate();
  HubbardParams p;
  p.recoil = recoil_energy(config);
  p.gamma = tunneling(config);
  p.g_beta = onsite_interaction(config);
  p.site_spacing = config.wavelength / 2.0;
  p.bragg_momentum = 2.0 * kHbar * kTwoPi / config.wavelength;
  BandStructure bs = band_structure(config.depth_u, 31, 3);
  p.band_gap_edge_er = bs.gap_edge_er();
  return p;
}

}  // namespace blochsim
