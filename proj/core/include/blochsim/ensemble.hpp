#ifndef BLOCHSIM_ENSEMBLE_HPP
#define BLOCHSIM_ENSEMBLE_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "blochsim/lattice.hpp"
#include "blochsim/states.hpp"

namespace blochsim {

// One realization of the lattice array.  Amplitudes are normalized
// (sum |a_i|^2 = 1); physical occupations are total_atoms * |a_i|^2.
struct ArrayState {
  std::vector<std::complex<double>> amplitudes;
  std::vector<double> occupations;    // ensemble-mean N_i (trap envelope)
  std::vector<double> site_energies;  // eps_i = E * i, rad/s
  double time = 0.0;                  // s
  double total_atoms = 0.0;           // sum of the sampled n_i of this realization

  int center_index() const { return static_cast<int>(amplitudes.size()) / 2; }
  double norm() const;
  // Tilt + mean-field energy per atom, sum (eps_i + gbeta N |a_i|^2 / 2)|a_i|^2
  double energy(double g_beta) const;
};

// Sampling recipe for the fluctuating initial conditions.
struct EnsembleSpec {
  int n_samples = 128;
  NumberRegime number_sigma_model = NumberRegime::coherent;
  SqueezingVariant variant = SqueezingVariant::half_denominator;
  // Per-site initial phase spread.  Negative = minimum-uncertainty pairing
  // sigma_theta = 1 / (2 sigma_N), which is the default.
  double phase_sigma = -1.0;
  std::uint64_t master_seed = 1;
};

// Gaussian occupation envelope N_i = N exp(-(i/R)^2) on the centered window.
std::vector<double> mean_occupations(const LatticeConfig& config);

// Draws n_samples realizations: per site n_i ~ Normal(N_i, sigma^2(N_i))
// truncated at 0 and theta_i ~ Normal(0, sigma_theta^2).  Deterministic in
// (master_seed, sample index) regardless of evaluation order.
std::vector<ArrayState> init_array(const LatticeConfig& config,
                                   const HubbardParams& params,
                                   const EnsembleSpec& spec);

struct Trajectory {
  std::vector<double> times;
  std::vector<ArrayState> states;
  double max_norm_drift = 0.0;        // max |norm - 1| over the run
  double norm_drift_per_ms = 0.0;
};

struct EvolveOptions {
  bool trap_compensation = true;  // static trap term offsetting the mean-field envelope
};

// Tilted discrete nonlinear Schroedinger evolution
//   i da_i/dt = -gamma (a_{i+1} + a_{i-1}) + (eps_i + gbeta N_tot |a_i|^2) a_i
// with eps_i = gradient_e * i (+ trap term), integrated with fixed-step RK4
// in the co-moving gauge b_i = a_i exp(i eps_i t) so the unbounded tilt
// phases never enter the stepper.  Snapshot times need not be multiples of dt.
Trajectory evolve(const ArrayState& initial, const HubbardParams& params,
                  double gradient_e, double dt,
                  const std::vector<double>& snapshot_times,
                  const EvolveOptions& options = {});

// Stability bound dt = 1 / (50 max(gamma, E, gbeta N)).
double stable_timestep(const ArrayState& state, const HubbardParams& params,
                       double gradient_e);

struct Quasimomentum {
  double zone_fraction = 0.0;  // q d / (2 pi), wrapped to (-1/2, 1/2]
  double resultant = 0.0;      // |sum a_{i+1} a_i^*| / sum |a_{i+1}||a_i|
  bool defined = true;
};

// Circular mean of the nearest-neighbour phase differences.
Quasimomentum quasimomentum(const ArrayState& state);

// Simple deterministic parallel map: runs fn(i) for i in [0, n) on up to
// `workers` threads; results land in index order so reductions are
// scheduling-independent.
void parallel_for_samples(int n, int workers, const std::function<void(int)>& fn);

}  // namespace blochsim

#endif
