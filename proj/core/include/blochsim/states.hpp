#ifndef BLOCHSIM_STATES_HPP
#define BLOCHSIM_STATES_HPP

#include <complex>
#include <vector>

namespace blochsim {

enum class NumberRegime { coherent, squeezed, fock };

// Which denominator enters the Bogoliubov squeezing variance. The in-text
// form (N gbeta / 2 gamma) is the default; the alternative (N gbeta / gamma)
// is kept selectable for sensitivity studies.
enum class SqueezingVariant { half_denominator, full_denominator };

// On-site number statistics of one well.
struct NumberStatistics {
  double mean_n = 1.0;
  double sigma_n = 1.0;
  NumberRegime regime = NumberRegime::coherent;

  static NumberStatistics coherent(double n);
  static NumberStatistics squeezed(double n, double g_beta, double gamma,
                                   SqueezingVariant variant = SqueezingVariant::half_denominator);
  // Near-Fock statistics; sigma_n is set to a tiny positive value.
  static NumberStatistics fock(double n);
};

// sigma_S(N) = (N^2 / (1 + N gbeta / (2 gamma)))^(1/4); reduces to sqrt(N)
// for gbeta -> 0.
double squeezed_sigma(double n, double g_beta, double gamma,
                      SqueezingVariant variant = SqueezingVariant::half_denominator);

// Coherence time (gbeta * sigma)^(-1); +inf sentinel for gbeta = 0.
double coherence_time(const NumberStatistics& stats, double g_beta);

// A single-well state expanded over atom-number Fock components.
struct FockState {
  int n_min = 0;                                 // occupation of amplitudes[0]
  std::vector<std::complex<double>> amplitudes;  // normalized, sum |c|^2 = 1
  double mean_n = 0.0;
  std::complex<double> alpha{0.0, 0.0};          // coherent amplitude when applicable
  double lost_norm = 0.0;                        // probability outside the window

  double norm() const;
  double variance() const;  // number variance of |c_n|^2
};

// Coherent regime: exact Poissonian amplitudes (arg(alpha) = 0).
// Squeezed regime: real positive Gaussian-weighted amplitudes with number
// variance sigma_n^2.  Window spans truncation_sigmas around the mean;
// throws ConvergenceError if more than 1e-8 of the norm is clipped at n = 0.
FockState make_fock_state(const NumberStatistics& stats, double truncation_sigmas = 8.0);

// Exact interaction-phase evolution of the order parameter:
//   <a>(t) = sum_n c*_n c_{n+1} sqrt(n+1) exp(-i gbeta n t)
std::complex<double> order_parameter(const FockState& state, double g_beta, double t);

// Closed-form collapse envelope sqrt(N) exp(-N (gbeta t)^2 / 2) for a
// coherent state; general sigma version exp(-(sigma gbeta t)^2 / 2).
double order_collapse_envelope(double mean_n, double sigma_n, double g_beta, double t);

// Bogoliubov quantum depletion of a homogeneous array with periodic
// boundaries: (1/N_tot) sum_{q != 0} v_q^2 with eps_q = 4 gamma sin^2(qd/2).
// `n` is the per-site occupation; N_tot = n * n_sites.
double quantum_depletion(double n, double g_beta, double gamma, int n_sites = 32);

// Exact dynamics of the two-well Bose-Hubbard model in the Fock basis
// {|n, N-n>}.  The initial state is the symmetric binomial (coherently
// split) state with a relative phase twist, which puts a small-amplitude
// Josephson oscillation on the number imbalance.
struct TwoSiteResult {
  std::vector<double> times;
  std::vector<std::complex<double>> coherence;  // <a1^dag a2>(t)
  std::vector<double> imbalance;                // <n1 - n2>(t) / n_total
  double dominant_omega = 0.0;                  // spectral peak of the imbalance, rad/s
};

TwoSiteResult two_site_exact(int n_total, double gamma, double g_beta,
                             const std::vector<double>& t_grid,
                             double initial_phase = 0.3);

// Plasma frequency of the two-well model, sqrt(2 gamma gbeta n_total + 4 gamma^2).
double two_site_plasma_frequency(int n_total, double gamma, double g_beta);

}  // namespace blochsim

#endif
