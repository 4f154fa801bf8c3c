#include "blochsim/states.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "blochsim/constants.hpp"
#include "blochsim/errors.hpp"

namespace blochsim {

NumberStatistics NumberStatistics::coherent(double n) {
  if (!(n >= 1.0)) throw DomainError("NumberStatistics: mean_n must be >= 1");
  return {n, std::sqrt(n), NumberRegime::coherent};
}

NumberStatistics NumberStatistics::squeezed(double n, double g_beta, double gamma,
                                            SqueezingVariant variant) {
  return {n, squeezed_sigma(n, g_beta, gamma, variant), NumberRegime::squeezed};
}

NumberStatistics NumberStatistics::fock(double n) {
  if (!(n >= 1.0)) throw DomainError("NumberStatistics: mean_n must be >= 1");
  return {n, 1e-9, NumberRegime::fock};
}

double squeezed_sigma(double n, double g_beta, double gamma, SqueezingVariant variant) {
  if (!(n >= 1.0)) throw DomainError("squeezed_sigma: n must be >= 1");
  if (g_beta < 0.0) throw DomainError("squeezed_sigma: g_beta must be >= 0");
  if (!(gamma > 0.0))
    throw DomainError("squeezed_sigma: gamma must be positive (use the Fock limit explicitly)");
  const double denom = variant == SqueezingVariant::half_denominator
                           ? 1.0 + n * g_beta / (2.0 * gamma)
                           : 1.0 + n * g_beta / gamma;
  return std::pow(n * n / denom, 0.25);
}

double coherence_time(const NumberStatistics& stats, double g_beta) {
  if (!(stats.sigma_n > 0.0)) throw DomainError("coherence_time: sigma_n must be positive");
  if (g_beta < 0.0) throw DomainError("coherence_time: g_beta must be >= 0");
  if (g_beta == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (g_beta * stats.sigma_n);
}

double FockState::norm() const {
  double s = 0.0;
  for (const auto& c : amplitudes) s += std::norm(c);
  return s;
}

double FockState::variance() const {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double p = std::norm(amplitudes[i]);
    const double n = static_cast<double>(n_min) + static_cast<double>(i);
    m1 += p * n;
    m2 += p * n * n;
  }
  return m2 - m1 * m1;
}

FockState make_fock_state(const NumberStatistics& stats, double truncation_sigmas) {
  if (truncation_sigmas < 6.0)
    throw DomainError("make_fock_state: truncation window must cover >= 6 sigma");
  const double n_bar = stats.mean_n;
  const double sigma = stats.sigma_n;

  FockState state;
  state.mean_n = n_bar;

  const double half = std::max(1.0, std::ceil(truncation_sigmas * sigma));
  const int lo_unclipped = static_cast<int>(std::floor(n_bar - half));
  const int lo = std::max(0, lo_unclipped);
  const int hi = static_cast<int>(std::ceil(n_bar + half));
  state.n_min = lo;
  state.amplitudes.resize(hi - lo + 1);

  double total = 0.0;
  if (stats.regime == NumberRegime::coherent) {
    state.alpha = std::sqrt(n_bar);
    // log-space Poisson weights; alpha real positive by convention
    for (int n = lo; n <= hi; ++n) {
      const double logp = n * std::log(n_bar) - n_bar - std::lgamma(n + 1.0);
      const double c = std::exp(0.5 * logp);
      state.amplitudes[n - lo] = c;
      total += c * c;
    }
  } else {
    // Gaussian-weighted real amplitudes: |c_n|^2 has variance sigma^2
    for (int n = lo; n <= hi; ++n) {
      const double z = (n - n_bar) / (2.0 * sigma);
      const double c = std::exp(-z * z);
      state.amplitudes[n - lo] = c;
      total += c * c;
    }
  }

  // Anything clipped by the n >= 0 boundary (window tails are already inside
  // the truncation budget by construction).  Poisson has no support below 0.
  double clipped = 0.0;
  if (lo_unclipped < 0 && stats.regime != NumberRegime::coherent) {
    for (int n = lo_unclipped; n < 0; ++n) {
      const double z = (n - n_bar) / (2.0 * sigma);
      clipped += std::exp(-2.0 * z * z);
    }
  }
  state.lost_norm = clipped / (total + clipped);
  if (state.lost_norm > 1e-8)
    throw ConvergenceError("make_fock_state: window clipped at n = 0 with lost norm > 1e-8");

  const double inv = 1.0 / std::sqrt(total);
  for (auto& c : state.amplitudes) c *= inv;
  return state;
}

std::complex<double> order_parameter(const FockState& state, double g_beta, double t) {
  std::complex<double> acc{0.0, 0.0};
  const int count = static_cast<int>(state.amplitudes.size());
  for (int i = 0; i + 1 < count; ++i) {
    const double n = static_cast<double>(state.n_min + i);
    const double phase = -g_beta * n * t;
    acc += std::conj(state.amplitudes[i]) * state.amplitudes[i + 1] *
           std::sqrt(n + 1.0) * std::polar(1.0, phase);
  }
  return acc;
}

double order_collapse_envelope(double mean_n, double sigma_n, double g_beta, double t) {
  const double arg = sigma_n * g_beta * t;
  return std::sqrt(mean_n) * std::exp(-0.5 * arg * arg);
}

double quantum_depletion(double n, double g_beta, double gamma, int n_sites) {
  if (n_sites < 4) throw DomainError("quantum_depletion: n_sites must be >= 4");
  if (!(n >= 1.0)) throw DomainError("quantum_depletion: n must be >= 1");
  if (g_beta < 0.0 || gamma < 0.0)
    throw DomainError("quantum_depletion: rates must be >= 0");
  if (g_beta == 0.0) return 0.0;

  const double gn = g_beta * n;
  double sum = 0.0;
  for (int k = 1; k < n_sites; ++k) {  // q = 0 excluded
    const double qd = kTwoPi * k / n_sites;
    const double s = std::sin(0.5 * qd);
    const double eps = 4.0 * gamma * s * s;
    const double e_q = std::sqrt(eps * (eps + 2.0 * gn));
    if (e_q == 0.0) continue;
    sum += 0.5 * ((eps + gn) / e_q - 1.0);
  }
  const double depletion = sum / (n * n_sites);
  return std::min(depletion, 1.0 - 1e-15);
}

double two_site_plasma_frequency(int n_total, double gamma, double g_beta) {
  return std::sqrt(2.0 * gamma * g_beta * n_total + 4.0 * gamma * gamma);
}

namespace {

// Dominant angular frequency of a uniformly sampled real signal by DFT with a
// Hann window and parabolic interpolation of the log-magnitude peak.
double spectral_peak(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 8) return 0.0;
  const double dt = t[1] - t[0];
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);

  const std::size_t n_freq = n / 2;
  std::vector<double> mag(n_freq, 0.0);
  for (std::size_t m = 1; m < n_freq; ++m) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double w = 0.5 * (1.0 - std::cos(kTwoPi * j / (n - 1)));
      acc += w * (y[j] - mean) * std::polar(1.0, -kTwoPi * double(m) * double(j) / double(n));
    }
    mag[m] = std::abs(acc);
  }
  std::size_t peak = 1;
  for (std::size_t m = 2; m < n_freq; ++m)
    if (mag[m] > mag[peak]) peak = m;

  double delta = 0.0;
  if (peak > 1 && peak + 1 < n_freq && mag[peak] > 0.0) {
    const double la = std::log(std::max(mag[peak - 1], 1e-300));
    const double lb = std::log(mag[peak]);
    const double lc = std::log(std::max(mag[peak + 1], 1e-300));
    const double den = la - 2.0 * lb + lc;
    if (den < 0.0) delta = 0.5 * (la - lc) / den;
  }
  return kTwoPi * (static_cast<double>(peak) + delta) / (dt * static_cast<double>(n));
}

}  // namespace

TwoSiteResult two_site_exact(int n_total, double gamma, double g_beta,
                             const std::vector<double>& t_grid, double initial_phase) {
  if (n_total < 1) throw DomainError("two_site_exact: n_total must be >= 1");
  if (n_total > 2000) throw SizeError("two_site_exact: dimension n_total + 1 exceeds 2001");
  if (t_grid.empty()) throw DomainError("two_site_exact: empty time grid");

  const int dim = n_total + 1;

  // H = -gamma (a1^dag a2 + h.c.) + (gbeta/2) sum_i n_i (n_i - 1) on |n, N-n>
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) {
    const double n1 = n, n2 = n_total - n;
    h(n, n) = 0.5 * g_beta * (n1 * (n1 - 1.0) + n2 * (n2 - 1.0));
    if (n + 1 < dim) {
      const double hop = -gamma * std::sqrt((n1 + 1.0) * n2);
      h(n, n + 1) = hop;
      h(n + 1, n) = hop;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  const Eigen::MatrixXd& vec = solver.eigenvectors();
  const Eigen::VectorXd& val = solver.eigenvalues();

  // Binomial (coherently split) state with a relative phase twist:
  //   c_n = sqrt(C(N, n)) / 2^{N/2} e^{i phi n}
  Eigen::VectorXcd psi0(dim);
  for (int n = 0; n < dim; ++n) {
    const double logc = 0.5 * (std::lgamma(n_total + 1.0) - std::lgamma(n + 1.0) -
                               std::lgamma(n_total - n + 1.0) - n_total * std::log(2.0));
    psi0(n) = std::polar(std::exp(logc), initial_phase * n);
  }
  psi0.normalize();
  const Eigen::VectorXcd coeff = vec.adjoint() * psi0;

  TwoSiteResult result;
  result.times = t_grid;
  result.coherence.reserve(t_grid.size());
  result.imbalance.reserve(t_grid.size());

  Eigen::VectorXcd psi(dim), shifted(dim);
  for (double t : t_grid) {
    Eigen::VectorXcd phase(dim);
    for (int k = 0; k < dim; ++k) phase(k) = std::polar(1.0, -val(k) * t);
    psi = vec * coeff.cwiseProduct(phase).eval();

    // <a1^dag a2> couples n -> n+1; <n1 - n2> is diagonal
    std::complex<double> coh{0.0, 0.0};
    double imb = 0.0;
    for (int n = 0; n < dim; ++n) {
      const double p = std::norm(psi(n));
      imb += p * (2.0 * n - n_total);
      if (n + 1 < dim)
        coh += std::conj(psi(n + 1)) * psi(n) *
               std::sqrt((n + 1.0) * (n_total - n));
    }
    result.coherence.push_back(coh);
    result.imbalance.push_back(imb / n_total);
  }
  result.dominant_omega = spectral_peak(result.times, result.imbalance);
  return result;
}

}  // namespace blochsim
