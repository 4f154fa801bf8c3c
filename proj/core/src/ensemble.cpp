#include "blochsim/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "blochsim/errors.hpp"
#include "blochsim/rng.hpp"

namespace blochsim {

double ArrayState::norm() const {
  double s = 0.0;
  for (const auto& a : amplitudes) s += std::norm(a);
  return s;
}

double ArrayState::energy(double g_beta) const {
  double e = 0.0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double w = std::norm(amplitudes[i]);
    e += (site_energies[i] + 0.5 * g_beta * total_atoms * w) * w;
  }
  return e;
}

std::vector<double> mean_occupations(const LatticeConfig& config) {
  config.validate();
  const int sites = config.site_count();
  const int c = sites / 2;
  std::vector<double> occ(sites);
  for (int i = 0; i < sites; ++i) {
    const double u = (i - c) / config.array_radius_sites;
    occ[i] = config.central_occupation * std::exp(-u * u);
  }
  return occ;
}

namespace {

double site_sigma(double n_i, const EnsembleSpec& spec, const HubbardParams& params) {
  switch (spec.number_sigma_model) {
    case NumberRegime::coherent:
      return std::sqrt(n_i);
    case NumberRegime::squeezed:
      return squeezed_sigma(std::max(n_i, 1.0), params.g_beta, params.gamma, spec.variant);
    case NumberRegime::fock:
      return 1e-9;
  }
  return std::sqrt(n_i);
}

}  // namespace

std::vector<ArrayState> init_array(const LatticeConfig& config,
                                   const HubbardParams& params,
                                   const EnsembleSpec& spec) {
  if (spec.n_samples < 1) throw DomainError("init_array: n_samples must be >= 1");
  const std::vector<double> occ = mean_occupations(config);
  const int sites = static_cast<int>(occ.size());
  const int c = sites / 2;

  // Aggregate bias of the truncated-at-zero number draws; a sub-percent
  // effect for any reasonable envelope, rejected if larger.
  double bias = 0.0, total = 0.0;
  for (double n_i : occ) {
    const double sig = site_sigma(std::max(n_i, 1e-12), spec, params);
    if (sig > 0.0) {
      const double z = n_i / sig;
      const double phi = std::exp(-0.5 * z * z) / std::sqrt(kTwoPi);
      const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
      if (cdf > 1e-300) bias += sig * phi / cdf;
    }
    total += n_i;
  }
  if (bias > 0.01 * total)
    throw ConfigError("init_array: envelope so narrow that zero-truncation bias exceeds 1%");

  std::vector<ArrayState> samples(spec.n_samples);
  for (int s = 0; s < spec.n_samples; ++s) {
    auto rng = substream(spec.master_seed, static_cast<std::uint64_t>(s) + 1);
    std::normal_distribution<double> unit(0.0, 1.0);

    ArrayState state;
    state.occupations = occ;
    state.site_energies.resize(sites);
    state.amplitudes.resize(sites);

    std::vector<double> n(sites);
    std::vector<double> theta(sites);
    double n_tot = 0.0;
    for (int i = 0; i < sites; ++i) {
      state.site_energies[i] = config.gradient_e * (i - c);
      const double sig_n = site_sigma(occ[i], spec, params);
      double draw = occ[i] + sig_n * unit(rng);
      if (draw < 0.0) draw = 0.0;
      n[i] = draw;
      n_tot += draw;
      const double sig_theta =
          spec.phase_sigma >= 0.0 ? spec.phase_sigma : 1.0 / (2.0 * sig_n);
      theta[i] = sig_theta * unit(rng);
    }
    if (!(n_tot > 0.0)) throw ConfigError("init_array: drew an empty array");

    for (int i = 0; i < sites; ++i)
      state.amplitudes[i] = std::polar(std::sqrt(n[i] / n_tot), theta[i]);
    state.total_atoms = n_tot;
    samples[s] = std::move(state);
  }
  return samples;
}

double stable_timestep(const ArrayState& state, const HubbardParams& params,
                       double gradient_e) {
  const double n_max =
      *std::max_element(state.occupations.begin(), state.occupations.end());
  const double rate = std::max({params.gamma, std::abs(gradient_e),
                                params.g_beta * std::max(n_max, state.total_atoms /
                                    static_cast<double>(state.amplitudes.size())),
                                1e3});
  return 1.0 / (50.0 * rate);
}

namespace {

using Cvec = std::vector<std::complex<double>>;

// RHS in the tilted gauge b_i = a_i e^{i eps_i t}:
//   i db_i/dt = -gamma (b_{i+1} e^{-i E t} + b_{i-1} e^{+i E t}) + U_i(b) b_i
// where U_i = gbeta (n_i - nbar_i) when the trap compensation is active
// (static trap in equilibrium with the mean envelope), else gbeta n_i.
struct GaugeRhs {
  double gamma;
  double g_beta;
  double gradient_e;
  double total_atoms;
  bool compensate;
  const std::vector<double>* mean_occ;

  void operator()(const Cvec& b, double t, Cvec& dbdt) const {
    const int n = static_cast<int>(b.size());
    const std::complex<double> hop_dn = std::polar(1.0, -gradient_e * t);
    const std::complex<double> hop_up = std::conj(hop_dn);
    for (int i = 0; i < n; ++i) {
      std::complex<double> acc{0.0, 0.0};
      if (i + 1 < n) acc += b[i + 1] * hop_dn;
      if (i > 0) acc += b[i - 1] * hop_up;
      double u = g_beta * total_atoms * std::norm(b[i]);
      if (compensate) u -= g_beta * (*mean_occ)[i];
      const std::complex<double> rhs = -gamma * acc + u * b[i];
      dbdt[i] = std::complex<double>(rhs.imag(), -rhs.real());  // multiply by -i
    }
  }
};

void rk4_step(const GaugeRhs& rhs, Cvec& b, double t, double dt, Cvec& k1, Cvec& k2,
              Cvec& k3, Cvec& k4, Cvec& tmp) {
  const int n = static_cast<int>(b.size());
  rhs(b, t, k1);
  for (int i = 0; i < n; ++i) tmp[i] = b[i] + 0.5 * dt * k1[i];
  rhs(tmp, t + 0.5 * dt, k2);
  for (int i = 0; i < n; ++i) tmp[i] = b[i] + 0.5 * dt * k2[i];
  rhs(tmp, t + 0.5 * dt, k3);
  for (int i = 0; i < n; ++i) tmp[i] = b[i] + dt * k3[i];
  rhs(tmp, t + dt, k4);
  for (int i = 0; i < n; ++i)
    b[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

Trajectory evolve(const ArrayState& initial, const HubbardParams& params,
                  double gradient_e, double dt,
                  const std::vector<double>& snapshot_times,
                  const EvolveOptions& options) {
  if (snapshot_times.empty()) throw DomainError("evolve: no snapshot times");
  for (std::size_t i = 1; i < snapshot_times.size(); ++i)
    if (snapshot_times[i] < snapshot_times[i - 1])
      throw DomainError("evolve: snapshot times must be non-decreasing");

  const double dt_max = stable_timestep(initial, params, gradient_e);
  const double step = dt > 0.0 ? dt : dt_max;
  if (step > dt_max * (1.0 + 1e-12))
    throw DomainError("evolve: dt exceeds the stability bound 1/(50 max rate)");

  GaugeRhs rhs{params.gamma, params.g_beta, gradient_e,
               initial.total_atoms, options.trap_compensation,
               &initial.occupations};

  const int sites = static_cast<int>(initial.amplitudes.size());
  Cvec b(initial.amplitudes);
  // enter the gauge at t0 (phases vanish when t0 = 0)
  const double t0 = initial.time;
  const int c = sites / 2;
  for (int i = 0; i < sites; ++i)
    b[i] *= std::polar(1.0, gradient_e * (i - c) * t0);

  Cvec k1(sites), k2(sites), k3(sites), k4(sites), tmp(sites);

  Trajectory out;
  out.times = snapshot_times;
  out.states.reserve(snapshot_times.size());

  double t = t0;
  double max_drift = 0.0;
  for (double target : snapshot_times) {
    if (target < t0 - 1e-15) throw DomainError("evolve: snapshot before initial time");
    while (target - t > 1e-15) {
      const double h = std::min(step, target - t);
      rk4_step(rhs, b, t, h, k1, k2, k3, k4, tmp);
      t += h;
    }
    ArrayState snap;
    snap.occupations = initial.occupations;
    snap.site_energies = initial.site_energies;
    snap.total_atoms = initial.total_atoms;
    snap.time = target;
    snap.amplitudes.resize(sites);
    for (int i = 0; i < sites; ++i)
      snap.amplitudes[i] = b[i] * std::polar(1.0, -gradient_e * (i - c) * target);
    max_drift = std::max(max_drift, std::abs(snap.norm() - 1.0));
    out.states.push_back(std::move(snap));
  }

  out.max_norm_drift = max_drift;
  const double span_ms = (snapshot_times.back() - t0) / kMs;
  out.norm_drift_per_ms = span_ms > 0.0 ? max_drift / span_ms : max_drift;
  if (max_drift > 1e-6)
    throw ConvergenceError("evolve: norm drift exceeded 1e-6 over the run (reduce dt)");
  return out;
}

Quasimomentum quasimomentum(const ArrayState& state) {
  const int n = static_cast<int>(state.amplitudes.size());
  if (n < 2) throw DomainError("quasimomentum: need at least 2 sites");
  std::complex<double> resultant{0.0, 0.0};
  double weight = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    resultant += state.amplitudes[i + 1] * std::conj(state.amplitudes[i]);
    weight += std::abs(state.amplitudes[i + 1]) * std::abs(state.amplitudes[i]);
  }
  Quasimomentum q;
  q.resultant = weight > 0.0 ? std::abs(resultant) / weight : 0.0;
  if (q.resultant < 1e-3) {
    q.defined = false;
    return q;
  }
  double frac = std::arg(resultant) / kTwoPi;
  if (frac <= -0.5) frac += 1.0;
  q.zone_fraction = frac;
  return q;
}

void parallel_for_samples(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace blochsim
