#include "esr/rates.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <numbers>

#include "esr/error.hpp"

namespace esr {

namespace {

constexpr double pi = std::numbers::pi;
// Fermi tails beyond this many kT are below 1e-21 and treated as exact steps.
constexpr double tail_width_kt = 48.0;

struct GslWorkspace {
  explicit GslWorkspace(std::size_t n) : ptr(gsl_integration_workspace_alloc(n)) {}
  ~GslWorkspace() { gsl_integration_workspace_free(ptr); }
  GslWorkspace(const GslWorkspace&) = delete;
  GslWorkspace& operator=(const GslWorkspace&) = delete;
  gsl_integration_workspace* ptr;
};

constexpr std::size_t workspace_size = 2000;

struct Integrand {
  double mu;
  double kt;
  double energy;
  double eta;
  bool holes;  // integrate 1 - f instead of f
  enum class Kernel { lorentzian, shift, bare } kernel;
};

double occupation(const Integrand& p, double x) {
  const double f = fermi_occupation(x, p.mu, p.kt);
  return p.holes ? fermi_occupation(-x, -p.mu, p.kt) : f;
}

double integrand(double x, void* params) {
  const auto& p = *static_cast<const Integrand*>(params);
  const double y = x - p.energy;
  const double g = occupation(p, x);
  switch (p.kernel) {
    case Integrand::Kernel::lorentzian:
      return g * p.eta / (y * y + p.eta * p.eta) / pi;
    case Integrand::Kernel::shift:
      return g * y / (y * y + p.eta * p.eta);
    case Integrand::Kernel::bare:
      return g;  // Cauchy weight 1/(x - energy) supplied by the quadrature rule
  }
  return 0.0;
}

class GslErrorGuard {
 public:
  GslErrorGuard() : previous_(gsl_set_error_handler_off()) {}
  ~GslErrorGuard() { gsl_set_error_handler(previous_); }

 private:
  gsl_error_handler_t* previous_;
};

double integrate(Integrand p, double a, double b) {
  if (!(b > a)) return 0.0;
  GslErrorGuard guard;
  GslWorkspace ws(workspace_size);
  gsl_function fn{&integrand, &p};
  double result = 0.0;
  double abserr = 0.0;
  int status = 0;
  if (p.kernel == Integrand::Kernel::bare) {
    status = gsl_integration_qawc(&fn, a, b, p.energy, 1e-13, 1e-10, workspace_size, ws.ptr, &result, &abserr);
  } else {
    std::vector<double> points{a};
    for (double c : {p.mu, p.energy})
      if (c > a && c < b) points.push_back(c);
    points.push_back(b);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    status = gsl_integration_qagp(&fn, points.data(), points.size(), 1e-13, 1e-10, workspace_size, ws.ptr,
                                  &result, &abserr);
  }
  if (status != GSL_SUCCESS && std::abs(abserr) > 1e-8 * std::max(1.0, std::abs(result)))
    throw NumericalError(std::string("Fermi integral did not converge: ") + gsl_strerror(status));
  return result;
}

// (1/pi) int_a^b eta / ((x - e)^2 + eta^2) dx
double lorentzian_mass(double a, double b, double e, double eta) {
  if (!(b > a)) return 0.0;
  return (std::atan((b - e) / eta) - std::atan((a - e) / eta)) / pi;
}

// int_a^b (x - e) / ((x - e)^2 + eta^2) dx, principal value when eta = 0
double shift_mass(double a, double b, double e, double eta) {
  if (!(b > a)) return 0.0;
  const double ya = a - e;
  const double yb = b - e;
  return 0.5 * std::log((yb * yb + eta * eta) / (ya * ya + eta * eta));
}

struct BandSplit {
  double lower;  // band bottom
  double a;      // start of thermal window
  double b;      // end of thermal window
  double upper;  // band top
};

// The thermal window is widened when its edge would sit on the singular point.
BandSplit split_band(double mu, double kt, double energy, double w) {
  double half = tail_width_kt * kt;
  for (int k = 0; k < 8; ++k) {
    const double a = mu - half;
    const double b = mu + half;
    if (std::abs(energy - a) > 1e-3 * kt && std::abs(energy - b) > 1e-3 * kt) break;
    half += kt;
  }
  return {-w, std::clamp(mu - half, -w, w), std::clamp(mu + half, -w, w), w};
}

// Returns (smeared occupation, shift integral) for f or 1 - f.
std::pair<double, double> band_integrals(const ElectrodeSpec& el, double energy, const RateOptions& opt,
                                         bool holes) {
  const double mu = el.mu_ghz();
  const double kt = el.kt_ghz();
  const double eta = units::uev_to_ghz(opt.level_broadening_uev);
  const double w = units::mev_to_ghz(opt.bandwidth_mev);
  const BandSplit s = split_band(mu, kt, energy, w);
  // Outside the thermal window the occupation is exactly 1 below and 0 above (f),
  // or the reverse (1 - f).
  const double fill_lo = holes ? s.b : s.lower;
  const double fill_hi = holes ? s.upper : s.a;

  double real = 0.0;
  if (eta > 0.0) {
    real = lorentzian_mass(fill_lo, fill_hi, energy, eta) +
           integrate({mu, kt, energy, eta, holes, Integrand::Kernel::lorentzian}, s.a, s.b);
  } else if (energy >= -w && energy <= w) {
    real = holes ? fermi_occupation(-energy, -mu, kt) : fermi_occupation(energy, mu, kt);
  }

  double shift = 0.0;
  if (opt.principal_value) {
    shift = shift_mass(fill_lo, fill_hi, energy, eta);
    if (eta > 0.0 || !(energy > s.a && energy < s.b)) {
      Integrand p{mu, kt, energy, eta, holes, Integrand::Kernel::shift};
      shift += integrate(p, s.a, s.b);
    } else {
      shift += integrate({mu, kt, energy, 0.0, holes, Integrand::Kernel::bare}, s.a, s.b);
    }
  }
  return {real, shift};
}

struct Transition {
  std::size_t hi;  // state with one electron more
  std::size_t lo;
  double energy;   // E_hi - E_lo
};

// Gamma_{vl,ju} = sum_c <l|D_c|v> <j|L_c|u>^*, with D_c = d_s (removal) or d_s^dagger
// (addition) and L_c the polarization-weighted operator dressed by the Fermi transforms.
// In symmetric mode a product of two transitions uses the geometric mean of their
// occupations and the energy shift at their mean energy, which makes the generator
// exactly of Lindblad form; terms with equal transition energies are unchanged.
std::vector<cplx> electrode_tensor(const EigenBasis& basis, const ElectrodeSpec& el, const RateOptions& opt) {
  const std::size_t n = basis.size();
  std::vector<cplx> gamma(n * n * n * n, cplx{0.0, 0.0});
  if (el.base_rate_uev == 0.0) return gamma;
  const double rate = units::uev_to_ghz(el.base_rate_uev);
  const Eigen::Matrix2cd p = el.polarization_matrix();

  std::vector<Transition> transitions;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (basis.charge_of_state[a] != basis.charge_of_state[b] + 1) continue;
      if (std::abs(basis.d[0](b, a)) > 1e-14 || std::abs(basis.d[1](b, a)) > 1e-14)
        transitions.push_back({a, b, basis.gap(a, b)});
    }
  const std::size_t m = transitions.size();

  // Occupations and shifts per transition energy; shifts at mean energies are cached.
  std::vector<double> particle_occ(m), hole_occ(m), particle_shift(m), hole_shift(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::tie(particle_occ[k], particle_shift[k]) = band_integrals(el, transitions[k].energy, opt, false);
    std::tie(hole_occ[k], hole_shift[k]) = band_integrals(el, transitions[k].energy, opt, true);
  }
  std::map<double, std::pair<double, double>> shift_cache;
  auto mean_shift = [&](std::size_t a, std::size_t b) -> std::pair<double, double> {
    if (a == b || !opt.principal_value) return {particle_shift[b], hole_shift[b]};
    const double e = 0.5 * (transitions[a].energy + transitions[b].energy);
    auto it = shift_cache.find(e);
    if (it == shift_cache.end()) {
      const double ps = band_integrals(el, e, opt, false).second;
      const double hs = band_integrals(el, e, opt, true).second;
      it = shift_cache.emplace(e, std::make_pair(ps, hs)).first;
    }
    return it->second;
  };

  for (std::size_t a = 0; a < m; ++a) {
    const auto& t1 = transitions[a];
    for (std::size_t b = 0; b < m; ++b) {
      const auto& t2 = transitions[b];
      cplx removal_weight{0.0, 0.0};
      cplx addition_weight{0.0, 0.0};
      for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
          removal_weight += std::conj(p(s, t)) * basis.d[s](t1.lo, t1.hi) * std::conj(basis.d[t](t2.lo, t2.hi));
          addition_weight += std::conj(p(t, s)) * std::conj(basis.d[s](t1.lo, t1.hi)) * basis.d[t](t2.lo, t2.hi);
        }
      if (removal_weight == cplx{} && addition_weight == cplx{}) continue;

      double particle_real = 0.5 * particle_occ[b];
      double hole_real = 0.5 * hole_occ[b];
      double ps = particle_shift[b];
      double hs = hole_shift[b];
      if (opt.symmetric_energies) {
        particle_real = 0.5 * std::sqrt(particle_occ[a] * particle_occ[b]);
        hole_real = 0.5 * std::sqrt(hole_occ[a] * hole_occ[b]);
        std::tie(ps, hs) = mean_shift(a, b);
      }
      if (!opt.principal_value) ps = hs = 0.0;
      const cplx particle{particle_real, ps / (2.0 * pi)};
      const cplx hole{hole_real, -hs / (2.0 * pi)};

      // removal: D = d (l = lo1, v = hi1), L element (j = lo2, u = hi2)
      gamma[((t1.hi * n + t1.lo) * n + t2.lo) * n + t2.hi] += rate * removal_weight * std::conj(hole);
      // addition: D = d^dagger (l = hi1, v = lo1), L element (j = hi2, u = lo2)
      gamma[((t1.lo * n + t1.hi) * n + t2.hi) * n + t2.lo] += rate * addition_weight * std::conj(particle);
    }
  }
  return gamma;
}

}  // namespace

void ElectrodeSpec::validate() const {
  if (label != "tip" && label != "substrate")
    throw ValidationError("electrode label must be tip or substrate, got '" + label + "'");
  if (!(temperature_k > 0.0) || !std::isfinite(temperature_k))
    throw ValidationError(label + ": temperature must be positive");
  if (spin_polarization.norm() > 1.0 + 1e-12)
    throw ValidationError(label + ": spin polarization magnitude exceeds 1");
  if (!(base_rate_uev >= 0.0) || !std::isfinite(base_rate_uev))
    throw ValidationError(label + ": base rate must be non-negative");
  if (!std::isfinite(chemical_potential_mev) || !std::isfinite(drive_amplitude))
    throw ValidationError(label + ": non-finite parameter");
}

Eigen::Matrix2cd ElectrodeSpec::polarization_matrix() const {
  const Vec3& q = spin_polarization;
  Eigen::Matrix2cd m;
  m << cplx{1.0 + q.z(), 0.0}, cplx{q.x(), -q.y()}, cplx{q.x(), q.y()}, cplx{1.0 - q.z(), 0.0};
  return 0.5 * m;
}

std::vector<ElectrodeSpec> symmetric_bias_electrodes(double bias_mv, ElectrodeSpec tip, ElectrodeSpec substrate) {
  tip.label = "tip";
  substrate.label = "substrate";
  tip.chemical_potential_mev = 0.5 * bias_mv;
  substrate.chemical_potential_mev = -0.5 * bias_mv;
  return {tip, substrate};
}

double fermi_occupation(double energy_ghz, double mu_ghz, double kt_ghz) {
  const double x = (energy_ghz - mu_ghz) / kt_ghz;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double fermi_occupation(double energy_ghz, const ElectrodeSpec& electrode) {
  return fermi_occupation(energy_ghz, electrode.mu_ghz(), electrode.kt_ghz());
}

FermiTransform fermi_transform(double energy_ghz, const ElectrodeSpec& electrode, const RateOptions& options) {
  const auto [pf, ps] = band_integrals(electrode, energy_ghz, options, false);
  const auto [hf, hs] = band_integrals(electrode, energy_ghz, options, true);
  return {cplx{0.5 * pf, ps / (2.0 * pi)}, cplx{0.5 * hf, -hs / (2.0 * pi)}};
}

void RateTensor::add_electrode(std::string label, std::vector<cplx> gamma) {
  if (gamma.size() != n_ * n_ * n_ * n_) throw std::invalid_argument("rate tensor size mismatch");
  labels_.push_back(std::move(label));
  gamma_.push_back(std::move(gamma));
}

std::size_t RateTensor::electrode_index(const std::string& label) const {
  for (std::size_t e = 0; e < labels_.size(); ++e)
    if (labels_[e] == label) return e;
  throw std::out_of_range("no electrode labelled '" + label + "'");
}

std::vector<cplx> RateTensor::total() const {
  std::vector<cplx> sum(n_ * n_ * n_ * n_, cplx{0.0, 0.0});
  for (const auto& g : gamma_)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g[i];
  return sum;
}

RateTensor RateTensor::only(std::size_t e) const {
  RateTensor out(n_);
  out.add_electrode(labels_.at(e), gamma_.at(e));
  return out;
}

RateTensor RateTensor::scaled(const std::vector<double>& factors) const {
  if (factors.size() != gamma_.size()) throw std::invalid_argument("one scale factor per electrode required");
  RateTensor out(n_);
  for (std::size_t e = 0; e < gamma_.size(); ++e) {
    std::vector<cplx> g = gamma_[e];
    for (auto& x : g) x *= factors[e];
    out.add_electrode(labels_[e], std::move(g));
  }
  return out;
}

RateModel::RateModel(const EigenBasis& basis, std::vector<ElectrodeSpec> electrodes, RateOptions options)
    : electrodes_(std::move(electrodes)), options_(options), static_(basis.size()) {
  if (!(options_.level_broadening_uev >= 0.0)) throw ValidationError("level broadening must be non-negative");
  if (!(options_.bandwidth_mev > 0.0)) throw ValidationError("bandwidth must be positive");
  for (const auto& el : electrodes_) {
    el.validate();
    static_.add_electrode(el.label, electrode_tensor(basis, el, options_));
  }
}

std::vector<double> RateModel::modulation(const PulseSegment& segment, double t) const {
  std::vector<double> out;
  out.reserve(electrodes_.size());
  for (const auto& el : electrodes_) {
    const double df = drive_factor(segment, el.drive_amplitude, t);
    out.push_back(df * df);
  }
  return out;
}

RateTensor RateModel::at(const PulseProgram& program, double t) const {
  return static_.scaled(modulation(program.segments[program.segment_at(t)], t));
}

RateTensor build_rate_tensor(const EigenBasis& basis, const std::vector<ElectrodeSpec>& electrodes,
                             const PulseProgram& program, double t, const RateOptions& options) {
  return RateModel(basis, electrodes, options).at(program, t);
}

Matrix dissipator(const Matrix& rho, const std::vector<cplx>& gamma, std::size_t n) {
  auto g = [&](std::size_t v, std::size_t l, std::size_t j, std::size_t u) {
    return gamma[((v * n + l) * n + j) * n + u];
  };
  // m_ju = sum_v Gamma_{jv,vu}
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) m(j, u) += g(j, v, v, u);

  Matrix out = -(rho * m.transpose()) - m.conjugate() * rho;
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      cplx acc{0.0, 0.0};
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t u = 0; u < n; ++u) {
          const cplx r = rho(v, u);
          if (r == cplx{}) continue;
          acc += (g(v, l, j, u) + std::conj(g(u, j, l, v))) * r;
        }
      out(l, j) += acc;
    }
  }
  return out;
}

Matrix qme_rhs(const Matrix& rho, const RateTensor& tensor, const EigenBasis& basis) {
  const std::size_t n = basis.size();
  if (static_cast<std::size_t>(rho.rows()) != n || static_cast<std::size_t>(rho.cols()) != n)
    throw std::invalid_argument("density matrix dimension does not match the basis");
  if (tensor.dimension() != n) throw std::invalid_argument("rate tensor dimension does not match the basis");
  const double drift = std::abs(rho.trace() - cplx{1.0, 0.0});
  if (drift > 1e-6) throw NumericalError("density matrix trace deviates from 1 by " + std::to_string(drift));

  Matrix out = Matrix::Zero(n, n);
  for (std::size_t e = 0; e < tensor.electrode_count(); ++e) out += dissipator(rho, tensor.electrode(e), n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t j = 0; j < n; ++j) out(l, j) -= cplx{0.0, basis.gap(l, j)} * rho(l, j);
  return units::two_pi * out;
}

}  // namespace esr
