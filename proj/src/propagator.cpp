#include "esr/propagator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "esr/error.hpp"

namespace esr {

namespace {

constexpr double trace_abort = 1e-6;
constexpr double eigenvalue_abort = -1e-6;

double electrode_sign(const std::string& label) { return label == "substrate" ? -1.0 : 1.0; }

// Master equation restricted to density-matrix entries between states of equal charge,
// a subspace the dynamics never leaves. Vectors hold those entries in `pairs` order.
class Engine {
 public:
  Engine(const EigenBasis& basis, const RateModel& rates, const std::optional<CoherentDrive>& drive,
         bool charge_blocks)
      : basis_(&basis), rates_(&rates), n_(basis.size()) {
    index_.assign(n_ * n_, -1);
    for (std::size_t l = 0; l < n_; ++l)
      for (std::size_t j = 0; j < n_; ++j)
        if (!charge_blocks || basis.charge_of_state[l] == basis.charge_of_state[j]) {
          index_[l * n_ + j] = static_cast<long>(pairs_.size());
          pairs_.emplace_back(l, j);
        }
    const auto s = static_cast<Eigen::Index>(pairs_.size());

    phase_.resize(s);
    for (Eigen::Index k = 0; k < s; ++k) {
      const auto [l, j] = pairs_[k];
      phase_[k] = cplx{0.0, -units::two_pi * basis.gap(l, j)};
    }

    const RateTensor& tensor = rates.static_tensor();
    const auto& electrodes = rates.electrodes();
    static_part_ = Matrix::Zero(s, s);
    for (std::size_t e = 0; e < tensor.electrode_count(); ++e) {
      Matrix sup = superoperator([&](const Matrix& unit) {
        return Matrix(units::two_pi * dissipator(unit, tensor.electrode(e), n_));
      });
      Eigen::RowVectorXcd flow = Eigen::RowVectorXcd::Zero(s);
      for (std::size_t l = 0; l < n_; ++l) {
        const long k = index_[l * n_ + l];
        if (k >= 0) flow += static_cast<double>(basis.charge_of_state[l]) * sup.row(k);
      }
      current_.push_back(units::pa_per_electron_per_ns * electrode_sign(electrodes[e].label) * flow);
      if (electrodes[e].drive_amplitude == 0.0) {
        static_part_ += sup;
      } else {
        driven_.push_back(e);
        driven_parts_.push_back(std::move(sup));
      }
    }
    full_static_ = static_part_;
    for (const auto& m : driven_parts_) full_static_ += m;

    if (drive && drive->amplitude_ghz != 0.0) {
      const Matrix& op = drive->op;
      if (static_cast<std::size_t>(op.rows()) != n_ || static_cast<std::size_t>(op.cols()) != n_)
        throw ValidationError("coherent drive operator has the wrong dimension");
      for (std::size_t l = 0; l < n_; ++l)
        for (std::size_t j = 0; j < n_; ++j)
          if (std::abs(op(l, j)) > 1e-12 && index_[l * n_ + j] < 0)
            throw ValidationError("coherent drive operator couples states of different charge");
      const cplx factor{0.0, -units::two_pi * drive->amplitude_ghz};
      drive_ = superoperator([&](const Matrix& unit) { return Matrix(factor * (op * unit - unit * op)); });
    }
  }

  std::size_t size() const { return pairs_.size(); }

  Vector pack(const Matrix& rho) const {
    Vector v(static_cast<Eigen::Index>(pairs_.size()));
    for (std::size_t k = 0; k < pairs_.size(); ++k) v[k] = rho(pairs_[k].first, pairs_[k].second);
    return v;
  }

  Matrix unpack(const Vector& v) const {
    Matrix rho = Matrix::Zero(n_, n_);
    for (std::size_t k = 0; k < pairs_.size(); ++k) rho(pairs_[k].first, pairs_[k].second) = v[k];
    return rho;
  }

  bool supports(const Matrix& rho) const {
    for (std::size_t l = 0; l < n_; ++l)
      for (std::size_t j = 0; j < n_; ++j)
        if (index_[l * n_ + j] < 0 && std::abs(rho(l, j)) > 1e-14) return false;
    return true;
  }

  // Everything except the diagonal free evolution.
  Vector nonlinear(const PulseSegment& seg, double t, const Vector& v) const {
    if (!seg.driven()) return full_static_ * v;
    Vector out = static_part_ * v;
    const auto& electrodes = rates_->electrodes();
    for (std::size_t k = 0; k < driven_.size(); ++k) {
      const double df = drive_factor(seg, electrodes[driven_[k]].drive_amplitude, t);
      out.noalias() += (df * df) * (driven_parts_[k] * v);
    }
    if (drive_.size() > 0) {
      double s = 0.0;
      for (const auto& tone : seg.tones) s += std::cos(units::two_pi * tone.frequency_ghz * t + tone.phase);
      out.noalias() += (seg.amplitude_scale * s) * (drive_ * v);
    }
    return out;
  }

  Vector full(const PulseSegment& seg, double t, const Vector& v) const {
    return phase_.cwiseProduct(v) + nonlinear(seg, t, v);
  }

  void set_step(double h) {
    if (h == cached_h_) return;
    cached_h_ = h;
    exp_full_ = (phase_ * h).array().exp().matrix();
    exp_half_ = (phase_ * (0.5 * h)).array().exp().matrix();
  }

  void step(Integrator integrator, const PulseSegment& seg, double t, double h, Vector& v) {
    if (integrator == Integrator::rk4) {
      const Vector k1 = full(seg, t, v);
      const Vector k2 = full(seg, t + 0.5 * h, v + 0.5 * h * k1);
      const Vector k3 = full(seg, t + 0.5 * h, v + 0.5 * h * k2);
      const Vector k4 = full(seg, t + h, v + h * k3);
      v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      return;
    }
    // Runge-Kutta in the interaction picture of the free evolution (Lawson).
    set_step(h);
    const Vector vh = exp_half_.cwiseProduct(v);
    const Vector k1 = nonlinear(seg, t, v);
    const Vector k2 = nonlinear(seg, t + 0.5 * h, vh + 0.5 * h * exp_half_.cwiseProduct(k1));
    const Vector k3 = nonlinear(seg, t + 0.5 * h, vh + 0.5 * h * k2);
    const Vector k4 = nonlinear(seg, t + h, exp_full_.cwiseProduct(v) + h * exp_half_.cwiseProduct(k3));
    v = exp_full_.cwiseProduct(v) +
        (h / 6.0) * (exp_full_.cwiseProduct(k1) + 2.0 * exp_half_.cwiseProduct(k2 + k3) + k4);
  }

  double current(std::size_t e, const PulseSegment& seg, double t, const Vector& v) const {
    double scale = 1.0;
    if (seg.driven()) {
      const double df = drive_factor(seg, rates_->electrodes()[e].drive_amplitude, t);
      scale = df * df;
    }
    return scale * (current_[e] * v).value().real();
  }

  cplx trace(const Vector& v) const {
    cplx tr{0.0, 0.0};
    for (std::size_t l = 0; l < n_; ++l) tr += v[index_[l * n_ + l]];
    return tr;
  }

 private:
  template <class F>
  Matrix superoperator(F&& apply) const {
    const auto s = static_cast<Eigen::Index>(pairs_.size());
    Matrix sup = Matrix::Zero(s, s);
    for (Eigen::Index c = 0; c < s; ++c) {
      Matrix unit = Matrix::Zero(n_, n_);
      unit(pairs_[c].first, pairs_[c].second) = 1.0;
      const Matrix col = apply(unit);
      for (Eigen::Index r = 0; r < s; ++r) sup(r, c) = col(pairs_[r].first, pairs_[r].second);
    }
    return sup;
  }

  const EigenBasis* basis_;
  const RateModel* rates_;
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<long> index_;
  Vector phase_;
  Matrix static_part_;
  Matrix full_static_;
  std::vector<std::size_t> driven_;
  std::vector<Matrix> driven_parts_;
  Matrix drive_;
  std::vector<Eigen::RowVectorXcd> current_;
  double cached_h_ = -1.0;
  Vector exp_full_;
  Vector exp_half_;
};

void check_state(const Matrix& rho, double t) {
  const double drift = std::abs(rho.trace() - cplx{1.0, 0.0});
  if (!(drift <= trace_abort)) {
    std::ostringstream os;
    os << "trace drifted by " << drift << " at t = " << t << " ns";
    throw NumericalError(os.str());
  }
  const Matrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  const double lowest = es.eigenvalues().minCoeff();
  if (!(lowest >= eigenvalue_abort)) {
    std::ostringstream os;
    os << "density matrix lost positivity at t = " << t << " ns (eigenvalue " << lowest << ")";
    throw NumericalError(os.str());
  }
}

void validate_density_matrix(const Matrix& rho, std::size_t n) {
  if (static_cast<std::size_t>(rho.rows()) != n || static_cast<std::size_t>(rho.cols()) != n)
    throw ValidationError("initial density matrix does not match the basis dimension");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError("initial density matrix is not Hermitian");
  check_state(rho, 0.0);
}

std::size_t steps_for(double duration, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / dt - 1e-9)));
}

}  // namespace

Matrix initial_state(const EigenBasis& basis, InitialMode mode, double temperature_k,
                     const std::vector<double>& weights) {
  const std::size_t n = basis.size();
  Matrix rho = Matrix::Zero(n, n);
  switch (mode) {
    case InitialMode::ground:
      rho(0, 0) = 1.0;
      break;
    case InitialMode::thermal: {
      if (!(temperature_k > 0.0)) throw ValidationError("thermal state needs a positive temperature");
      const double kt = units::kelvin_to_ghz(temperature_k);
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += std::exp(-basis.energies()[i] / kt);
      for (std::size_t i = 0; i < n; ++i) rho(i, i) = std::exp(-basis.energies()[i] / kt) / z;
      break;
    }
    case InitialMode::custom: {
      if (weights.size() > n) throw ValidationError("more initial weights than basis states");
      double sum = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("initial weights must be non-negative");
        sum += w;
      }
      if (!(sum > 0.0)) throw ValidationError("initial weights are all zero");
      for (std::size_t i = 0; i < weights.size(); ++i) rho(i, i) = weights[i] / sum;
      break;
    }
  }
  return rho;
}

double default_time_step(const EigenBasis& basis, const PulseProgram& program) {
  double fmax = 0.0;
  const std::size_t n = basis.size();
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t j = 0; j < n; ++j)
      if (basis.charge_of_state[l] == basis.charge_of_state[j]) fmax = std::max(fmax, std::abs(basis.gap(l, j)));
  for (const auto& seg : program.segments)
    if (seg.driven())
      for (const auto& tone : seg.tones) fmax = std::max(fmax, std::abs(tone.frequency_ghz));
  if (fmax == 0.0) return 0.01;
  return 1.0 / (50.0 * fmax);
}

double electrode_current(const Matrix& rho, const RateTensor& tensor, const EigenBasis& basis,
                         const std::string& electrode) {
  const std::size_t e = tensor.electrode_index(electrode);
  const Matrix flow = units::two_pi * dissipator(rho, tensor.electrode(e), basis.size());
  double dn = 0.0;
  for (std::size_t l = 0; l < basis.size(); ++l) dn += basis.charge_of_state[l] * flow(l, l).real();
  return electrode_sign(electrode) * units::pa_per_electron_per_ns * dn;
}

DensityMatrixTrajectory propagate(const EigenBasis& basis, const RateModel& rates, const PulseProgram& program,
                                  const Matrix& rho0, const PropagationOptions& options) {
  program.validate();
  const std::size_t n = basis.size();
  validate_density_matrix(rho0, n);
  if (!(options.sample_interval > 0.0)) throw ValidationError("sample interval must be positive");
  const double dt = options.dt > 0.0 ? options.dt : default_time_step(basis, program);

  Engine engine(basis, rates, options.coherent_drive, true);
  if (!engine.supports(rho0)) engine = Engine(basis, rates, options.coherent_drive, false);

  DensityMatrixTrajectory traj;
  traj.dt = dt;
  const std::size_t n_electrodes = rates.electrodes().size();
  for (const auto& el : rates.electrodes()) traj.current_labels.push_back(el.label);
  const std::size_t spin_cols = 3 * basis.spins.size();

  std::vector<double> pops;
  std::vector<double> spins;
  std::vector<double> currents;

  auto record = [&](double t, const PulseSegment& seg, const Vector& v) {
    const Matrix rho = engine.unpack(v);
    check_state(rho, t);
    const std::size_t sample = traj.times.size();
    traj.times.push_back(t);
    for (std::size_t i = 0; i < n; ++i) pops.push_back(rho(i, i).real());
    for (const auto& site : basis.spins)
      for (const auto& s : site) spins.push_back((rho.cwiseProduct(s.transpose())).sum().real());
    for (std::size_t e = 0; e < n_electrodes; ++e) currents.push_back(engine.current(e, seg, t, v));
    if (options.rho_stride > 0 && sample % options.rho_stride == 0) {
      traj.rho_sample_index.push_back(sample);
      traj.rho.push_back(rho);
    }
    if (options.observer) options.observer(sample, t, rho);
  };

  Vector v = engine.pack(rho0);
  const double interval = options.sample_interval;
  std::size_t next_sample = 1;
  record(program.t_initial, program.segments.front(), v);

  for (const auto& seg : program.segments) {
    const std::size_t steps = steps_for(seg.duration(), dt);
    const double h = seg.duration() / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = seg.t_start + static_cast<double>(k) * h;
      engine.step(options.integrator, seg, t, h, v);
      ++traj.steps;
      const double t_new = k + 1 == steps ? seg.t_end : seg.t_start + static_cast<double>(k + 1) * h;
      const double due = program.t_initial + static_cast<double>(next_sample) * interval;
      if (t_new >= due - 1e-6 * h) {
        record(t_new, seg, v);
        while (program.t_initial + static_cast<double>(next_sample) * interval <= t_new + 1e-6 * h) ++next_sample;
      }
    }
  }
  if (traj.times.back() < program.t_final - 1e-9) record(program.t_final, program.segments.back(), v);

  const auto samples = static_cast<Eigen::Index>(traj.times.size());
  traj.populations = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      pops.data(), samples, static_cast<Eigen::Index>(n));
  traj.spin_expectations = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      spins.data(), samples, static_cast<Eigen::Index>(spin_cols));
  traj.current = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      currents.data(), samples, static_cast<Eigen::Index>(n_electrodes));
  traj.final_rho = engine.unpack(v);
  return traj;
}

DensityMatrixTrajectory propagate(const QuantumImpurityModel& model, const PulseProgram& program,
                                  const std::vector<ElectrodeSpec>& electrodes, const Matrix& rho0, double dt,
                                  const RateOptions& rate_options) {
  const EigenBasis basis = make_eigen_basis(model);
  const RateModel rates(basis, electrodes, rate_options);
  PropagationOptions options;
  options.dt = dt;
  return propagate(basis, rates, program, rho0, options);
}

SweepResult cw_spectrum(const EigenBasis& basis, const RateModel& rates, const PulseSegment& drive_template,
                        const std::vector<double>& frequency_grid, const Matrix& rho0,
                        const SweepOptions& options) {
  validate_density_matrix(rho0, basis.size());
  if (!(options.settle_time >= 0.0)) throw ValidationError("settle time must be non-negative");
  std::size_t tip = rates.electrodes().size();
  for (std::size_t e = 0; e < rates.electrodes().size(); ++e)
    if (rates.electrodes()[e].label == "tip") tip = e;
  if (tip == rates.electrodes().size()) throw ValidationError("sweep needs a tip electrode");

  SweepResult result;
  result.frequencies = frequency_grid;
  result.dc_current.assign(frequency_grid.size(), 0.0);
  result.converged.assign(frequency_grid.size(), false);
  std::vector<char> converged(frequency_grid.size(), 0);

  const Engine prototype(basis, rates, options.propagation.coherent_drive, true);
  if (!prototype.supports(rho0)) throw ValidationError("sweep initial state must be block diagonal in charge");
  constexpr std::size_t max_windows = 64;

  auto run_point = [&](Engine& engine, std::size_t i) {
    const double f = frequency_grid[i];
    PulseSegment seg = drive_template;
    seg.t_start = 0.0;
    seg.t_end = std::numeric_limits<double>::max();
    for (auto& tone : seg.tones) tone.frequency_ghz = f;

    const double period = f > 0.0 ? 1.0 / f : 1.0;
    const std::size_t periods =
        options.periods_per_window > 0 ? options.periods_per_window
                                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(1.0 / period)));
    const double window = static_cast<double>(periods) * period;
    PulseProgram probe{0.0, window, 1, {seg}};
    probe.segments[0].t_end = window;
    const double dt = options.propagation.dt > 0.0 ? options.propagation.dt : default_time_step(basis, probe);
    const std::size_t steps = steps_for(window, dt);
    const double h = window / static_cast<double>(steps);

    Vector v = engine.pack(rho0);
    const auto settle = static_cast<std::size_t>(std::ceil(options.settle_time / h));
    double t = 0.0;
    for (std::size_t k = 0; k < settle; ++k) {
      engine.step(options.propagation.integrator, seg, t, h, v);
      t = static_cast<double>(k + 1) * h;
    }
    std::size_t done = settle;
    double previous = std::numeric_limits<double>::quiet_NaN();
    double average = 0.0;
    for (std::size_t w = 0; w < max_windows; ++w) {
      double acc = 0.5 * engine.current(tip, seg, t, v);
      for (std::size_t k = 0; k < steps; ++k) {
        engine.step(options.propagation.integrator, seg, t, h, v);
        t = static_cast<double>(++done) * h;
        acc += (k + 1 == steps ? 0.5 : 1.0) * engine.current(tip, seg, t, v);
      }
      average = acc / static_cast<double>(steps);
      check_state(engine.unpack(v), t);
      if (std::abs(average - previous) <= options.tolerance * std::max(std::abs(average), 1e-6)) {
        converged[i] = 1;
        break;
      }
      previous = average;
    }
    result.dc_current[i] = average;
  };

  std::size_t threads = options.threads > 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, frequency_grid.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    Engine engine = prototype;
    for (std::size_t i = next++; i < frequency_grid.size(); i = next++) {
      try {
        run_point(engine, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = frequency_grid.size();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < converged.size(); ++i) result.converged[i] = converged[i] != 0;
  return result;
}

}  // namespace esr
