#include "esr/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "esr/error.hpp"

namespace esr {

namespace {

const cplx I{0.0, 1.0};

bool is_half_integer(double s) {
  const double twice = 2.0 * s;
  return s >= 0.0 && std::abs(twice - std::round(twice)) < 1e-12;
}

int multiplicity(double s) { return static_cast<int>(std::lround(2.0 * s)) + 1; }

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

// Embeds a single-factor operator into the full product space. Factor 0 is the
// transport orbital, factor i >= 1 is spin site i.
Matrix embed(const Matrix& op, std::size_t factor, const std::vector<int>& factor_dims) {
  Matrix out = identity(1);
  for (std::size_t f = 0; f < factor_dims.size(); ++f)
    out = kron(out, f == factor ? op : identity(factor_dims[f]));
  return out;
}

std::vector<int> factor_dimensions(const BasisCatalog& catalog) {
  std::vector<int> dims{4};
  for (int d : catalog.site_dimensions()) dims.push_back(d);
  return dims;
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Eigenvectors of S.n ordered by descending projection, phased so that the
// first largest component is real positive.
Matrix axis_eigenvectors(double spin, const Vec3& axis) {
  const auto s = spin_matrices(spin);
  const Vec3 n = axis.normalized();
  const Matrix sn = n.x() * s[0] + n.y() * s[1] + n.z() * s[2];
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sn);
  const Eigen::Index dim = sn.rows();
  Matrix out(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Vector v = solver.eigenvectors().col(dim - 1 - c);
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (std::abs(v[i]) > peak - 1e-12) {
        v *= std::conj(v[i]) / std::abs(v[i]);
        break;
      }
    }
    out.col(c) = v;
  }
  return out;
}

}  // namespace

void QuantumImpurityModel::validate() const {
  if (!(transport.coulomb_u_mev >= 0.0)) throw ValidationError("coulomb_u must be non-negative");
  if (!std::isfinite(transport.epsilon_up_mev) || !std::isfinite(transport.epsilon_down_mev))
    throw ValidationError("transport orbital energies must be finite");
  if (!transport.g_factors.allFinite() || !transport.b_field.allFinite())
    throw ValidationError("transport g-factors and field must be finite");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& s = sites[i];
    const std::string name = "site " + std::to_string(i + 1);
    if (!is_half_integer(s.spin)) throw ValidationError(name + ": 2S must be a non-negative integer");
    if (!s.g_factors.allFinite() || !s.b_field.allFinite())
      throw ValidationError(name + ": g-factors and field must be finite");
  }
  std::set<std::pair<int, int>> seen;
  const int n_sites = static_cast<int>(sites.size());
  for (const auto& x : exchanges) {
    if (x.site_a == x.site_b) throw ValidationError("exchange coupling joins a site to itself");
    if (x.site_a < 0 || x.site_b < 0 || x.site_a > n_sites || x.site_b > n_sites)
      throw ValidationError("exchange coupling references a missing site");
    if (!x.j_ghz.allFinite()) throw ValidationError("exchange constants must be finite");
    const auto key = std::minmax(x.site_a, x.site_b);
    if (!seen.insert(key).second)
      throw ValidationError("exchange pair (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ") listed twice");
  }
  if (quantization_axis.norm() < 1e-12) throw ValidationError("quantization axis must be nonzero");
}

std::size_t QuantumImpurityModel::dimension() const {
  std::size_t dim = 4;
  for (const auto& s : sites) dim *= static_cast<std::size_t>(multiplicity(s.spin));
  return dim;
}

int charge_of(Occupation occ) {
  switch (occ) {
    case Occupation::empty: return 0;
    case Occupation::up:
    case Occupation::down: return 1;
    case Occupation::doubly: return 2;
  }
  return 0;
}

std::string BasisState::label() const {
  static const char* occ_names[] = {"0", "up", "dn", "2"};
  std::ostringstream os;
  os << '|' << occ_names[static_cast<int>(occupation)];
  for (double m : projections) os << ';' << m;
  os << '>';
  return os.str();
}

BasisCatalog::BasisCatalog(std::vector<int> site_dims, std::vector<double> site_spins)
    : site_dims_(std::move(site_dims)), site_spins_(std::move(site_spins)) {
  std::size_t rest = 1;
  for (int d : site_dims_) rest *= static_cast<std::size_t>(d);
  states_.reserve(4 * rest);
  for (int occ = 0; occ < 4; ++occ) {
    for (std::size_t r = 0; r < rest; ++r) {
      BasisState st;
      st.occupation = static_cast<Occupation>(occ);
      st.projections.resize(site_dims_.size());
      std::size_t rem = r;
      for (std::size_t i = site_dims_.size(); i-- > 0;) {
        const auto k = rem % static_cast<std::size_t>(site_dims_[i]);
        rem /= static_cast<std::size_t>(site_dims_[i]);
        st.projections[i] = site_spins_[i] - static_cast<double>(k);
      }
      states_.push_back(std::move(st));
    }
  }
}

BasisCatalog build_basis(const QuantumImpurityModel& model, std::size_t cap) {
  model.validate();
  std::vector<int> dims;
  std::vector<double> spins;
  std::size_t dim = 4;
  for (const auto& s : model.sites) {
    dims.push_back(multiplicity(s.spin));
    spins.push_back(s.spin);
    dim *= static_cast<std::size_t>(dims.back());
    if (dim > cap)
      throw CapacityError("basis dimension exceeds cap of " + std::to_string(cap) + " states");
  }
  return BasisCatalog(std::move(dims), std::move(spins));
}

std::array<Matrix, 3> spin_matrices(double spin) {
  const int dim = multiplicity(spin);
  Matrix sp = Matrix::Zero(dim, dim);
  Matrix sz = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = spin - k;
    sz(k, k) = m;
    if (k > 0) sp(k - 1, k) = std::sqrt(spin * (spin + 1.0) - m * (m + 1.0));
  }
  const Matrix sm = sp.adjoint();
  return {0.5 * (sp + sm), (sp - sm) / (2.0 * I), sz};
}

Matrix stevens_operator(int k, int q, double spin) {
  if (!is_half_integer(spin)) throw ValidationError("stevens_operator: 2S must be a non-negative integer");
  const int dim = multiplicity(spin);
  const double ss = spin * (spin + 1.0);
  const auto s = spin_matrices(spin);
  const Matrix& sz = s[2];
  const Matrix sp = s[0] + I * s[1];
  const Matrix sm = s[0] - I * s[1];
  const Matrix one = identity(dim);
  if (k == 2 && q == 0) return 3.0 * sz * sz - ss * one;
  if (k == 2 && q == 2) return 0.5 * (sp * sp + sm * sm);
  if (k == 4 && q == 0) {
    const Matrix sz2 = sz * sz;
    return 35.0 * sz2 * sz2 - 30.0 * ss * sz2 + 25.0 * sz2 - 6.0 * ss * one + 3.0 * ss * ss * one;
  }
  if (k == 4 && q == 4) {
    const Matrix sp2 = sp * sp;
    const Matrix sm2 = sm * sm;
    return 0.5 * (sp2 * sp2 + sm2 * sm2);
  }
  throw std::invalid_argument("unsupported Stevens operator O_" + std::to_string(k) + "^" +
                              std::to_string(q));
}

ProductOperators product_operators(const QuantumImpurityModel& model, const BasisCatalog& catalog) {
  const auto dims = factor_dimensions(catalog);

  // Transport factor in the order {empty, up, down, doubly}; |2> = d+_up d+_dn |0>.
  Matrix d_up = Matrix::Zero(4, 4);
  Matrix d_dn = Matrix::Zero(4, 4);
  d_up(0, 1) = 1.0;
  d_up(2, 3) = 1.0;
  d_dn(0, 2) = 1.0;
  d_dn(1, 3) = -1.0;

  ProductOperators ops;
  ops.d = {embed(d_up, 0, dims), embed(d_dn, 0, dims)};
  ops.number = ops.d[0].adjoint() * ops.d[0] + ops.d[1].adjoint() * ops.d[1];

  // s^chi = 1/2 sum_{ss'} d+_s sigma^chi_{ss'} d_s'
  const std::array<Matrix, 3> pauli = [] {
    Matrix x(2, 2), y(2, 2), z(2, 2);
    x << 0, 1, 1, 0;
    y << 0, -I, I, 0;
    z << 1, 0, 0, -1;
    return std::array<Matrix, 3>{x, y, z};
  }();
  std::array<Matrix, 3> s0;
  for (int chi = 0; chi < 3; ++chi) {
    Matrix acc = Matrix::Zero(ops.number.rows(), ops.number.cols());
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (pauli[chi](a, b) != 0.0) acc += 0.5 * pauli[chi](a, b) * ops.d[a].adjoint() * ops.d[b];
    s0[chi] = acc;
  }
  ops.spins.push_back(s0);
  for (std::size_t i = 0; i < model.sites.size(); ++i) {
    const auto s = spin_matrices(model.sites[i].spin);
    ops.spins.push_back({embed(s[0], i + 1, dims), embed(s[1], i + 1, dims), embed(s[2], i + 1, dims)});
  }
  return ops;
}

Matrix assemble_hamiltonian(const QuantumImpurityModel& model) {
  const auto catalog = build_basis(model);
  return assemble_hamiltonian(model, catalog, product_operators(model, catalog));
}

Matrix assemble_hamiltonian(const QuantumImpurityModel& model, const BasisCatalog& catalog,
                            const ProductOperators& ops) {
  const auto dims = factor_dimensions(catalog);
  const double mu_b = units::bohr_magneton_ghz_per_tesla;
  const auto& tr = model.transport;

  const Matrix n_up = ops.d[0].adjoint() * ops.d[0];
  const Matrix n_dn = ops.d[1].adjoint() * ops.d[1];
  Matrix h = units::mev_to_ghz(tr.epsilon_up_mev) * n_up + units::mev_to_ghz(tr.epsilon_down_mev) * n_dn +
             units::mev_to_ghz(tr.coulomb_u_mev) * n_up * n_dn;
  for (int chi = 0; chi < 3; ++chi)
    h += mu_b * tr.b_field[chi] * tr.g_factors[chi] * ops.spins[0][chi];

  for (std::size_t i = 0; i < model.sites.size(); ++i) {
    const auto& site = model.sites[i];
    for (int chi = 0; chi < 3; ++chi)
      h += mu_b * site.b_field[chi] * site.g_factors[chi] * ops.spins[i + 1][chi];
    const auto& b = site.stevens;
    if (b.b20 != 0.0 || b.b22 != 0.0 || b.b40 != 0.0 || b.b44 != 0.0) {
      const Matrix local = units::mev_to_ghz(b.b20) * stevens_operator(2, 0, site.spin) +
                           units::mev_to_ghz(b.b22) * stevens_operator(2, 2, site.spin) +
                           units::mev_to_ghz(b.b40) * stevens_operator(4, 0, site.spin) +
                           units::mev_to_ghz(b.b44) * stevens_operator(4, 4, site.spin);
      h += embed(local, i + 1, dims);
    }
  }

  for (const auto& x : model.exchanges)
    for (int chi = 0; chi < 3; ++chi)
      if (x.j_ghz[chi] != 0.0)
        h += x.j_ghz[chi] * ops.spins[x.site_a][chi] * ops.spins[x.site_b][chi];

  return h;
}

Matrix axis_product_basis(const QuantumImpurityModel& model, const BasisCatalog& catalog) {
  Matrix transport = Matrix::Zero(4, 4);
  transport(0, 0) = 1.0;
  transport(3, 3) = 1.0;
  transport.block(1, 1, 2, 2) = axis_eigenvectors(0.5, model.quantization_axis);
  Matrix out = transport;
  for (double s : catalog.site_spins()) out = kron(out, axis_eigenvectors(s, model.quantization_axis));
  return out;
}

Eigensystem diagonalize(const Matrix& h, const Matrix& reference) {
  if (h.rows() != h.cols()) throw ValidationError("diagonalize: matrix is not square");
  if (reference.rows() != h.rows() || reference.cols() != h.cols())
    throw ValidationError("diagonalize: reference basis dimension mismatch");
  const double scale = std::max(max_abs(h), 1e-300);
  if (max_abs(h - h.adjoint()) > 1e-9 * scale)
    throw ValidationError("diagonalize: input is not Hermitian");

  const Matrix herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(herm);
  if (solver.info() != Eigen::Success) throw NumericalError("diagonalize: eigensolver failed");
  RealVector e = solver.eigenvalues();
  Matrix v = solver.eigenvectors();
  const Eigen::Index n = e.size();

  const double tol = 1e-9 * std::max(1.0, scale);
  for (Eigen::Index a = 0; a < n;) {
    Eigen::Index b = a + 1;
    while (b < n && e[b] - e[b - 1] < tol) ++b;
    const Eigen::Index k = b - a;
    if (k > 1) {
      const Matrix block = v.middleCols(a, k);
      const Matrix projector = block * block.adjoint();
      Matrix chosen(n, k);
      Eigen::Index found = 0;
      for (Eigen::Index r = 0; r < reference.cols() && found < k; ++r) {
        Vector w = projector * reference.col(r);
        for (Eigen::Index c = 0; c < found; ++c) w -= chosen.col(c) * chosen.col(c).dot(w);
        for (Eigen::Index c = 0; c < found; ++c) w -= chosen.col(c) * chosen.col(c).dot(w);
        const double norm = w.norm();
        if (norm > 1e-6) chosen.col(found++) = w / norm;
      }
      if (found != k) throw NumericalError("diagonalize: could not resolve degenerate subspace");
      v.middleCols(a, k) = chosen;
      const double mean = e.segment(a, k).mean();
      e.segment(a, k).setConstant(mean);
    }
    a = b;
  }

  Eigensystem out;
  out.permutation.resize(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const Vector overlaps = reference.adjoint() * v.col(c);
    const double peak = overlaps.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(overlaps[i]) > peak * (1.0 - 1e-9)) {
        v.col(c) *= std::conj(overlaps[i]) / std::abs(overlaps[i]);
        break;
      }
    }
    const RealVector weight = v.col(c).cwiseAbs2();
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weight[i] > best + 1e-12) {
        best = weight[i];
        out.permutation[static_cast<std::size_t>(c)] = static_cast<std::size_t>(i);
      }
    }
  }
  out.ground_offset = n > 0 ? e[0] : 0.0;
  out.energies = e.array() - out.ground_offset;
  out.vectors = std::move(v);
  return out;
}

Eigensystem diagonalize(const Matrix& h) { return diagonalize(h, identity(h.rows())); }

std::vector<std::size_t> EigenBasis::states_with_charge(int charge) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < charge_of_state.size(); ++i)
    if (charge_of_state[i] == charge) out.push_back(i);
  return out;
}

EigenBasis make_eigen_basis(const QuantumImpurityModel& model) {
  EigenBasis basis;
  basis.catalog = build_basis(model);
  const auto ops = product_operators(model, basis.catalog);
  const Matrix h = assemble_hamiltonian(model, basis.catalog, ops);
  basis.reference_basis = axis_product_basis(model, basis.catalog);
  basis.system = diagonalize(h, basis.reference_basis);

  basis.d = {operator_in_eigenbasis(ops.d[0], basis), operator_in_eigenbasis(ops.d[1], basis)};
  basis.number = operator_in_eigenbasis(ops.number, basis);
  for (const auto& s : ops.spins)
    basis.spins.push_back({operator_in_eigenbasis(s[0], basis), operator_in_eigenbasis(s[1], basis),
                           operator_in_eigenbasis(s[2], basis)});

  basis.charge_of_state.resize(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double q = basis.number(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    const double rounded = std::round(q);
    if (std::abs(q - rounded) > 1e-8)
      throw NumericalError("eigenstate " + std::to_string(i) + " has non-integer charge");
    basis.charge_of_state[i] = static_cast<int>(rounded);
  }
  return basis;
}

Matrix operator_in_eigenbasis(const Matrix& op, const EigenBasis& basis) {
  const Matrix& v = basis.system.vectors;
  if (op.rows() != v.rows() || op.cols() != v.rows())
    throw ValidationError("operator_in_eigenbasis: dimension mismatch");
  const Matrix gram = v.adjoint() * v;
  if (max_abs(gram - identity(v.cols())) > 1e-10)
    throw NumericalError("operator_in_eigenbasis: eigenvector matrix is not unitary");
  return v.adjoint() * op * v;
}

}  // namespace esr
