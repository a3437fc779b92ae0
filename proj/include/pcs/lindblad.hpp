#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/model.hpp"

namespace pcs {

using SpMat = Eigen::SparseMatrix<cplx>;

/// A Lindblad operator L, already scaled, entering as D[L].
struct JumpOperator {
  Operator op;
  std::string label;
};

class OpenSystemModel {
 public:
  OpenSystemModel(Operator hamiltonian, std::vector<JumpOperator> jumps)
      : basis_(hamiltonian.basis()), h_(std::move(hamiltonian)), jumps_(std::move(jumps)) {
    const double scale = std::max(1.0, h_.matrix().cwiseAbs().maxCoeff());
    if (h_.hermiticity_error() > 1e-12 * scale) throw DomainError("model Hamiltonian is not Hermitian");
    for (const auto& j : jumps_) require_same_basis(basis_, j.op.basis(), "jump operator");
  }

  const FockBasis& basis() const { return basis_; }
  const Operator& hamiltonian() const { return h_; }
  const std::vector<JumpOperator>& jumps() const { return jumps_; }

  /// H - (i/2) sum L†L
  Mat effective_hamiltonian() const {
    Mat heff = h_.matrix();
    for (const auto& j : jumps_) heff -= 0.5 * kI * (j.op.matrix().adjoint() * j.op.matrix());
    return heff;
  }

  /// Largest rate in the generator: max of the row-sum norms of H and sum L†L.
  double rate_scale() const {
    Mat ll = Mat::Zero(basis_.dim(), basis_.dim());
    for (const auto& j : jumps_) ll += j.op.matrix().adjoint() * j.op.matrix();
    const double hn = h_.matrix().cwiseAbs().rowwise().sum().maxCoeff();
    const double ln = ll.cwiseAbs().rowwise().sum().maxCoeff();
    return std::max(hn, ln);
  }

 private:
  FockBasis basis_;
  Operator h_;
  std::vector<JumpOperator> jumps_;
};

struct ReducedModelOptions {
  bool include_drive = true;
  bool include_dephasing = true;           ///< zeta_a n_a + zeta_b n_b in the composite jump
  bool include_single_photon_loss = true;  ///< sqrt(kappa_a) a, sqrt(kappa_b) b
  KerrForm kerr = KerrForm::separate;

  static ReducedModelOptions ideal() {
    ReducedModelOptions o;
    o.include_dephasing = false;
    o.include_single_photon_loss = false;
    o.kerr = KerrForm::effective;
    return o;
  }
};

/// Two-mode model with composite jump pair_jump ab + zeta_a n_a + zeta_b n_b
/// and single-photon losses. Jumps whose rates are all zero are omitted.
inline OpenSystemModel build_reduced_model(const SystemParams& p, const DerivedRates& r, const FockBasis& basis,
                                           const ReducedModelOptions& opt = {}) {
  p.validate();
  auto h = build_storage_hamiltonian(basis, p, r, opt.include_drive, opt.kerr);
  const auto a = annihilation_op(basis, Mode::a);
  const auto b = annihilation_op(basis, Mode::b);
  std::vector<JumpOperator> jumps;

  const cplx za = opt.include_dephasing ? r.zeta_a : 0.0;
  const cplx zb = opt.include_dephasing ? r.zeta_b : 0.0;
  if (r.pair_jump != cplx(0.0) || za != cplx(0.0) || zb != cplx(0.0)) {
    Operator o = r.pair_jump * (a * b) + za * number_op(basis, Mode::a) + zb * number_op(basis, Mode::b);
    jumps.push_back({std::move(o), "composite"});
  }
  if (opt.include_single_photon_loss) {
    if (p.kappa_a > 0) jumps.push_back({std::sqrt(p.kappa_a) * a, "loss_a"});
    if (p.kappa_b > 0) jumps.push_back({std::sqrt(p.kappa_b) * b, "loss_b"});
  }
  return {std::move(h), std::move(jumps)};
}

/// Storage modes plus the lossy reservoir: jumps sqrt(kappa_r) r, sqrt(kappa_a) a, sqrt(kappa_b) b.
inline OpenSystemModel build_full_model(const SystemParams& p, const DriveConfig& d, const DerivedRates& r,
                                        const FockBasis& basis3) {
  p.validate();
  auto h = build_full_model_hamiltonian(basis3, p, d, r);
  std::vector<JumpOperator> jumps;
  if (p.kappa_r > 0) jumps.push_back({std::sqrt(p.kappa_r) * annihilation_op(basis3, Mode::r), "loss_r"});
  if (p.kappa_a > 0) jumps.push_back({std::sqrt(p.kappa_a) * annihilation_op(basis3, Mode::a), "loss_a"});
  if (p.kappa_b > 0) jumps.push_back({std::sqrt(p.kappa_b) * annihilation_op(basis3, Mode::b), "loss_b"});
  return {std::move(h), std::move(jumps)};
}

// ---------------------------------------------------------------------------
// Expectation values

inline cplx expectation(const DensityMatrix& rho, const Operator& op) {
  require_same_basis(rho.basis(), op.basis(), "expectation");
  return rho.matrix().cwiseProduct(op.matrix().transpose()).sum();
}

/// Real expectation of a Hermitian observable; throws if the imaginary residue exceeds 1e-9.
inline double expectation_real(const DensityMatrix& rho, const Operator& op) {
  const cplx v = expectation(rho, op);
  if (std::abs(v.imag()) > 1e-9) throw NumericalError("expectation of Hermitian observable has imaginary part " + fmt(v.imag()));
  return v.real();
}

// ---------------------------------------------------------------------------
// Time evolution

struct Observable {
  std::string name;
  std::function<double(const DensityMatrix&)> eval;
};

inline Observable population_observable(int na, int nb) {
  return {"P" + std::to_string(na) + std::to_string(nb), [na, nb](const DensityMatrix& r) {
            const auto& b = r.basis();
            if (!b.contains(na, nb)) return 0.0;
            const int modes = b.modes();
            if (modes == 2) return r(b.index(na, nb), b.index(na, nb)).real();
            double acc = 0.0;
            for (int k = 0; k <= b.cutoff(Mode::r); ++k) acc += r(b.index(na, nb, k), b.index(na, nb, k)).real();
            return acc;
          }};
}

inline Observable operator_observable(std::string name, Operator op) {
  return {std::move(name), [op = std::move(op)](const DensityMatrix& r) { return expectation_real(r, op); }};
}

struct EvolveOptions {
  std::vector<double> record_times;  ///< in [0, t_final]; t_final is always recorded
  std::vector<Observable> observables;
  bool keep_states = false;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double max_trace_drift = 1e-6;
  std::size_t max_steps = 50'000'000;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  ///< values[k][i]: observable i at times[k]
  std::vector<DensityMatrix> states;        ///< filled when keep_states
  DensityMatrix final_state;
};

/// n equally spaced times covering [0, t_final], inclusive.
inline std::vector<double> uniform_times(double t_final, int n) {
  if (n < 2) return {t_final};
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_final * i / (n - 1);
  t.back() = t_final;
  return t;
}

/// Column-stacked superoperator: vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ).
inline SpMat vectorized_liouvillian(const OpenSystemModel& model) {
  const int n = model.basis().dim();
  const SpMat heff = model.effective_hamiltonian().sparseView(0.0, 0.0);
  SpMat id(n, n);
  id.setIdentity();
  SpMat lv = -kI * SpMat(Eigen::kroneckerProduct(id, heff)) + kI * SpMat(Eigen::kroneckerProduct(SpMat(heff.conjugate()), id));
  for (const auto& j : model.jumps()) {
    const SpMat l = j.op.matrix().sparseView(0.0, 0.0);
    lv += SpMat(Eigen::kroneckerProduct(SpMat(l.conjugate()), l));
  }
  lv.prune(cplx(0.0), 0.0);
  lv.makeCompressed();
  return lv;
}

namespace detail {

using OdeState = std::vector<cplx>;

inline void check_state(const DensityMatrix& rho0, const FockBasis& b) {
  require_same_basis(b, rho0.basis(), "initial state");
  if (std::abs(rho0.trace() - 1.0) > 1e-8) throw DomainError("initial state trace differs from 1");
  if (rho0.hermiticity_error() > 1e-10) throw DomainError("initial state is not Hermitian");
}

/// The generator restricted to the density-matrix coordinates reachable from the support of rho0.
/// The set is invariant under the dynamics, so evolution and steady states can be computed on it.
struct ReachableGenerator {
  int n = 0;                 ///< Hilbert dimension
  std::vector<int> coords;   ///< column-stacked indices c*n + r, sorted
  SpMat L;                   ///< restricted Liouvillian

  ReachableGenerator(const OpenSystemModel& model, const DensityMatrix& rho0) : n(model.basis().dim()) {
    const SpMat lv = vectorized_liouvillian(model);
    const int n2 = n * n;
    std::vector<char> seen(n2, 0);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r)
        if (rho0.matrix()(r, c) != cplx(0.0)) {
          seen[c * n + r] = 1;
          coords.push_back(c * n + r);
        }
    for (std::size_t q = 0; q < coords.size(); ++q)
      for (SpMat::InnerIterator it(lv, coords[q]); it; ++it)
        if (!seen[it.row()]) {
          seen[it.row()] = 1;
          coords.push_back(static_cast<int>(it.row()));
        }
    std::sort(coords.begin(), coords.end());
    std::vector<int> local(n2, -1);
    for (std::size_t k = 0; k < coords.size(); ++k) local[coords[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t k = 0; k < coords.size(); ++k)
      for (SpMat::InnerIterator it(lv, coords[k]); it; ++it) trip.emplace_back(local[it.row()], static_cast<int>(k), it.value());
    L.resize(size(), size());
    L.setFromTriplets(trip.begin(), trip.end());
    L.makeCompressed();
  }

  int size() const { return static_cast<int>(coords.size()); }
  bool is_population(int k) const { return coords[k] % n == coords[k] / n; }

  OdeState gather(const Mat& rho) const {
    OdeState x(coords.size());
    for (std::size_t k = 0; k < coords.size(); ++k) x[k] = rho(coords[k] % n, coords[k] / n);
    return x;
  }

  Mat scatter(const cplx* x) const {
    Mat rho = Mat::Zero(n, n);
    for (std::size_t k = 0; k < coords.size(); ++k) rho(coords[k] % n, coords[k] / n) = x[k];
    return rho;
  }
};

}  // namespace detail

/// Integrates the master equation with an adaptive Dormand-Prince 5(4) scheme. The state is the
/// set of density-matrix entries reachable from rho0; it is scattered back into a dense matrix
/// and Hermitian-symmetrized at every recording point.
inline Trajectory evolve(const OpenSystemModel& model, const DensityMatrix& rho0, double t_final,
                         const EvolveOptions& opt = {}) {
  namespace ode = boost::numeric::odeint;
  detail::check_state(rho0, model.basis());
  if (!(t_final >= 0)) throw DomainError("evolve: t_final must be non-negative");

  std::vector<double> wanted;
  for (double t : opt.record_times) {
    if (t < 0 || t > t_final * (1 + 1e-12)) throw DomainError("evolve: record time outside [0, t_final]");
    wanted.push_back(std::min(t, t_final));
  }
  wanted.push_back(t_final);
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  std::vector<double> times{0.0};
  times.insert(times.end(), wanted.begin(), wanted.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  Trajectory traj{{}, {}, {}, {}, rho0};
  for (const auto& o : opt.observables) traj.names.push_back(o.name);

  auto record = [&](const Mat& m, double t) {
    DensityMatrix rho(model.basis(), 0.5 * (m + m.adjoint()));
    const double drift = std::abs(rho.trace() - 1.0);
    if (drift > opt.max_trace_drift)
      throw NumericalError("trace drift " + fmt(drift) + " at t = " + fmt(t) + " s");
    if (std::binary_search(wanted.begin(), wanted.end(), t)) {
      traj.times.push_back(t);
      std::vector<double> row;
      for (const auto& o : opt.observables) row.push_back(o.eval(rho));
      traj.values.push_back(std::move(row));
      if (opt.keep_states) traj.states.push_back(rho);
    }
    traj.final_state = std::move(rho);
  };

  const double scale = model.rate_scale();
  if (times.size() == 1 || scale == 0.0) {
    for (double t : times) record(rho0.matrix(), t);
    return traj;
  }

  const detail::ReachableGenerator gen(model, rho0);
  auto rhs = [&gen](const detail::OdeState& x, detail::OdeState& dx, double) {
    Eigen::Map<const Vec> xv(x.data(), gen.size());
    Eigen::Map<Vec> dv(dx.data(), gen.size());
    dv.noalias() = gen.L * xv;
  };
  detail::OdeState x = gen.gather(rho0.matrix());
  auto stepper = ode::make_dense_output(opt.abs_tol, opt.rel_tol,
                                        ode::runge_kutta_dopri5<detail::OdeState, double, detail::OdeState, double>());
  const double dt0 = std::min(1e-2 / scale, t_final);
  try {
    ode::integrate_times(
        stepper, rhs, x, times.begin(), times.end(), dt0,
        [&](const detail::OdeState& s, double t) { record(gen.scatter(s.data()), t); },
        ode::max_step_checker(opt.max_steps));
  } catch (const ode::no_progress_error& e) {
    throw NumericalError(std::string("integrator made no progress: ") + e.what());
  } catch (const ode::step_adjustment_error& e) {
    throw NumericalError(std::string("integrator step size underflow: ") + e.what());
  }
  return traj;
}

/// Final state after evolving for t.
inline DensityMatrix evolve_state(const OpenSystemModel& model, const DensityMatrix& rho0, double t,
                                  double abs_tol = 1e-10, double rel_tol = 1e-8) {
  EvolveOptions o;
  o.abs_tol = abs_tol;
  o.rel_tol = rel_tol;
  return evolve(model, rho0, t, o).final_state;
}

/// Entrywise 1-norm of dρ/dt.
inline double liouvillian_residual(const OpenSystemModel& model, const DensityMatrix& rho) {
  require_same_basis(model.basis(), rho.basis(), "liouvillian_residual");
  const Mat heff = model.effective_hamiltonian();
  const Mat& r = rho.matrix();
  const Mat y = -kI * heff * r;
  Mat d = y + y.adjoint();
  for (const auto& j : model.jumps()) d += j.op.matrix() * r * j.op.matrix().adjoint();
  return d.cwiseAbs().sum();
}

// ---------------------------------------------------------------------------
// Steady state

enum class SteadyStateMethod { automatic, null_space, long_time };

struct SteadyStateOptions {
  SteadyStateMethod method = SteadyStateMethod::automatic;
  int max_direct_dim = 150;   ///< null-space solve only up to this Hilbert dimension
  double tolerance = 1e-9;    ///< long-time: ||dρ/dt||_1 < tolerance * rate_scale
  double chunk = 0.0;         ///< long-time segment length (s); 0 picks 200 / rate_scale
  double max_time = 0.0;      ///< long-time budget (s); 0 picks 1e6 / rate_scale
};

namespace detail {

inline DensityMatrix null_space_steady_state(const OpenSystemModel& model, const DensityMatrix& rho0) {
  const ReachableGenerator gen(model, rho0);
  const int m = gen.size();
  if (gen.L.nonZeros() == 0) return rho0;

  int trace_row = -1;
  for (int k = 0; k < m && trace_row < 0; ++k)
    if (gen.is_population(k)) trace_row = k;
  if (trace_row < 0) throw NumericalError("steady state: reachable set contains no populations");

  // replace one balance row by the trace condition
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int k = 0; k < gen.L.outerSize(); ++k)
    for (SpMat::InnerIterator it(gen.L, k); it; ++it)
      if (it.row() != trace_row) trip.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < m; ++k)
    if (gen.is_population(k)) trip.emplace_back(trace_row, k, 1.0);
  SpMat sys(m, m);
  sys.setFromTriplets(trip.begin(), trip.end());
  sys.makeCompressed();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success)
    throw NumericalError("steady state: Liouvillian system is singular (degenerate steady states in the reachable sector?)");
  Vec rhs = Vec::Zero(m);
  rhs(trace_row) = 1.0;
  const Vec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericalError("steady state: sparse solve failed");

  const double res = (gen.L * x).cwiseAbs().sum();
  if (res > 1e-8 * std::max(1.0, model.rate_scale())) throw NumericalError("steady state: residual " + fmt(res));
  Mat rho = gen.scatter(x.data());
  return {model.basis(), 0.5 * (rho + rho.adjoint())};
}

inline DensityMatrix long_time_steady_state(const OpenSystemModel& model, const DensityMatrix& rho0,
                                            const SteadyStateOptions& opt) {
  const double scale = model.rate_scale();
  if (scale == 0.0) return rho0;
  const double chunk = opt.chunk > 0 ? opt.chunk : 200.0 / scale;
  const double budget = opt.max_time > 0 ? opt.max_time : 1e6 / scale;
  const double target = opt.tolerance * scale;
  DensityMatrix rho = rho0;
  double t = 0.0;
  double res = liouvillian_residual(model, rho);
  while (res >= target) {
    if (t >= budget)
      throw NumericalError("steady state not reached after " + fmt(t) + " s; residual " +
                           fmt(res) + " vs target " + fmt(target));
    rho = evolve_state(model, rho, chunk, 1e-13, 1e-10);
    t += chunk;
    res = liouvillian_residual(model, rho);
  }
  return rho;
}

}  // namespace detail

/// Steady state reached from rho0. The null-space route solves the vectorized Liouvillian on
/// the coordinates reachable from rho0; the long-time route integrates until ||dρ/dt||_1 is small.
inline DensityMatrix steady_state(const OpenSystemModel& model, const DensityMatrix& rho0,
                                  const SteadyStateOptions& opt = {}) {
  detail::check_state(rho0, model.basis());
  SteadyStateMethod m = opt.method;
  if (m == SteadyStateMethod::automatic)
    m = model.basis().dim() <= opt.max_direct_dim ? SteadyStateMethod::null_space : SteadyStateMethod::long_time;
  if (m == SteadyStateMethod::null_space) {
    if (model.basis().dim() > opt.max_direct_dim)
      throw DomainError("null-space steady state limited to dimension " + std::to_string(opt.max_direct_dim));
    return detail::null_space_steady_state(model, rho0);
  }
  return detail::long_time_steady_state(model, rho0, opt);
}

}  // namespace pcs
