#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcs/error.hpp"

namespace pcs {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Bosonic modes of the device: the two storage cavities and the reservoir.
enum class Mode { a = 0, b = 1, r = 2 };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::a: return "a";
    case Mode::b: return "b";
    case Mode::r: return "r";
  }
  return "?";
}

/// Truncated Fock space of two (a, b) or three (a, b, r) bosonic modes.
///
/// Cutoffs are the largest retained Fock index of each mode (inclusive).
/// Flat indices are row-major with mode a outermost, so an operator acting on
/// mode a alone is `A ⊗ 1_b (⊗ 1_r)` under Eigen's Kronecker product.
class FockBasis {
 public:
  FockBasis(int cutoff_a, int cutoff_b) : cutoffs_{cutoff_a, cutoff_b, 0}, modes_(2) { validate(); }
  FockBasis(int cutoff_a, int cutoff_b, int cutoff_r)
      : cutoffs_{cutoff_a, cutoff_b, cutoff_r}, modes_(3) {
    validate();
  }

  int modes() const { return modes_; }
  bool has(Mode m) const { return static_cast<int>(m) < modes_; }
  int cutoff(Mode m) const { return cutoffs_[check(m)]; }
  int levels(Mode m) const { return cutoffs_[check(m)] + 1; }

  int dim() const {
    int d = 1;
    for (int k = 0; k < modes_; ++k) d *= cutoffs_[k] + 1;
    return d;
  }

  int index(int na, int nb) const {
    if (modes_ != 2) throw DomainError("index(na, nb) requires a two-mode basis");
    if (!contains(na, nb)) throw DomainError("Fock label outside basis");
    return na * (cutoffs_[1] + 1) + nb;
  }

  int index(int na, int nb, int nr) const {
    if (modes_ != 3) throw DomainError("index(na, nb, nr) requires a three-mode basis");
    if (!contains(na, nb) || nr < 0 || nr > cutoffs_[2]) throw DomainError("Fock label outside basis");
    return (na * (cutoffs_[1] + 1) + nb) * (cutoffs_[2] + 1) + nr;
  }

  /// Occupation numbers of a flat index; unused modes report 0.
  std::array<int, 3> labels(int flat) const {
    if (flat < 0 || flat >= dim()) throw DomainError("flat index outside basis");
    std::array<int, 3> n{0, 0, 0};
    for (int k = modes_ - 1; k >= 0; --k) {
      n[k] = flat % (cutoffs_[k] + 1);
      flat /= cutoffs_[k] + 1;
    }
    return n;
  }

  int number(int flat, Mode m) const { return labels(flat)[check(m)]; }

  bool contains(int na, int nb) const {
    return na >= 0 && nb >= 0 && na <= cutoffs_[0] && nb <= cutoffs_[1];
  }

  /// The (a, b) part of a three-mode basis.
  FockBasis storage() const { return FockBasis(cutoffs_[0], cutoffs_[1]); }

  bool operator==(const FockBasis& o) const { return modes_ == o.modes_ && cutoffs_ == o.cutoffs_; }
  bool operator!=(const FockBasis& o) const { return !(*this == o); }

  std::string describe() const {
    std::string s = std::to_string(cutoffs_[0]) + "x" + std::to_string(cutoffs_[1]);
    if (modes_ == 3) s += "x" + std::to_string(cutoffs_[2]);
    return s;
  }

 private:
  int check(Mode m) const {
    const int k = static_cast<int>(m);
    if (k >= modes_) throw DomainError(std::string("mode ") + to_string(m) + " not in basis");
    return k;
  }
  void validate() const {
    for (int k = 0; k < modes_; ++k)
      if (cutoffs_[k] < 0) throw DomainError("Fock cutoff must be non-negative");
  }

  std::array<int, 3> cutoffs_;
  int modes_;
};

inline void require_same_basis(const FockBasis& x, const FockBasis& y, const char* what) {
  if (x != y) throw DomainError(std::string(what) + ": basis mismatch (" + x.describe() + " vs " + y.describe() + ")");
}

/// Dense operator on a FockBasis.
class Operator {
 public:
  Operator(FockBasis basis, Mat m) : basis_(std::move(basis)), m_(std::move(m)) {
    if (m_.rows() != basis_.dim() || m_.cols() != basis_.dim())
      throw DomainError("operator dimension does not match basis " + basis_.describe());
  }

  static Operator zero(const FockBasis& b) { return {b, Mat::Zero(b.dim(), b.dim())}; }
  static Operator identity(const FockBasis& b) { return {b, Mat::Identity(b.dim(), b.dim())}; }

  const FockBasis& basis() const { return basis_; }
  const Mat& matrix() const { return m_; }
  int dim() const { return basis_.dim(); }
  cplx operator()(int i, int j) const { return m_(i, j); }

  Operator adjoint() const { return {basis_, m_.adjoint()}; }

  /// max |M - M†|
  double hermiticity_error() const {
    if (m_.size() == 0) return 0.0;
    return (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  }

  Operator& operator+=(const Operator& o) {
    require_same_basis(basis_, o.basis_, "operator +");
    m_ += o.m_;
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    require_same_basis(basis_, o.basis_, "operator -");
    m_ -= o.m_;
    return *this;
  }
  Operator& operator*=(cplx s) {
    m_ *= s;
    return *this;
  }

  friend Operator operator+(Operator x, const Operator& y) { return x += y; }
  friend Operator operator-(Operator x, const Operator& y) { return x -= y; }
  friend Operator operator*(cplx s, Operator x) { return x *= s; }
  friend Operator operator*(Operator x, cplx s) { return x *= s; }
  friend Operator operator*(const Operator& x, const Operator& y) {
    require_same_basis(x.basis_, y.basis_, "operator *");
    return {x.basis_, x.m_ * y.m_};
  }

 private:
  FockBasis basis_;
  Mat m_;
};

class StateVector {
 public:
  StateVector(FockBasis basis, Vec amps) : basis_(std::move(basis)), v_(std::move(amps)) {
    if (v_.size() != basis_.dim()) throw DomainError("state dimension does not match basis");
  }

  const FockBasis& basis() const { return basis_; }
  const Vec& amplitudes() const { return v_; }
  double norm() const { return v_.norm(); }

  StateVector normalized() const {
    const double n = v_.norm();
    if (n == 0.0) throw DomainError("cannot normalize the zero vector");
    return {basis_, v_ / n};
  }

  friend StateVector operator*(const Operator& op, const StateVector& s) {
    require_same_basis(op.basis(), s.basis_, "operator * state");
    return {s.basis_, op.matrix() * s.v_};
  }

 private:
  FockBasis basis_;
  Vec v_;
};

class DensityMatrix {
 public:
  DensityMatrix(FockBasis basis, Mat m) : basis_(std::move(basis)), m_(std::move(m)) {
    if (m_.rows() != basis_.dim() || m_.cols() != basis_.dim())
      throw DomainError("density matrix dimension does not match basis");
  }

  static DensityMatrix pure(const StateVector& s) {
    return {s.basis(), s.amplitudes() * s.amplitudes().adjoint()};
  }

  const FockBasis& basis() const { return basis_; }
  const Mat& matrix() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  DensityMatrix hermitized() const { return {basis_, 0.5 * (m_ + m_.adjoint())}; }

 private:
  FockBasis basis_;
  Mat m_;
};

namespace detail {

inline Mat single_mode_annihilation(int levels) {
  Mat m = Mat::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return m;
}

/// Embeds a single-mode matrix acting on `mode` into the full basis.
inline Mat embed(const FockBasis& basis, Mode mode, const Mat& single) {
  Mat out = Mat::Identity(1, 1);
  for (int k = 0; k < basis.modes(); ++k) {
    const Mode mk = static_cast<Mode>(k);
    const Mat factor = (mk == mode) ? single : Mat::Identity(basis.levels(mk), basis.levels(mk));
    Mat next = Eigen::kroneckerProduct(out, factor).eval();
    out = std::move(next);
  }
  return out;
}

inline Mat diagonal_from(const FockBasis& basis, auto&& entry) {
  Mat m = Mat::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < basis.dim(); ++i) m(i, i) = entry(basis.labels(i));
  return m;
}

}  // namespace detail

/// Truncated annihilation operator of one mode; the top Fock level maps out of the space.
inline Operator annihilation_op(const FockBasis& basis, Mode mode) {
  return {basis, detail::embed(basis, mode, detail::single_mode_annihilation(basis.levels(mode)))};
}

inline Operator creation_op(const FockBasis& basis, Mode mode) { return annihilation_op(basis, mode).adjoint(); }

inline Operator number_op(const FockBasis& basis, Mode mode) {
  const int k = static_cast<int>(mode);
  (void)basis.levels(mode);
  return {basis, detail::diagonal_from(basis, [k](const std::array<int, 3>& n) { return cplx(n[k]); })};
}

/// Photon-number difference n_a - n_b.
inline Operator pnd_op(const FockBasis& basis) {
  return {basis, detail::diagonal_from(basis, [](const std::array<int, 3>& n) { return cplx(n[0] - n[1]); })};
}

/// Joint parity (-1)^(n_a + n_b) of the storage modes.
inline Operator joint_parity_op(const FockBasis& basis) {
  return {basis, detail::diagonal_from(basis, [](const std::array<int, 3>& n) {
            return cplx(((n[0] + n[1]) % 2 == 0) ? 1.0 : -1.0);
          })};
}

/// exp(alpha m† - alpha* m) on a single truncated mode with `levels` levels.
inline Mat single_mode_displacement(int levels, cplx alpha) {
  if (alpha == cplx(0.0)) return Mat::Identity(levels, levels);
  const Mat a = detail::single_mode_annihilation(levels);
  const Mat gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return gen.exp();
}

/// The leading `levels` x `levels` block of the untruncated displacement operator.
/// Column 0 is the coherent state; D a† = (a† - alpha*) D gives
///   <m|D|n+1> = (sqrt(m) <m-1|D|n> - alpha* <m|D|n>) / sqrt(n+1),
/// which closes on the block, so no truncation enters.
inline Mat displacement_block(int levels, cplx alpha) {
  if (levels < 1) throw DomainError("displacement_block needs at least one level");
  Mat d(levels, levels);
  d(0, 0) = std::exp(-0.5 * std::norm(alpha));
  for (int m = 1; m < levels; ++m) d(m, 0) = d(m - 1, 0) * alpha / std::sqrt(double(m));
  const cplx ac = std::conj(alpha);
  for (int n = 0; n + 1 < levels; ++n) {
    const double s = 1.0 / std::sqrt(double(n + 1));
    d(0, n + 1) = -ac * d(0, n) * s;
    for (int m = 1; m < levels; ++m) d(m, n + 1) = (std::sqrt(double(m)) * d(m - 1, n) - ac * d(m, n)) * s;
  }
  return d;
}

/// Displacement of one mode, computed as the matrix exponential of the truncated generator.
inline Operator displacement_op(const FockBasis& basis, Mode mode, cplx alpha) {
  return {basis, detail::embed(basis, mode, single_mode_displacement(basis.levels(mode), alpha))};
}

/// Truncation leakage of displacing `state` on `mode`: 1 - ||P D_ext |psi>||, where D_ext
/// is evaluated on a space padded by `pad` levels and P projects back onto the basis.
inline double displacement_leakage(const StateVector& state, Mode mode, cplx alpha, int pad = 30) {
  const FockBasis& b = state.basis();
  const int lv = b.levels(mode);
  const Mat big = single_mode_displacement(lv + pad, alpha);
  const Mat kept = big.topLeftCorner(lv, lv);
  const Vec out = detail::embed(b, mode, kept) * state.amplitudes();
  return 1.0 - out.norm() / state.norm();
}

/// Density-matrix version of the leakage metric: 1 - sqrt(Tr[P D_ext rho D_ext† P]).
inline double displacement_leakage(const DensityMatrix& rho, Mode mode, cplx alpha, int pad = 30) {
  const FockBasis& b = rho.basis();
  const int lv = b.levels(mode);
  const Mat big = single_mode_displacement(lv + pad, alpha);
  const Mat d = detail::embed(b, mode, big.topLeftCorner(lv, lv));
  const double kept = (d * rho.matrix() * d.adjoint()).trace().real();
  return 1.0 - std::sqrt(std::max(kept, 0.0) / rho.trace());
}

inline StateVector fock_state(const FockBasis& basis, int na, int nb) {
  Vec v = Vec::Zero(basis.dim());
  v(basis.index(na, nb)) = 1.0;
  return {basis, v};
}

inline StateVector fock_state(const FockBasis& basis, int na, int nb, int nr) {
  Vec v = Vec::Zero(basis.dim());
  v(basis.index(na, nb, nr)) = 1.0;
  return {basis, v};
}

// ---------------------------------------------------------------------------
// Pair coherent states

inline constexpr double kMaxPairAmplitude = 20.0;

namespace detail {

inline void check_pair_amplitude(double g) {
  if (!std::isfinite(g) || g > kMaxPairAmplitude)
    throw DomainError("|gamma| = " + fmt(g) + " outside supported range (<= 20)");
}

/// log of |gamma|^(2n+d) / (n! (n+d)!)
inline double log_pair_term(double g, int n, int d) {
  return (2.0 * n + d) * std::log(g) - std::lgamma(n + 1.0) - std::lgamma(n + d + 1.0);
}

}  // namespace detail

/// S_d(|gamma|) = sum_n |gamma|^(2n+d) / (n! (n+d)!) = I_d(2|gamma|), for d >= 0.
/// Terms follow the multiplicative recurrence and stop once the relative term is below 1e-16.
inline double pair_series(double g, int d) {
  if (d < 0) d = -d;
  detail::check_pair_amplitude(g);
  if (g == 0.0) return d == 0 ? 1.0 : 0.0;
  double term = std::exp(detail::log_pair_term(g, 0, d));
  double sum = term;
  const double g2 = g * g;
  for (int n = 0; n < 100000; ++n) {
    term *= g2 / ((n + 1.0) * (n + 1.0 + d));
    sum += term;
    if (term < 1e-16 * sum && n + 1 > g) break;
  }
  return sum;
}

/// Normalisation N of |gamma, delta> as written in the Fock basis:
/// N^-2 = sum_n |gamma|^(2n+|delta|) / (n! (n+|delta|)!).
inline double pcs_normalization(cplx gamma, int delta) {
  const double g = std::abs(gamma);
  detail::check_pair_amplitude(g);
  if (g == 0.0) {
    if (delta != 0) throw DomainError("normalisation diverges for gamma = 0 and delta != 0");
    return 1.0;
  }
  return 1.0 / std::sqrt(pair_series(g, delta));
}

/// Probability weight of |gamma, delta> outside the basis truncation.
inline double pcs_tail_probability(cplx gamma, int delta, const FockBasis& basis) {
  const double g = std::abs(gamma);
  detail::check_pair_amplitude(g);
  const int d = std::abs(delta);
  // |n+d, n> for delta >= 0, |n, n+d> for delta < 0
  const int hi = delta >= 0 ? basis.cutoff(Mode::a) : basis.cutoff(Mode::b);
  const int lo = delta >= 0 ? basis.cutoff(Mode::b) : basis.cutoff(Mode::a);
  const int nmax = std::min(hi - d, lo);
  if (nmax < 0) return 1.0;
  if (g == 0.0) return 0.0;
  const double total = pair_series(g, d);
  double kept = 0.0;
  for (int n = 0; n <= nmax; ++n) kept += std::exp(detail::log_pair_term(g, n, d));
  return std::max(0.0, 1.0 - kept / total);
}

/// Heuristic storage cutoff ceil(|gamma|^2 + 5|gamma| + 4), plus |delta| on the larger mode.
inline int suggest_cutoff(cplx gamma, int delta = 0) {
  const double g = std::abs(gamma);
  return static_cast<int>(std::ceil(g * g + 5.0 * g + 4.0)) + std::abs(delta);
}

/// Pair coherent state
///   |gamma, delta> = N sum_n gamma^(n + delta/2) / sqrt(n! (n+delta)!) |n+delta>_a |n>_b
/// with negative delta obtained by exchanging the roles of a and b.
inline StateVector pcs_state(cplx gamma, int delta, const FockBasis& basis, double tail_tolerance = 1e-8) {
  if (basis.modes() != 2) throw DomainError("pcs_state requires a two-mode basis");
  const double g = std::abs(gamma);
  detail::check_pair_amplitude(g);
  const int d = std::abs(delta);
  if (g == 0.0) return delta >= 0 ? fock_state(basis, d, 0) : fock_state(basis, 0, d);

  const double tail = pcs_tail_probability(gamma, delta, basis);
  if (tail > tail_tolerance)
    throw DomainError("basis " + basis.describe() + " too small for pcs(|gamma|=" + fmt(g) + ", delta=" +
                      std::to_string(delta) + "): tail probability " + fmt(tail));

  const double phase = std::arg(gamma);
  const double log_norm = -0.5 * std::log(pair_series(g, d));
  Vec v = Vec::Zero(basis.dim());
  const int hi = delta >= 0 ? basis.cutoff(Mode::a) : basis.cutoff(Mode::b);
  const int lo = delta >= 0 ? basis.cutoff(Mode::b) : basis.cutoff(Mode::a);
  for (int n = 0; n <= std::min(hi - d, lo); ++n) {
    const double power = n + 0.5 * d;
    const double mag = std::exp(log_norm + power * std::log(g) - 0.5 * (std::lgamma(n + 1.0) + std::lgamma(n + d + 1.0)));
    const int idx = delta >= 0 ? basis.index(n + d, n) : basis.index(n, n + d);
    v(idx) = std::polar(mag, power * phase);
  }
  return StateVector(basis, v).normalized();
}

/// Mean photon number of |gamma, delta> in mode a or b:
///   n_a = (N'_{delta}^2 / N'_{delta+1}^2) |gamma|^2 + delta,  n_b = n_a - delta,
/// with N'_{nu}^-2 = |gamma|^-nu I_|nu|(2|gamma|).
inline double pcs_mean_photon(cplx gamma, int delta, Mode mode) {
  const double g = std::abs(gamma);
  detail::check_pair_amplitude(g);
  if (mode == Mode::r) throw DomainError("pcs_mean_photon: mode must be a or b");
  double na;
  if (g == 0.0) {
    na = delta > 0 ? delta : 0.0;
  } else {
    // ratio of N'^2 collapses to |gamma|^-1 S_|delta+1| / S_|delta|
    na = g * pair_series(g, delta + 1) / pair_series(g, delta) + delta;
  }
  return mode == Mode::a ? na : na - delta;
}

/// Trace over the reservoir mode of a three-mode state.
inline DensityMatrix partial_trace_reservoir(const DensityMatrix& rho3) {
  const FockBasis& b3 = rho3.basis();
  if (b3.modes() != 3) throw DomainError("partial_trace_reservoir needs a three-mode state");
  const FockBasis b2 = b3.storage();
  const int lr = b3.levels(Mode::r);
  Mat out = Mat::Zero(b2.dim(), b2.dim());
  for (int i = 0; i < b2.dim(); ++i)
    for (int j = 0; j < b2.dim(); ++j) {
      cplx acc = 0.0;
      for (int k = 0; k < lr; ++k) acc += rho3.matrix()(i * lr + k, j * lr + k);
      out(i, j) = acc;
    }
  return {b2, out};
}

// ---------------------------------------------------------------------------
// Figures of merit

/// <psi|rho|psi>
inline double fidelity(const DensityMatrix& rho, const StateVector& psi) {
  require_same_basis(rho.basis(), psi.basis(), "fidelity");
  return (psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes())(0, 0).real();
}

/// (1/2) ||rho - sigma||_1
inline double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require_same_basis(rho.basis(), sigma.basis(), "trace_distance");
  const Mat diff = rho.matrix() - sigma.matrix();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace pcs
