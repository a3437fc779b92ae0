#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/tomo.hpp"

namespace pcs {

// ---------------------------------------------------------------------------
// Hermitian coordinates
//
// A dim x dim Hermitian matrix is stored as dim² reals: the diagonal first, then
// (Re, Im) of every upper-triangular entry in row-major order.

namespace detail {

inline int coord_count(const FockBasis& b) { return b.dim() * b.dim(); }

inline Eigen::VectorXd to_coords(const Mat& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXd x(d * d);
  int k = 0;
  for (int i = 0; i < d; ++i) x(k++) = m(i, i).real();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      x(k++) = m(i, j).real();
      x(k++) = m(i, j).imag();
    }
  return x;
}

inline Mat from_coords(const Eigen::VectorXd& x, int d) {
  Mat m(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i) m(i, i) = x(k++);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      m(i, j) = cplx(x(k), x(k + 1));
      m(j, i) = std::conj(m(i, j));
      k += 2;
    }
  return m;
}

/// Real row r with Tr[rho E] = r . coords(rho) for Hermitian E.
inline Eigen::RowVectorXd measurement_row(const Mat& e) {
  const int d = static_cast<int>(e.rows());
  Eigen::RowVectorXd r(d * d);
  int k = 0;
  for (int i = 0; i < d; ++i) r(k++) = e(i, i).real();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      r(k++) = 2.0 * e(j, i).real();
      r(k++) = -2.0 * e(j, i).imag();
    }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Measurement model

/// (alpha, beta) pairs, one per Wigner sample.
using DisplacementList = std::vector<std::pair<cplx, cplx>>;

struct MeasurementMatrix {
  FockBasis basis;
  DisplacementList displacements;
  Eigen::MatrixXd rows;    // one row per sample, dim² columns
  Eigen::VectorXd values;  // sample values, (pi^2/4) W convention

  int samples() const { return static_cast<int>(rows.rows()); }

  std::vector<double> singular_values() const {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(rows);
    const auto& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
  }

  double condition_number() const {
    const auto s = singular_values();
    if (s.empty() || s.back() <= 0) return std::numeric_limits<double>::infinity();
    return s.front() / s.back();
  }

  /// Numerical rank at relative threshold `tol`.
  int rank(double tol = 1e-10) const {
    const auto s = singular_values();
    int r = 0;
    for (double v : s)
      if (!s.empty() && v > tol * s.front()) ++r;
    return r;
  }

  /// Noise-free sample values for a known state.
  Eigen::VectorXd predict(const DensityMatrix& rho) const {
    require_same_basis(basis, rho.basis(), "predict");
    return rows * detail::to_coords(rho.matrix());
  }
};

/// Rows are the flattened D(alpha, beta) P_J D(alpha, beta)† = D(2 alpha) P_a ⊗ D(2 beta) P_b.
/// Sample values start at zero; see the WignerSample overload.
inline MeasurementMatrix assemble_measurements(const DisplacementList& displacements,
                                               const FockBasis& basis) {
  if (displacements.empty()) throw DomainError("assemble_measurements: no displacements");
  if (basis.modes() != 2) throw DomainError("assemble_measurements: two-mode basis required");
  const int la = basis.levels(Mode::a), lb = basis.levels(Mode::b);
  const Mat pa = detail::parity_diagonal(la), pb = detail::parity_diagonal(lb);
  MeasurementMatrix mm{basis, displacements, Eigen::MatrixXd(displacements.size(), detail::coord_count(basis)),
                       Eigen::VectorXd::Zero(displacements.size())};
  for (std::size_t s = 0; s < displacements.size(); ++s) {
    const Mat ea = displacement_block(la, 2.0 * displacements[s].first) * pa;
    const Mat eb = displacement_block(lb, 2.0 * displacements[s].second) * pb;
    mm.rows.row(s) = detail::measurement_row(Eigen::kroneckerProduct(ea, eb).eval());
  }
  return mm;
}

inline MeasurementMatrix assemble_measurements(const std::vector<WignerSample>& samples, const FockBasis& basis) {
  DisplacementList d;
  d.reserve(samples.size());
  for (const auto& s : samples) d.emplace_back(s.alpha, s.beta);
  MeasurementMatrix mm = assemble_measurements(d, basis);
  for (std::size_t s = 0; s < samples.size(); ++s) mm.values(s) = samples[s].value;
  return mm;
}

/// Every point of a Cartesian product grid over (Re alpha, Im alpha, Re beta, Im beta).
inline DisplacementList product_grid(const std::vector<double>& axis) {
  DisplacementList out;
  out.reserve(axis.size() * axis.size() * axis.size() * axis.size());
  for (double ra : axis)
    for (double ia : axis)
      for (double rb : axis)
        for (double ib : axis) out.emplace_back(cplx(ra, ia), cplx(rb, ib));
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

struct Reconstruction {
  DensityMatrix rho;
  /// Most negative eigenvalue; no positivity projection is applied.
  double min_eigenvalue = 0;
  /// ||M x - values||_2
  double residual = 0;
  /// Condition number of M (least squares) or of the KKT matrix (constrained).
  double condition_number = 0;
};

namespace detail {

inline Reconstruction finish(const MeasurementMatrix& mm, const Eigen::VectorXd& x, double cond) {
  DensityMatrix rho(mm.basis, from_coords(x, mm.basis.dim()));
  return {rho, rho.min_eigenvalue(), (mm.rows * x - mm.values).norm(), cond};
}

}  // namespace detail

/// Moore-Penrose solution of min ||M x - values||.
inline Reconstruction reconstruct_lsq(const MeasurementMatrix& mm, double rank_tol = 1e-10) {
  if (mm.samples() == 0) throw DomainError("reconstruct_lsq: no samples");
  const int n = detail::coord_count(mm.basis);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mm.rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * s(0)) ++rank;
  if (rank < n)
    throw DomainError("reconstruct_lsq: measurement matrix is rank deficient (null-space dimension " +
                      std::to_string(n - rank) + " for basis " + mm.basis.describe() + ")");
  const Eigen::VectorXd x = svd.solve(mm.values);
  return detail::finish(mm, x, s(0) / s(s.size() - 1));
}

/// Least squares with the diagonal of rho pinned by Lagrange multipliers:
///   [[MᵀM, Cᵀ], [C, 0]] [x; lambda] = [Mᵀ values; diagonals].
inline Reconstruction reconstruct_constrained(const MeasurementMatrix& mm, const std::vector<double>& diagonals) {
  if (mm.samples() == 0) throw DomainError("reconstruct_constrained: no samples");
  const int d = mm.basis.dim();
  const int n = detail::coord_count(mm.basis);
  if (static_cast<int>(diagonals.size()) != d)
    throw DomainError("reconstruct_constrained: expected " + std::to_string(d) + " diagonal values");
  double total = 0.0;
  for (double v : diagonals) total += v;
  if (std::abs(total - 1.0) > 1e-6) throw DomainError("reconstruct_constrained: diagonals sum to " + fmt(total));

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + d, n + d);
  kkt.topLeftCorner(n, n) = mm.rows.transpose() * mm.rows;
  for (int i = 0; i < d; ++i) kkt(n + i, i) = kkt(i, n + i) = 1.0;  // diagonal coordinates come first
  Eigen::VectorXd rhs(n + d);
  rhs.head(n) = mm.rows.transpose() * mm.values;
  for (int i = 0; i < d; ++i) rhs(n + i) = diagonals[i];

  // the KKT matrix is invertible exactly when [M; C] has full column rank
  Eigen::MatrixXd stacked(mm.samples() + d, n);
  stacked << mm.rows, Eigen::MatrixXd::Identity(d, n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
  qr.setThreshold(1e-10);
  if (qr.rank() < n)
    throw NumericalError("reconstruct_constrained: KKT system is singular; the samples leave " +
                         std::to_string(n - qr.rank()) + " off-diagonal coordinates undetermined");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15))
    throw NumericalError("reconstruct_constrained: KKT system is ill-conditioned (reciprocal condition " +
                         fmt(rcond) + ")");
  const Eigen::VectorXd sol = lu.solve(rhs);
  return detail::finish(mm, sol.head(n), 1.0 / rcond);
}

// ---------------------------------------------------------------------------
// Equilibrium over photon-number-difference sectors

struct DeltaDistribution {
  std::map<int, double> C;
  /// Largest relative residual of the balance equations on the window.
  double max_residual = 0;
  /// Boundary weight exceeded 1e-8, so the window truncates the distribution.
  bool window_too_small = false;
};

/// Stationary weights of the hopping chain in which a-loss moves delta -> delta - 1 at rate
/// kappa_a nbar_a(gamma, delta) and b-loss moves delta -> delta + 1 at rate kappa_b nbar_b(gamma, delta).
/// Hops that would leave [delta_min, delta_max] are dropped.
inline DeltaDistribution delta_equilibrium(cplx gamma, double kappa_a, double kappa_b, int delta_min = -6,
                                           int delta_max = 6) {
  if (delta_min > delta_max) throw DomainError("delta window is empty");
  if (kappa_a < 0 || kappa_b < 0) throw DomainError("loss rates must be non-negative");
  if (kappa_a == 0 && kappa_b == 0) throw DomainError("delta equilibrium undefined without loss");
  const double g = std::abs(gamma);
  const int n = delta_max - delta_min + 1;
  auto down = [&](int dl) { return kappa_a * pcs_mean_photon(gamma, dl, Mode::a); };
  auto up = [&](int dl) { return kappa_b * pcs_mean_photon(gamma, dl, Mode::b); };

  // Degenerate chains drain into a single sector: the lower edge without b-loss, the upper edge
  // without a-loss, and delta = 0 for the vacuum amplitude.
  std::vector<double> w(n, 0.0);
  if (kappa_b == 0) {
    w[0] = 1.0;
  } else if (kappa_a == 0) {
    w[n - 1] = 1.0;
  } else if (g == 0) {
    if (delta_min > 0 || delta_max < 0) throw DomainError("delta window must contain 0 when gamma = 0");
    w[-delta_min] = 1.0;
  } else {
    // detailed balance C_{d+1} down(d+1) = C_d up(d), carried in logs and anchored at the largest weight
    std::vector<double> logw(n, 0.0);
    for (int k = 1; k < n; ++k) {
      const int dl = delta_min + k - 1;
      logw[k] = logw[k - 1] + std::log(up(dl)) - std::log(down(dl + 1));
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    for (int k = 0; k < n; ++k) w[k] = std::exp(logw[k] - top);
  }
  double sum = 0.0;
  for (double v : w) sum += v;

  DeltaDistribution out;
  for (int k = 0; k < n; ++k) out.C[delta_min + k] = w[k] / sum;
  for (int k = 0; k < n; ++k) {
    const int dl = delta_min + k;
    const double c = out.C[dl];
    const double outflow = c * ((k > 0 ? down(dl) : 0.0) + (k + 1 < n ? up(dl) : 0.0));
    const double inflow =
        (k + 1 < n ? out.C[dl + 1] * down(dl + 1) : 0.0) + (k > 0 ? out.C[dl - 1] * up(dl - 1) : 0.0);
    const double scale = std::max({outflow, inflow, std::numeric_limits<double>::min()});
    out.max_residual = std::max(out.max_residual, std::abs(outflow - inflow) / scale);
  }
  out.window_too_small = out.C.begin()->second > 1e-8 || out.C.rbegin()->second > 1e-8;
  return out;
}

}  // namespace pcs
