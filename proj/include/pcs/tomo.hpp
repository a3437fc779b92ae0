#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <variant>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/measure.hpp"
#include "pcs/model.hpp"

namespace pcs {

// ---------------------------------------------------------------------------
// Joint Wigner function

/// One point of the joint Wigner function, reported as (pi^2/4) W = Tr[rho D P_J D†].
struct WignerSample {
  cplx alpha, beta;
  double value = 0;
  /// Population that D(alpha, beta) pushes out of the truncated basis.
  double leakage = 0;
  bool leakage_warning = false;
};

inline constexpr double kWignerLeakageThreshold = 1e-3;

namespace detail {

inline Mat parity_diagonal(int levels) {
  Mat p = Mat::Zero(levels, levels);
  for (int n = 0; n < levels; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
  return p;
}

/// Tr[rho (A ⊗ B)] for a two-mode rho.
inline cplx product_trace(const Mat& rho, const Mat& A, const Mat& B) {
  const int la = static_cast<int>(A.rows()), lb = static_cast<int>(B.rows());
  cplx acc = 0.0;
  for (int a1 = 0; a1 < la; ++a1)
    for (int b1 = 0; b1 < lb; ++b1)
      for (int a2 = 0; a2 < la; ++a2) {
        const cplx ea = A(a2, a1);
        if (ea == cplx(0.0)) continue;
        for (int b2 = 0; b2 < lb; ++b2) acc += rho(a1 * lb + b1, a2 * lb + b2) * ea * B(b2, b1);
      }
  return acc;
}

}  // namespace detail

/// Uses D P D† = D(2 alpha) P, so only the exact in-basis block of D(2 alpha) is needed.
inline WignerSample joint_wigner(const DensityMatrix& rho, cplx alpha, cplx beta,
                                 double leakage_threshold = kWignerLeakageThreshold) {
  const DensityMatrix st = detail::storage_view(rho);
  const FockBasis& b = st.basis();
  const int la = b.levels(Mode::a), lb = b.levels(Mode::b);
  const Mat ea = displacement_block(la, 2.0 * alpha) * detail::parity_diagonal(la);
  const Mat eb = displacement_block(lb, 2.0 * beta) * detail::parity_diagonal(lb);
  WignerSample s{alpha, beta};
  s.value = detail::product_trace(st.matrix(), ea, eb).real();

  const Mat da = displacement_block(la, alpha), db = displacement_block(lb, beta);
  const Mat ka = da.adjoint() * da, kb = db.adjoint() * db;
  const double tr = st.trace();
  s.leakage = tr > 0 ? std::max(0.0, 1.0 - detail::product_trace(st.matrix(), ka, kb).real() / tr) : 0.0;
  s.leakage_warning = s.leakage > leakage_threshold;
  return s;
}

enum class Axis { re_alpha, im_alpha, re_beta, im_beta };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::re_alpha: return "re_alpha";
    case Axis::im_alpha: return "im_alpha";
    case Axis::re_beta: return "re_beta";
    case Axis::im_beta: return "im_beta";
  }
  return "?";
}

/// Two real coordinates swept on a grid; the other two stay at the offset (alpha0, beta0).
struct PlanarCut {
  Axis x = Axis::re_alpha, y = Axis::re_beta;
  std::vector<double> xs, ys;
  cplx alpha0 = 0.0, beta0 = 0.0;
};

/// Fixed displacement amplitudes, swept over the phases of alpha and beta.
struct AngularCut {
  double amp_alpha = 0.3, amp_beta = 0.3;
  std::vector<double> phases_alpha, phases_beta;
};

using WignerCut = std::variant<PlanarCut, AngularCut>;

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  if (n < 1) throw DomainError("grid needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  return g;
}

/// n equally spaced phases on [0, 2 pi).
inline std::vector<double> phase_grid(int n) {
  if (n < 1) throw DomainError("phase grid needs at least one point");
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = 2.0 * std::numbers::pi * k / n;
  return g;
}

namespace detail {

inline void set_axis(Axis ax, double v, cplx& alpha, cplx& beta) {
  switch (ax) {
    case Axis::re_alpha: alpha.real(v); break;
    case Axis::im_alpha: alpha.imag(v); break;
    case Axis::re_beta: beta.real(v); break;
    case Axis::im_beta: beta.imag(v); break;
  }
}

}  // namespace detail

/// Samples ordered with the first axis outermost.
inline std::vector<WignerSample> wigner_cut(const DensityMatrix& rho, const WignerCut& cut,
                                            double leakage_threshold = kWignerLeakageThreshold) {
  std::vector<WignerSample> out;
  if (const auto* p = std::get_if<PlanarCut>(&cut)) {
    if (p->x == p->y) throw DomainError("planar Wigner cut needs two distinct axes");
    if (p->xs.empty() || p->ys.empty()) throw DomainError("planar Wigner cut has an empty axis");
    out.reserve(p->xs.size() * p->ys.size());
    for (double x : p->xs)
      for (double y : p->ys) {
        cplx a = p->alpha0, b = p->beta0;
        detail::set_axis(p->x, x, a, b);
        detail::set_axis(p->y, y, a, b);
        out.push_back(joint_wigner(rho, a, b, leakage_threshold));
      }
  } else {
    const auto& c = std::get<AngularCut>(cut);
    if (c.phases_alpha.empty() || c.phases_beta.empty()) throw DomainError("angular Wigner cut has an empty axis");
    if (c.amp_alpha < 0 || c.amp_beta < 0) throw DomainError("angular Wigner cut amplitudes must be non-negative");
    out.reserve(c.phases_alpha.size() * c.phases_beta.size());
    for (double pa : c.phases_alpha)
      for (double pb : c.phases_beta)
        out.push_back(joint_wigner(rho, std::polar(c.amp_alpha, pa), std::polar(c.amp_beta, pb), leakage_threshold));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subspace tomography

using FockLabel = std::array<int, 2>;

enum class ReadoutKind { fock, parity };

/// R in Tr[R D rho_SS D† R]: a Fock projector |m><m| or the even joint-parity projector (1 + P_J)/2.
struct Readout {
  ReadoutKind kind = ReadoutKind::parity;
  FockLabel label{0, 0};
};

/// How the two displacement phases follow the swept phase phi.
/// common: (|alpha| e^{i phi}, |beta| e^{i phi}); differential: (|alpha| e^{i phi}, |beta| e^{-i phi}).
enum class PhaseSweep { automatic, common, differential };

struct SubspaceSpec {
  std::vector<FockLabel> labels;
  double amp_alpha = 0.3, amp_beta = 0.3;
  std::vector<double> phases = phase_grid(16);
  Readout readout;
  PhaseSweep sweep = PhaseSweep::automatic;

  void validate(const FockBasis& b) const {
    if (labels.empty()) throw DomainError("subspace spec has no labels");
    std::set<FockLabel> seen;
    for (const auto& l : labels) {
      if (!b.contains(l[0], l[1])) throw DomainError("subspace label outside basis " + b.describe());
      if (!seen.insert(l).second) throw DomainError("subspace labels must be distinct");
    }
    if (amp_alpha < 0 || amp_beta < 0) throw DomainError("displacement amplitudes must be non-negative");
    if (readout.kind == ReadoutKind::fock && (readout.label[0] < 0 || readout.label[1] < 0))
      throw DomainError("readout Fock label must be non-negative");
  }
};

/// The block of rho on span(labels), rows and columns in label order.
inline Mat subspace_project(const DensityMatrix& rho, const std::vector<FockLabel>& labels) {
  const DensityMatrix st = detail::storage_view(rho);
  const FockBasis& b = st.basis();
  const int d = static_cast<int>(labels.size());
  std::vector<int> idx(d);
  for (int i = 0; i < d; ++i) idx[i] = b.index(labels[i][0], labels[i][1]);
  Mat out(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = st(idx[i], idx[j]);
  return out;
}

struct SubspaceSignal {
  std::vector<double> phases;
  std::vector<double> values;
  PhaseSweep sweep = PhaseSweep::common;
  /// The signal oscillates as e^{i harmonic phi}.
  int harmonic = 0;
};

/// Resolves `automatic` to the sweep under which the pair interferes: the common phase when the
/// total photon numbers differ, otherwise the differential phase.
inline PhaseSweep resolve_sweep(const SubspaceSpec& spec) {
  if (spec.labels.size() != 2) throw DomainError("subspace protocol is implemented for two labels only");
  if (spec.sweep != PhaseSweep::automatic) return spec.sweep;
  const auto& l = spec.labels;
  return (l[0][0] + l[0][1] != l[1][0] + l[1][1]) ? PhaseSweep::common : PhaseSweep::differential;
}

inline int protocol_harmonic(const SubspaceSpec& spec) {
  const auto& l = spec.labels;
  if (resolve_sweep(spec) == PhaseSweep::common) return (l[1][0] + l[1][1]) - (l[0][0] + l[0][1]);
  return (l[1][0] - l[1][1]) - (l[0][0] - l[0][1]);
}

namespace detail {

/// Tr[R D block D† R] for one pair of displacements, with `block` given on span(labels).
inline double protocol_value(const Mat& block, const std::vector<FockLabel>& labels, const Readout& ro, cplx alpha,
                             cplx beta) {
  const int d = static_cast<int>(labels.size());
  int ma = 0, mb = 0;
  for (const auto& l : labels) {
    ma = std::max(ma, l[0]);
    mb = std::max(mb, l[1]);
  }
  if (ro.kind == ReadoutKind::fock) {
    ma = std::max(ma, ro.label[0]);
    mb = std::max(mb, ro.label[1]);
    const Mat da = displacement_block(ma + 1, alpha), db = displacement_block(mb + 1, beta);
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = da(ro.label[0], labels[i][0]) * db(ro.label[1], labels[i][1]);
    return (v.transpose() * block * v.conjugate())(0, 0).real();
  }
  // D† P_J D = D(-2 alpha, -2 beta) P_J
  const Mat da = displacement_block(ma + 1, -2.0 * alpha), db = displacement_block(mb + 1, -2.0 * beta);
  cplx parity = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double sign = ((labels[i][0] + labels[i][1]) % 2 == 0) ? 1.0 : -1.0;
      parity += block(i, j) * sign * da(labels[j][0], labels[i][0]) * db(labels[j][1], labels[i][1]);
    }
  return 0.5 * (block.trace() + parity).real();
}

inline SubspaceSignal protocol_signal(const Mat& block, const SubspaceSpec& spec) {
  SubspaceSignal sig;
  sig.sweep = resolve_sweep(spec);
  sig.harmonic = protocol_harmonic(spec);
  sig.phases = spec.phases;
  const double sb = sig.sweep == PhaseSweep::common ? 1.0 : -1.0;
  for (double phi : spec.phases)
    sig.values.push_back(protocol_value(block, spec.labels, spec.readout, std::polar(spec.amp_alpha, phi),
                                        std::polar(spec.amp_beta, sb * phi)));
  return sig;
}

}  // namespace detail

/// Ancilla-free emulation of the three-level protocol: only rho_SS enters, so nothing outside
/// span(S) can reach the signal.
inline SubspaceSignal simulate_subspace_protocol(const DensityMatrix& rho, const SubspaceSpec& spec) {
  const DensityMatrix st = detail::storage_view(rho);
  spec.validate(st.basis());
  if (spec.labels.size() != 2) throw DomainError("subspace protocol is implemented for two labels only");
  if (spec.phases.size() < 8) throw DomainError("subspace protocol needs at least 8 phases");
  return detail::protocol_signal(subspace_project(st, spec.labels), spec);
}

/// Off-diagonal element <bra|rho|ket> recovered from a protocol signal.
struct CoherenceElement {
  FockLabel bra{}, ket{};
  cplx value;
  double amp_err = 0;
  double phase_err = 0;
  bool consistent_with_zero = false;
};

namespace detail {

struct HarmonicFit {
  double offset = 0;
  cplx z;  // signal = offset + 2 Re(z e^{i h phi})
  double var_z = 0;
};

inline HarmonicFit fit_harmonic(const std::vector<double>& phases, const std::vector<double>& values, int h) {
  const int n = static_cast<int>(phases.size());
  if (n != static_cast<int>(values.size())) throw DomainError("signal phases and values differ in length");
  if (h == 0) throw DomainError("pair does not interfere under this phase sweep");
  if (n < 2 * std::abs(h) + 1)
    throw DomainError("phase grid of " + std::to_string(n) + " points cannot resolve harmonic " + std::to_string(h));
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int k = 0; k < n; ++k) {
    X(k, 0) = 1.0;
    X(k, 1) = std::cos(h * phases[k]);
    X(k, 2) = std::sin(h * phases[k]);
    y(k) = values[k];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 3) throw DomainError("phase grid cannot resolve harmonic " + std::to_string(h));
  const Eigen::Vector3d c = qr.solve(y);
  HarmonicFit f;
  f.offset = c(0);
  f.z = cplx(c(1), -c(2)) / 2.0;
  if (n > 3) {
    const double rss = (X * c - y).squaredNorm();
    const Eigen::Matrix3d cov = (X.transpose() * X).inverse() * (rss / (n - 3));
    f.var_z = 0.25 * (cov(1, 1) + cov(2, 2)) / 2.0;
  }
  return f;
}

}  // namespace detail

/// Fits offset + b cos(h phi) + c sin(h phi) and converts the oscillation to <bra|rho|ket> using the
/// same protocol run on the reference state sqrt(p_bra)|bra> + sqrt(p_ket)|ket>.
inline CoherenceElement fit_coherence(const SubspaceSignal& signal, double p_bra, double p_ket,
                                      const SubspaceSpec& spec) {
  if (spec.labels.size() != 2) throw DomainError("fit_coherence is implemented for two labels only");
  if (signal.phases.size() < 8) throw DomainError("fit_coherence needs at least 8 phases");
  if (p_bra < 0 || p_ket < 0) throw DomainError("populations must be non-negative");

  const int h = protocol_harmonic(spec);
  const auto fit = detail::fit_harmonic(signal.phases, signal.values, h);

  // A pair with an empty side carries no coherence; the transfer factor is then calibrated on
  // an equal-weight reference instead.
  double c = std::sqrt(p_bra * p_ket);
  Mat ref(2, 2);
  if (c > 0)
    ref << p_bra, c, c, p_ket;
  else
    ref << 0.5, 0.5, 0.5, 0.5;
  const double c_ref = c > 0 ? c : 0.5;
  SubspaceSpec ref_spec = spec;
  ref_spec.phases = signal.phases;
  const auto ref_sig = detail::protocol_signal(ref, ref_spec);
  const auto ref_fit = detail::fit_harmonic(ref_sig.phases, ref_sig.values, h);
  const cplx transfer = ref_fit.z / c_ref;
  double scale = 0.0;
  for (double v : signal.values) scale = std::max(scale, std::abs(v));
  if (std::abs(transfer) < 1e-9 * std::max(scale, 1e-300) || std::abs(transfer) < 1e-14)
    throw NumericalError("readout has no visibility for this pair at the chosen displacements");

  CoherenceElement e;
  e.bra = spec.labels[0];
  e.ket = spec.labels[1];
  e.value = fit.z / transfer;
  e.amp_err = std::sqrt(fit.var_z) / std::abs(transfer);
  const double mag = std::abs(e.value);
  e.phase_err = mag > 0 ? std::min(std::numbers::pi, e.amp_err / mag) : std::numbers::pi;
  const double floor = std::max(3.0 * std::sqrt(fit.var_z), 1e-12 * std::max(scale, 1.0));
  e.consistent_with_zero = std::abs(fit.z) <= floor;
  return e;
}

/// Amplitude search maximizing the oscillation visibility |transfer| over a square grid
/// of |alpha|, |beta| in (0, max_amplitude] and the given readout candidates.
struct PreflightResult {
  SubspaceSpec spec;
  double visibility = 0;
};

inline PreflightResult preflight_amplitudes(const SubspaceSpec& spec, std::vector<Readout> candidates = {},
                                            double max_amplitude = 0.5, int steps = 10) {
  if (spec.labels.size() != 2) throw DomainError("preflight is implemented for two labels only");
  if (!(max_amplitude > 0) || steps < 1) throw DomainError("preflight grid must be non-empty");
  if (candidates.empty()) candidates.push_back(spec.readout);
  const int h = protocol_harmonic(spec);
  Mat ref(2, 2);
  ref << 0.5, 0.5, 0.5, 0.5;
  PreflightResult best{spec, -1.0};
  SubspaceSpec trial = spec;
  trial.phases = phase_grid(std::max<int>(16, 2 * std::abs(h) + 2));
  for (const auto& ro : candidates) {
    trial.readout = ro;
    for (int i = 1; i <= steps; ++i)
      for (int j = 1; j <= steps; ++j) {
        trial.amp_alpha = max_amplitude * i / steps;
        trial.amp_beta = max_amplitude * j / steps;
        const auto sig = detail::protocol_signal(ref, trial);
        const double vis = 2.0 * std::abs(detail::fit_harmonic(sig.phases, sig.values, h).z);
        if (vis > best.visibility + 1e-15) {
          best.visibility = vis;
          best.spec = spec;
          best.spec.readout = ro;
          best.spec.amp_alpha = trial.amp_alpha;
          best.spec.amp_beta = trial.amp_beta;
        }
      }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Phase bookkeeping for |jj> - |kk> coherences

/// Timing and tone frequencies of one subspace measurement; frequencies in rad/s in the
/// drive frame, times in seconds.
struct PhaseLedger {
  double t_w = 0;
  double dt_q = 2e-6;
  double dt_d = 24e-9;
  double omega_1 = 0, omega_2 = 0, omega_3 = 0, omega_4 = 0;
  double omega_p = 0, omega_d = 0;
  /// (omega_a + omega_b) - (omega_p + omega_d)
  double delta_sd = 0;

  double t_total() const { return t_w + dt_q + dt_d; }
  double closed_loop_residual() const { return std::abs((omega_3 + omega_4) - (omega_p + omega_d) + (omega_1 - omega_2)); }
};

/// Eigenfrequency of |jj> with the ancilla in g.
inline double omega_jj_g(const SystemParams& p, double delta_sd, int j) {
  return j * delta_sd - p.K_ab * j * j - (p.K_aa + p.K_bb) * j * (j - 1) / 2.0;
}

/// Eigenfrequency of |jj> with the ancilla in e.
inline double omega_jj_e(const SystemParams& p, double delta_sd, int j) { return omega_jj_g(p, delta_sd, j) - p.chi(j, j); }

/// omega_3 + omega_4 that closes the loop for the pair (j, k).
inline double matched_displacement_sum(const SystemParams& p, int j, int k) {
  if (j == k) throw DomainError("phase ledger needs two distinct Fock pairs");
  return (p.chi(j, j) - p.chi(k, k)) / std::abs(k - j);
}

struct LedgerPhase {
  double linear = 0;    // (omega_jjg - omega_kkg) t_tot
  double residual = 0;  // (chi_kk - chi_jj + |k - j| (omega_3 + omega_4)) t_tot
  double total() const { return linear + residual; }
};

inline LedgerPhase phase_ledger_evaluate(const PhaseLedger& l, const SystemParams& p, int j, int k) {
  if (j < 0 || k < 0 || j == k) throw DomainError("phase ledger needs two distinct non-negative Fock pairs");
  const double t = l.t_total();
  LedgerPhase out;
  out.linear = (omega_jj_g(p, l.delta_sd, j) - omega_jj_g(p, l.delta_sd, k)) * t;
  out.residual = (p.chi(k, k) - p.chi(j, j) + std::abs(k - j) * (l.omega_3 + l.omega_4)) * t;
  return out;
}

}  // namespace pcs
