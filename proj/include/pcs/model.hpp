#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "pcs/error.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/units.hpp"

namespace pcs {

/// Device constants. All rates are angular (rad/s). Kerr constants are the
/// positive magnitudes; the Hamiltonian builders supply the minus signs.
struct SystemParams {
  double chi_qa = 0, chi_qb = 0, chi_qr = 0;
  double K_aa = 0, K_bb = 0, K_ab = 0, K_ar = 0, K_br = 0, K_rr = 0;
  double kappa_a = 0, kappa_b = 0, kappa_r = 0;
  /// Measured dispersive shift of joint Fock state |j k>, overriding j*chi_qa + k*chi_qb.
  std::map<std::pair<int, int>, double> chi_override;

  double chi(int na, int nb) const {
    if (auto it = chi_override.find({na, nb}); it != chi_override.end()) return it->second;
    return na * chi_qa + nb * chi_qb;
  }

  void validate() const {
    if (kappa_a < 0 || kappa_b < 0 || kappa_r < 0) throw DomainError("loss rates must be non-negative");
  }
};

enum class KerrSet { plain, pumped };

/// Measured device constants. `pumped` selects the K_bb and K_ab values
/// measured with the four-wave-mixing tone on.
inline SystemParams device_params(KerrSet set = KerrSet::pumped) {
  using namespace units;
  SystemParams p;
  p.chi_qa = mhz(1.89);
  p.chi_qb = mhz(6.26);
  p.chi_qr = mhz(3.09);
  p.K_aa = khz(8);
  p.K_bb = set == KerrSet::pumped ? khz(81) : khz(71);
  p.K_ab = set == KerrSet::pumped ? khz(53) : khz(48);
  p.K_ar = khz(7);
  p.K_br = khz(58);
  p.K_rr = khz(12);
  p.kappa_a = rate_from_t1(us(530));
  p.kappa_b = rate_from_t1(us(216));
  p.kappa_r = mhz(0.78);
  return p;
}

/// Drives applied to the reservoir. The mixing rate g_ab is either given
/// directly or obtained from the pump as g_ab = fwm_coefficient * xi_p.
struct DriveConfig {
  cplx eps_d{0.0};
  std::optional<cplx> eps_p;
  std::optional<cplx> g_ab;
  double fwm_coefficient = 0.0;
  double detuning_d = 0.0;  ///< Delta_d
  double detuning_p = 0.0;  ///< omega_r - omega_p
  std::optional<double> detuning_a;  ///< defaults to K_ar |r_0|^2
  std::optional<double> detuning_b;  ///< defaults to K_br |r_0|^2
};

struct DerivedRates {
  cplx xi_p{0.0};
  cplx r_0{0.0};
  cplx g_ab{0.0};
  cplx eps_ab{0.0};
  double kappa_ab = 0.0;
  cplx zeta_a{0.0};
  cplx zeta_b{0.0};
  double K_eff = 0.0;
  /// Coefficient of ab in the composite jump operator; |pair_jump|^2 = kappa_ab.
  cplx pair_jump{0.0};

  /// Replace kappa_ab, keeping the phase of the pair term in the jump operator.
  void set_kappa_ab(double k) {
    if (k < 0) throw DomainError("kappa_ab must be non-negative");
    const double ph = pair_jump == cplx(0.0) ? 0.0 : std::arg(pair_jump);
    kappa_ab = k;
    pair_jump = std::polar(std::sqrt(k), ph);
  }

  /// Replace |eps_ab|, keeping its phase (a zero eps_ab is taken as real).
  void set_eps_ab_magnitude(double m) {
    const double ph = eps_ab == cplx(0.0) ? 0.0 : std::arg(eps_ab);
    eps_ab = std::polar(m, ph);
  }
};

inline double effective_kerr(const SystemParams& p) { return -(p.K_ab + 0.5 * p.K_aa + 0.5 * p.K_bb); }

/// Rates specified directly rather than derived from drives.
inline DerivedRates pair_rates(cplx eps_ab, double kappa_ab, double K_eff, cplx zeta_a = 0.0, cplx zeta_b = 0.0) {
  DerivedRates r;
  r.eps_ab = eps_ab;
  r.K_eff = K_eff;
  r.zeta_a = zeta_a;
  r.zeta_b = zeta_b;
  r.set_kappa_ab(kappa_ab);
  return r;
}

inline DerivedRates derive_rates(const SystemParams& p, const DriveConfig& d) {
  p.validate();
  if (!(p.kappa_r > 0)) throw DomainError("derive_rates: kappa_r must be positive");
  if (d.eps_p.has_value() == d.g_ab.has_value())
    throw DomainError("drive config must set exactly one of eps_p and g_ab");

  DerivedRates r;
  if (d.eps_p) r.xi_p = -kI * *d.eps_p / (0.5 * p.kappa_r + kI * d.detuning_p);
  r.g_ab = d.g_ab ? *d.g_ab : d.fwm_coefficient * r.xi_p;
  r.r_0 = 2.0 * d.eps_d / (kI * p.kappa_r - 2.0 * d.detuning_d);
  r.eps_ab = r.g_ab * r.r_0;
  r.kappa_ab = 4.0 * std::norm(r.g_ab) / p.kappa_r;
  const double sk = std::sqrt(p.kappa_r);
  r.zeta_a = -2.0 * p.K_ar * r.r_0 / sk;
  r.zeta_b = -2.0 * p.K_br * r.r_0 / sk;
  r.K_eff = effective_kerr(p);
  r.pair_jump = 2.0 * std::conj(r.g_ab) / sk;
  return r;
}

enum class Process { single_photon, single_mode_two_photon, pair_photon };

/// Steady-state amplitude of a driven-dissipative process:
///   single photon:           alpha = eps / (i kappa/2 - Delta)
///   single-mode two photon:  alpha = sqrt(eps2 / (i kappa2/2 - K))
///   pair photon:             gamma = eps_ab / (i kappa_ab/2 - K_eff)
inline cplx steady_state_amplitude(Process process, cplx drive, double loss, double frequency) {
  const cplx den = 0.5 * kI * loss - frequency;
  if (den == cplx(0.0)) throw DomainError("steady_state_amplitude: vanishing denominator");
  switch (process) {
    case Process::single_photon:
    case Process::pair_photon:
      return drive / den;
    case Process::single_mode_two_photon:
      return std::sqrt(drive / den);
  }
  throw DomainError("unknown process");
}

inline cplx pair_amplitude(const DerivedRates& r) {
  return steady_state_amplitude(Process::pair_photon, r.eps_ab, r.kappa_ab, r.K_eff);
}

enum class KerrForm {
  separate,   ///< -K_aa/2 n_a^2 - K_bb/2 n_b^2 - K_ab n_a n_b
  effective,  ///< K_eff n_a n_b
};

/// Storage Hamiltonian with optional pair drive eps_ab a†b† + h.c.
inline Operator build_storage_hamiltonian(const FockBasis& basis, const SystemParams& p, const DerivedRates& r,
                                          bool include_drive, KerrForm form = KerrForm::separate) {
  if (basis.modes() != 2) throw DomainError("storage Hamiltonian needs a two-mode basis");
  Mat h = Mat::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < basis.dim(); ++i) {
    const auto n = basis.labels(i);
    const double na = n[0], nb = n[1];
    h(i, i) = form == KerrForm::separate ? -0.5 * p.K_aa * na * na - 0.5 * p.K_bb * nb * nb - p.K_ab * na * nb
                                         : r.K_eff * na * nb;
  }
  if (include_drive && r.eps_ab != cplx(0.0)) {
    const Mat ab = (annihilation_op(basis, Mode::a) * annihilation_op(basis, Mode::b)).matrix();
    h += r.eps_ab * ab.adjoint() + std::conj(r.eps_ab) * ab;
  }
  return {basis, h};
}

/// Three-mode Hamiltonian in the drive frame:
///   Delta_d n_r + Delta_a n_a + Delta_b n_b - K_rr/2 n_r^2 + H_storage
///   - K_ar n_a n_r - K_br n_b n_r + (g a†b† r + eps_d r† + h.c.)
inline Operator build_full_model_hamiltonian(const FockBasis& basis, const SystemParams& p, const DriveConfig& d,
                                             const DerivedRates& r) {
  if (basis.modes() != 3) throw DomainError("full model Hamiltonian needs a three-mode basis");
  const double r02 = std::norm(r.r_0);
  const double da = d.detuning_a.value_or(p.K_ar * r02);
  const double db = d.detuning_b.value_or(p.K_br * r02);
  Mat h = Mat::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < basis.dim(); ++i) {
    const auto n = basis.labels(i);
    const double na = n[0], nb = n[1], nr = n[2];
    h(i, i) = d.detuning_d * nr + da * na + db * nb - 0.5 * p.K_rr * nr * nr - 0.5 * p.K_aa * na * na -
              0.5 * p.K_bb * nb * nb - p.K_ab * na * nb - p.K_ar * na * nr - p.K_br * nb * nr;
  }
  const Mat a = annihilation_op(basis, Mode::a).matrix();
  const Mat b = annihilation_op(basis, Mode::b).matrix();
  const Mat rr = annihilation_op(basis, Mode::r).matrix();
  const Mat mix = r.g_ab * (a.adjoint() * b.adjoint() * rr);
  const Mat drive = d.eps_d * rr.adjoint();
  h += mix + mix.adjoint() + drive + drive.adjoint();
  return {basis, h};
}

struct LangevinSolution {
  cplx r{0.0};
  cplx s{0.0};
  double residual_r = 0.0;  ///< |dr/dt| at the solution
  double residual_s = 0.0;  ///< |ds/dt| at the solution
};

/// Semiclassical steady state of the reservoir amplitude r and pair amplitude s:
///   0 = -i eps_d - (kappa_r/2 + i Delta_d) r - i g* s^2
///   0 = -2i g s* r + 2i K_eff |s|^2 s
/// With g = 0 this is the linear driven cavity (s = 0).
inline LangevinSolution langevin_steady_state(const SystemParams& p, const DriveConfig& d, const DerivedRates& rates) {
  if (!(p.kappa_r > 0)) throw DomainError("langevin_steady_state: kappa_r must be positive");
  const cplx g = rates.g_ab;
  const double K = rates.K_eff;
  const cplx lin = 0.5 * kI * (p.kappa_r + 2.0 * kI * d.detuning_d);
  LangevinSolution out;
  if (g == cplx(0.0)) {
    out.r = d.eps_d / lin;
    out.s = 0.0;
  } else {
    if (K == 0.0) throw DomainError("langevin_steady_state: K_eff = 0 has no finite pair amplitude");
    out.r = d.eps_d / (-std::norm(g) / K + lin);
    out.s = std::sqrt(g * out.r / K);
  }
  out.residual_r = std::abs(-kI * d.eps_d - (0.5 * p.kappa_r + kI * d.detuning_d) * out.r - kI * std::conj(g) * out.s * out.s);
  out.residual_s = std::abs(-2.0 * kI * g * std::conj(out.s) * out.r + 2.0 * kI * K * std::norm(out.s) * out.s);
  return out;
}

struct AdiabaticityReport {
  double cross_kerr_ratio = 0.0;  ///< gamma (K_ar + K_br) / kappa_r
  double pull_ratio = 0.0;        ///< |g|^2 / (|K_eff| kappa_r)
  double coupling_ratio = 0.0;    ///< |g| / kappa_r
  double threshold = 0.2;
  bool ok() const { return cross_kerr_ratio < threshold && pull_ratio < threshold && coupling_ratio < threshold; }
};

inline AdiabaticityReport adiabaticity_report(const SystemParams& p, const DerivedRates& r, double gamma_estimate,
                                              double threshold = 0.2) {
  if (!(p.kappa_r > 0)) throw DomainError("adiabaticity_report: kappa_r must be positive");
  AdiabaticityReport rep;
  rep.threshold = threshold;
  rep.cross_kerr_ratio = std::abs(gamma_estimate) * (p.K_ar + p.K_br) / p.kappa_r;
  const double g2 = std::norm(r.g_ab);
  rep.pull_ratio = g2 == 0.0 ? 0.0 : g2 / (std::abs(r.K_eff) * p.kappa_r);
  rep.coupling_ratio = std::abs(r.g_ab) / p.kappa_r;
  return rep;
}

}  // namespace pcs
