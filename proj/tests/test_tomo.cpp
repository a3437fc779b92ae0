#include <gtest/gtest.h>

#include <random>

#include "pcs/tomo.hpp"

using namespace pcs;
using namespace pcs::units;

namespace {

DensityMatrix pure(const StateVector& s) { return DensityMatrix::pure(s); }

DensityMatrix random_state(const FockBasis& b, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat g(b.dim(), b.dim());
  for (int i = 0; i < b.dim(); ++i)
    for (int j = 0; j < b.dim(); ++j) g(i, j) = cplx(n(rng), n(rng));
  Mat m = g * g.adjoint();
  return {b, m / m.trace().real()};
}

StateVector coherent_product(const FockBasis& b, cplx a0, cplx b0) {
  Vec v(b.dim());
  auto amp = [](cplx z, int n) { return std::exp(-0.5 * std::norm(z)) * std::pow(z, n) / std::sqrt(std::tgamma(n + 1.0)); };
  for (int na = 0; na <= b.cutoff(Mode::a); ++na)
    for (int nb = 0; nb <= b.cutoff(Mode::b); ++nb) v(b.index(na, nb)) = amp(a0, na) * amp(b0, nb);
  return {b, v};
}

SubspaceSpec pair_spec(FockLabel s1, FockLabel s2) {
  SubspaceSpec s;
  s.labels = {s1, s2};
  return s;
}

double oscillation(const SubspaceSignal& sig) {
  auto [lo, hi] = std::minmax_element(sig.values.begin(), sig.values.end());
  return *hi - *lo;
}

}  // namespace

// ---------------------------------------------------------------------------
// joint_wigner

TEST(JointWigner, ParityAtOrigin) {
  FockBasis b(12, 12);
  EXPECT_NEAR(joint_wigner(pure(fock_state(b, 0, 0)), 0.0, 0.0).value, 1.0, 1e-14);
  EXPECT_NEAR(joint_wigner(pure(pcs_state(1.5, 1, b)), 0.0, 0.0).value, -1.0, 1e-12);
  EXPECT_NEAR(joint_wigner(pure(pcs_state(1.5, -1, b)), 0.0, 0.0).value, -1.0, 1e-12);
  EXPECT_NEAR(joint_wigner(pure(pcs_state(1.5, 0, b)), 0.0, 0.0).value, 1.0, 1e-12);
}

TEST(JointWigner, CoherentProductIsGaussian) {
  FockBasis b(24, 24);
  const cplx a0(0.4, -0.3), b0(-0.2, 0.5);
  auto rho = pure(coherent_product(b, a0, b0).normalized());
  for (auto [al, be] : {std::pair<cplx, cplx>{0.0, 0.0}, {a0, b0}, {cplx(1.0, 0.2), cplx(-0.5, -0.5)}}) {
    const double expect = std::exp(-2.0 * std::norm(al - a0) - 2.0 * std::norm(be - b0));
    EXPECT_NEAR(joint_wigner(rho, al, be).value, expect, 1e-12);
  }
}

TEST(JointWigner, SinglePhotonShape) {
  FockBasis b(6, 6);
  auto rho = pure(fock_state(b, 1, 0));
  for (double r : {0.0, 0.2, 0.5, 0.9}) {
    const cplx al = std::polar(r, 0.3), be(0.1, -0.2);
    const double expect = -(1.0 - 4.0 * r * r) * std::exp(-2.0 * r * r) * std::exp(-2.0 * std::norm(be));
    EXPECT_NEAR(joint_wigner(rho, al, be).value, expect, 1e-12) << r;
  }
}

TEST(JointWigner, PairCoherentProbePoints) {
  // padded-space evaluation with 80 levels per mode
  FockBasis b(14, 14);
  auto rho = pure(pcs_state(2.3, 0, b));
  const std::vector<std::array<double, 3>> probes{{0.5, 0.5, 0.6790655264805082},
                                                  {0.5, -0.5, 0.041743494293690335},
                                                  {1.0, 0.0, 0.01946149422336266},
                                                  {0.3, 0.9, -0.2518837086618527},
                                                  {-0.8, -0.8, 0.48412835672494847},
                                                  {1.2, 1.2, 0.3722081720163648}};
  for (const auto& [x, y, w] : probes) {
    const auto s = joint_wigner(rho, x, y);
    EXPECT_NEAR(s.value, w, 1e-8) << x << "," << y;
    EXPECT_EQ(std::signbit(s.value), std::signbit(w));
  }
}

TEST(JointWigner, DifferentialPhaseInvariance) {
  FockBasis b(14, 14);
  const cplx al(0.3, 0.2), be(-0.4, 0.1);
  for (auto rho : {pure(pcs_state(2.3, 0, b)), pure(pcs_state(1.2, 1, b)), pure(pcs_state(1.0, -2, b))}) {
    const double w0 = joint_wigner(rho, al, be).value;
    for (double phi : {0.4, 1.7, 3.0})
      EXPECT_NEAR(joint_wigner(rho, al * std::polar(1.0, phi), be * std::polar(1.0, -phi)).value, w0, 1e-10);
  }
}

TEST(JointWigner, SuperpositionBreaksDifferentialInvariance) {
  FockBasis b(14, 14);
  const Vec v = (pcs_state(2.0, 0, b).amplitudes() + pcs_state(2.0, 1, b).amplitudes()) / std::sqrt(2.0);
  auto rho = pure(StateVector(b, v).normalized());
  const cplx al(0.3, 0.0), be(0.3, 0.0);
  double lo = 1e9, hi = -1e9;
  for (double phi : phase_grid(24)) {
    const double w = joint_wigner(rho, al * std::polar(1.0, phi), be * std::polar(1.0, -phi)).value;
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  EXPECT_GT(hi - lo, 0.01);
}

TEST(JointWigner, BoundedForRandomStates) {
  std::mt19937 rng(11);
  FockBasis b(4, 4);
  auto cut = PlanarCut{Axis::re_alpha, Axis::re_beta, linear_grid(-1.5, 1.5, 9), linear_grid(-1.5, 1.5, 9)};
  for (int rep = 0; rep < 5; ++rep)
    for (const auto& s : wigner_cut(random_state(b, rng), cut)) EXPECT_LE(std::abs(s.value), 1.0 + 1e-6);
}

TEST(JointWigner, LeakageWarning) {
  FockBasis small(3, 3), big(20, 20);
  auto s = joint_wigner(pure(fock_state(small, 1, 1)), 1.5, 0.0);
  EXPECT_TRUE(s.leakage_warning);
  EXPECT_GT(s.leakage, 0.1);
  auto t = joint_wigner(pure(fock_state(big, 0, 0)), 0.3, 0.3);
  EXPECT_FALSE(t.leakage_warning);
  EXPECT_LT(t.leakage, 1e-12);
}

TEST(JointWigner, ThreeModeStateIsTracedFirst) {
  FockBasis b3(2, 2, 1), b2(2, 2);
  auto s3 = joint_wigner(pure(fock_state(b3, 1, 0, 1)), cplx(0.2, 0.1), 0.3);
  auto s2 = joint_wigner(pure(fock_state(b2, 1, 0)), cplx(0.2, 0.1), 0.3);
  EXPECT_NEAR(s3.value, s2.value, 1e-15);
}

// ---------------------------------------------------------------------------
// wigner_cut

TEST(WignerCut, PlanarLayout) {
  FockBasis b(4, 4);
  auto rho = pure(fock_state(b, 0, 0));
  PlanarCut c{Axis::re_alpha, Axis::im_beta, {-0.5, 0.5}, {0.0, 0.1, 0.2}, cplx(0.0, 0.3), 0.0};
  auto g = wigner_cut(rho, c);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[1].alpha, cplx(-0.5, 0.3));
  EXPECT_EQ(g[1].beta, cplx(0.0, 0.1));
  EXPECT_EQ(g[3].alpha, cplx(0.5, 0.3));
  EXPECT_EQ(g[3].beta, cplx(0.0, 0.0));
}

TEST(WignerCut, AllFourPlanes) {
  FockBasis b(10, 10);
  auto rho = pure(pcs_state(1.2, 0, b));
  const auto ax = linear_grid(-1, 1, 5);
  for (auto [x, y] : {std::pair{Axis::re_alpha, Axis::re_beta}, {Axis::re_alpha, Axis::im_alpha},
                      {Axis::re_alpha, Axis::im_beta}, {Axis::im_alpha, Axis::im_beta}})
    for (const auto& s : wigner_cut(rho, PlanarCut{x, y, ax, ax})) EXPECT_LE(std::abs(s.value), 1.0 + 1e-6);
}

TEST(WignerCut, AngularCutConstantAlongDifferentialDirection) {
  FockBasis b(14, 14);
  auto rho = pure(pcs_state(2.3, 0, b));
  AngularCut c{0.3, 0.3, phase_grid(12), phase_grid(12)};
  auto g = wigner_cut(rho, c);
  // (i, j) and (i + 1, j - 1) share the common phase
  for (int i = 0; i + 1 < 12; ++i)
    for (int j = 1; j < 12; ++j) EXPECT_NEAR(g[i * 12 + j].value, g[(i + 1) * 12 + j - 1].value, 1e-10);
}

TEST(WignerCut, BadSpecs) {
  FockBasis b(2, 2);
  auto rho = pure(fock_state(b, 0, 0));
  EXPECT_THROW(wigner_cut(rho, PlanarCut{Axis::re_alpha, Axis::re_alpha, {0.0}, {0.0}}), DomainError);
  EXPECT_THROW(wigner_cut(rho, PlanarCut{Axis::re_alpha, Axis::re_beta, {}, {0.0}}), DomainError);
  EXPECT_THROW(wigner_cut(rho, AngularCut{0.3, 0.3, {}, {0.0}}), DomainError);
}

// ---------------------------------------------------------------------------
// subspace tomography

TEST(SubspaceProject, Basics) {
  std::mt19937 rng(3);
  FockBasis b(2, 2);
  auto rho = random_state(b, rng);
  EXPECT_EQ(subspace_project(rho, {{1, 2}})(0, 0), rho(b.index(1, 2), b.index(1, 2)));
  std::vector<FockLabel> all;
  for (int na = 0; na <= 2; ++na)
    for (int nb = 0; nb <= 2; ++nb) all.push_back({na, nb});
  EXPECT_EQ((subspace_project(rho, all) - rho.matrix()).norm(), 0.0);
}

TEST(SubspaceProject, PureStateBlockIsRankOne) {
  FockBasis b(14, 14);
  auto blk = subspace_project(pure(pcs_state(2.3, 0, b)), {{1, 1}, {2, 2}});
  EXPECT_NEAR(std::abs(blk(0, 1)), std::sqrt(blk(0, 0).real() * blk(1, 1).real()), 1e-15);
}

TEST(SubspaceProtocol, FlatWithoutCoherence) {
  FockBasis b(4, 4);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1), b.index(1, 1)) = 0.4;
  m(b.index(2, 2), b.index(2, 2)) = 0.6;
  auto sig = simulate_subspace_protocol(DensityMatrix(b, m), pair_spec({1, 1}, {2, 2}));
  EXPECT_LT(oscillation(sig), 1e-12);
  EXPECT_EQ(sig.harmonic, 2);
  EXPECT_EQ(sig.sweep, PhaseSweep::common);
}

TEST(SubspaceProtocol, MatchesDisplacedReferenceState) {
  // direct evaluation on D(alpha, beta)(sqrt(p11)|11> + e^{i theta} sqrt(p22)|22>) in a large basis
  const double p11 = 0.27, p22 = 0.36, theta = -0.84;
  const int lv = 31;
  Mat psi = Mat::Zero(lv, lv);  // amplitudes indexed [na][nb]
  psi(1, 1) = std::sqrt(p11);
  psi(2, 2) = std::polar(std::sqrt(p22), theta);
  FockBasis b(3, 3);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1), b.index(1, 1)) = p11;
  m(b.index(2, 2), b.index(2, 2)) = p22;
  m(b.index(1, 1), b.index(2, 2)) = std::polar(std::sqrt(p11 * p22), -theta);
  m(b.index(2, 2), b.index(1, 1)) = std::polar(std::sqrt(p11 * p22), theta);
  DensityMatrix rho(b, m);

  auto spec = pair_spec({1, 1}, {2, 2});
  for (Readout ro : {Readout{ReadoutKind::parity, {0, 0}}, Readout{ReadoutKind::fock, {1, 1}},
                     Readout{ReadoutKind::fock, {1, 2}}}) {
    spec.readout = ro;
    auto sig = simulate_subspace_protocol(rho, spec);
    for (std::size_t k = 0; k < spec.phases.size(); k += 3) {
      const double phi = spec.phases[k];
      const Mat w = single_mode_displacement(lv, std::polar(spec.amp_alpha, phi)) * psi *
                    single_mode_displacement(lv, std::polar(spec.amp_beta, phi)).transpose();
      double direct = 0.0;
      if (ro.kind == ReadoutKind::fock) {
        direct = std::norm(w(ro.label[0], ro.label[1]));
      } else {
        for (int na = 0; na < lv; ++na)
          for (int nb = 0; nb < lv; ++nb)
            if ((na + nb) % 2 == 0) direct += std::norm(w(na, nb));
      }
      EXPECT_NEAR(sig.values[k], direct, 1e-12) << k;
    }
  }
}

TEST(SubspaceProtocol, IsolatedFromRestOfState) {
  std::mt19937 rng(5);
  FockBasis b(4, 4);
  auto spec = pair_spec({0, 1}, {2, 2});
  spec.readout = {ReadoutKind::fock, {1, 1}};
  const int i1 = b.index(0, 1), i2 = b.index(2, 2);
  for (int rep = 0; rep < 10; ++rep) {
    auto rho = random_state(b, rng);
    auto other = random_state(b, rng);
    Mat m = other.matrix();
    m(i1, i1) = rho(i1, i1);
    m(i2, i2) = rho(i2, i2);
    m(i1, i2) = rho(i1, i2);
    m(i2, i1) = rho(i2, i1);
    auto s1 = simulate_subspace_protocol(rho, spec);
    auto s2 = simulate_subspace_protocol(DensityMatrix(b, m), spec);
    for (std::size_t k = 0; k < s1.values.size(); ++k) EXPECT_EQ(s1.values[k], s2.values[k]);
  }
}

TEST(SubspaceProtocol, Rejections) {
  FockBasis b(3, 3);
  auto rho = pure(fock_state(b, 1, 1));
  SubspaceSpec three;
  three.labels = {{0, 0}, {1, 1}, {2, 2}};
  EXPECT_THROW(simulate_subspace_protocol(rho, three), DomainError);
  auto few = pair_spec({0, 0}, {1, 1});
  few.phases = phase_grid(6);
  EXPECT_THROW(simulate_subspace_protocol(rho, few), DomainError);
  EXPECT_THROW(simulate_subspace_protocol(rho, pair_spec({0, 0}, {0, 0})), DomainError);
  EXPECT_THROW(simulate_subspace_protocol(rho, pair_spec({0, 0}, {4, 4})), DomainError);
}

TEST(SubspaceProtocol, SweepSelection) {
  EXPECT_EQ(resolve_sweep(pair_spec({1, 1}, {2, 2})), PhaseSweep::common);
  EXPECT_EQ(protocol_harmonic(pair_spec({1, 1}, {2, 2})), 2);
  EXPECT_EQ(resolve_sweep(pair_spec({1, 1}, {2, 0})), PhaseSweep::differential);
  EXPECT_EQ(protocol_harmonic(pair_spec({1, 1}, {2, 0})), 2);
  auto forced = pair_spec({1, 1}, {2, 0});
  forced.sweep = PhaseSweep::common;
  EXPECT_EQ(protocol_harmonic(forced), 0);
}

TEST(FitCoherence, MeasuredCoherenceValue) {
  const double p11 = 0.2770703568147433, p22 = 0.3664255468874979;
  const cplx target = 0.63 * std::polar(std::sqrt(p11 * p22), 0.84);
  FockBasis b(3, 3);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1), b.index(1, 1)) = p11;
  m(b.index(2, 2), b.index(2, 2)) = p22;
  m(b.index(0, 0), b.index(0, 0)) = 1.0 - p11 - p22;
  m(b.index(1, 1), b.index(2, 2)) = target;
  m(b.index(2, 2), b.index(1, 1)) = std::conj(target);
  DensityMatrix rho(b, m);
  auto spec = pair_spec({1, 1}, {2, 2});
  auto e = fit_coherence(simulate_subspace_protocol(rho, spec), p11, p22, spec);
  const cplx rel = e.value / std::sqrt(p11 * p22);
  EXPECT_NEAR(std::abs(rel), 0.63, 1e-3);
  EXPECT_NEAR(std::arg(rel), 0.84, 1e-3);
  EXPECT_LT(std::abs(e.value - target), 1e-12);
  EXPECT_LT(e.amp_err, 1e-12);
  EXPECT_FALSE(e.consistent_with_zero);
  EXPECT_EQ(e.bra, (FockLabel{1, 1}));
  EXPECT_EQ(e.ket, (FockLabel{2, 2}));
}

TEST(FitCoherence, ZeroCoherence) {
  FockBasis b(3, 3);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(0, 0), b.index(0, 0)) = 0.5;
  m(b.index(1, 1), b.index(1, 1)) = 0.5;
  auto spec = pair_spec({0, 0}, {1, 1});
  auto e = fit_coherence(simulate_subspace_protocol(DensityMatrix(b, m), spec), 0.5, 0.5, spec);
  EXPECT_LT(std::abs(e.value), 1e-12);
  EXPECT_TRUE(e.consistent_with_zero);
}

TEST(FitCoherence, EmptySideCalibratesOnEqualWeights) {
  FockBasis b(3, 3);
  auto rho = pure(fock_state(b, 1, 1));
  auto spec = pair_spec({1, 1}, {2, 2});
  auto e = fit_coherence(simulate_subspace_protocol(rho, spec), 1.0, 0.0, spec);
  EXPECT_LT(std::abs(e.value), 1e-12);
}

TEST(FitCoherence, RandomRoundTrip) {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> lab(0, 4);
  std::uniform_real_distribution<double> amp(0.1, 0.5);
  FockBasis b(4, 4);
  double worst = 0.0;
  int done = 0;
  while (done < 100) {
    FockLabel s1{lab(rng), lab(rng)}, s2{lab(rng), lab(rng)};
    if (s1 == s2) continue;
    auto spec = pair_spec(s1, s2);
    spec.phases = phase_grid(std::max(16, 2 * std::abs(protocol_harmonic(spec)) + 2));
    spec.amp_alpha = amp(rng);
    spec.amp_beta = amp(rng);
    if (rng() % 2) spec.readout = {ReadoutKind::fock, rng() % 2 ? s1 : s2};
    auto rho = random_state(b, rng);
    auto blk = subspace_project(rho, spec.labels);
    auto e = fit_coherence(simulate_subspace_protocol(rho, spec), blk(0, 0).real(), blk(1, 1).real(), spec);
    worst = std::max(worst, std::abs(e.value - blk(0, 1)));
    ++done;
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(FitCoherence, NoisySignalReportsUncertainty) {
  FockBasis b(3, 3);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1), b.index(1, 1)) = 0.5;
  m(b.index(2, 2), b.index(2, 2)) = 0.5;
  m(b.index(1, 1), b.index(2, 2)) = std::polar(0.3, 0.5);
  m(b.index(2, 2), b.index(1, 1)) = std::polar(0.3, -0.5);
  auto spec = pair_spec({1, 1}, {2, 2});
  spec.phases = phase_grid(64);
  auto sig = simulate_subspace_protocol(DensityMatrix(b, m), spec);
  std::mt19937 rng(9);
  std::normal_distribution<double> n(0.0, 1e-4);
  for (auto& v : sig.values) v += n(rng);
  auto e = fit_coherence(sig, 0.5, 0.5, spec);
  EXPECT_GT(e.amp_err, 0.0);
  EXPECT_LT(std::abs(e.value - std::polar(0.3, 0.5)), 6.0 * e.amp_err);
  EXPECT_GT(e.phase_err, 0.0);
  EXPECT_LT(e.phase_err, 0.1);
}

TEST(FitCoherence, NoVisibility) {
  FockBasis b(3, 3);
  auto spec = pair_spec({1, 1}, {2, 2});
  spec.amp_alpha = spec.amp_beta = 0.0;
  auto sig = simulate_subspace_protocol(pure(fock_state(b, 1, 1)), spec);
  EXPECT_THROW(fit_coherence(sig, 0.5, 0.5, spec), NumericalError);
}

TEST(Preflight, StaysInRangeAndImprovesVisibility) {
  auto spec = pair_spec({1, 1}, {2, 2});
  spec.amp_alpha = spec.amp_beta = 0.05;
  auto res = preflight_amplitudes(spec, {Readout{ReadoutKind::parity, {0, 0}}, Readout{ReadoutKind::fock, {1, 1}},
                                         Readout{ReadoutKind::fock, {2, 2}}});
  EXPECT_LE(res.spec.amp_alpha, 0.5);
  EXPECT_LE(res.spec.amp_beta, 0.5);
  EXPECT_GT(res.spec.amp_alpha, 0.0);

  Mat ref(2, 2);
  ref << 0.5, 0.5, 0.5, 0.5;
  FockBasis b(3, 3);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1), b.index(1, 1)) = m(b.index(2, 2), b.index(2, 2)) = 0.5;
  m(b.index(1, 1), b.index(2, 2)) = m(b.index(2, 2), b.index(1, 1)) = 0.5;
  const double before = oscillation(simulate_subspace_protocol(DensityMatrix(b, m), spec));
  const double after = oscillation(simulate_subspace_protocol(DensityMatrix(b, m), res.spec));
  EXPECT_GT(after, before);
  EXPECT_NEAR(after, res.visibility * 2.0, 0.05 * after);  // peak-to-peak is twice the amplitude
}

// ---------------------------------------------------------------------------
// phase ledger

TEST(PhaseLedger, MatchedLoopCancelsResidual) {
  auto p = device_params();
  PhaseLedger l;
  l.t_w = us(4.5);
  for (int j = 0; j < 4; ++j) {
    const int k = j + 1;
    l.omega_3 = l.omega_4 = 0.5 * matched_displacement_sum(p, j, k);
    auto ph = phase_ledger_evaluate(l, p, j, k);
    EXPECT_LT(std::abs(ph.residual), 1e-15 * p.chi_qb * l.t_total());
  }
  p.chi_override[{2, 2}] = mhz(16.3);
  l.omega_3 = matched_displacement_sum(p, 1, 2);
  l.omega_4 = 0.0;
  EXPECT_LT(std::abs(phase_ledger_evaluate(l, p, 1, 2).residual), 1e-15 * p.chi_qb * l.t_total());
}

TEST(PhaseLedger, LinearTermArithmetic) {
  PhaseLedger l;
  l.t_w = us(6.5) - l.dt_q - l.dt_d;
  EXPECT_NEAR(l.t_total(), us(6.5), 1e-18);
  EXPECT_NEAR(phase_ledger_evaluate(l, device_params(KerrSet::pumped), 1, 2).linear, 10.128494715173492, 1e-12);
  EXPECT_NEAR(phase_ledger_evaluate(l, device_params(KerrSet::plain), 1, 2).linear, 9.107477102756809, 1e-12);
}

TEST(PhaseLedger, UnmatchedResidual) {
  auto p = device_params();
  PhaseLedger l;
  l.omega_3 = l.omega_4 = 0.0;
  auto ph = phase_ledger_evaluate(l, p, 1, 2);
  EXPECT_NEAR(ph.residual, (p.chi(2, 2) - p.chi(1, 1)) * l.t_total(), 1e-9);
}

TEST(PhaseLedger, SlopeFanOut) {
  auto p = device_params();
  std::vector<double> slopes;
  for (int j = 0; j < 4; ++j) {
    PhaseLedger l0, l1;
    l1.t_w = us(1.0);
    slopes.push_back((phase_ledger_evaluate(l1, p, j, j + 1).linear - phase_ledger_evaluate(l0, p, j, j + 1).linear) /
                     us(1.0));
  }
  const std::vector<double> expect{53, 248, 443, 638};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(to_khz(slopes[j]), expect[j], 1e-6);
  for (int j = 0; j + 1 < 4; ++j) EXPECT_LT(slopes[j], slopes[j + 1]);
}

TEST(PhaseLedger, EigenfrequenciesMatchKerrHamiltonian) {
  auto p = device_params(KerrSet::plain);
  FockBasis b(5, 5);
  auto h = build_storage_hamiltonian(b, p, DerivedRates{}, false);
  // the ledger's normal-ordered Kerr differs from the n^2 form by a linear frame shift
  const double shift = -0.5 * (p.K_aa + p.K_bb);
  for (int j = 0; j <= 5; ++j) {
    EXPECT_NEAR(h(b.index(j, j), b.index(j, j)).real(), omega_jj_g(p, shift, j), 1e-6);
    EXPECT_NEAR(omega_jj_e(p, 0.0, j), omega_jj_g(p, 0.0, j) - j * (p.chi_qa + p.chi_qb), 1e-6);
  }
}

TEST(PhaseLedger, ClosedLoopResidual) {
  PhaseLedger l;
  l.omega_p = 3.0;
  l.omega_d = 4.0;
  l.omega_1 = 2.0;
  l.omega_2 = 1.0;
  l.omega_3 = 4.0;
  l.omega_4 = 2.0;
  EXPECT_EQ(l.closed_loop_residual(), 0.0);
  l.omega_4 = 2.5;
  EXPECT_EQ(l.closed_loop_residual(), 0.5);
  EXPECT_THROW(phase_ledger_evaluate(l, device_params(), 1, 1), DomainError);
}
