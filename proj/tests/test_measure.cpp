#include <gtest/gtest.h>

#include <numeric>

#include "pcs/lindblad.hpp"
#include "pcs/measure.hpp"

using namespace pcs;
using namespace pcs::units;

namespace {

DensityMatrix pure(const StateVector& s) { return DensityMatrix::pure(s); }

DensityMatrix mixture(const DensityMatrix& x, const DensityMatrix& y, double w) {
  return {x.basis(), w * x.matrix() + (1.0 - w) * y.matrix()};
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  return g;
}

}  // namespace

TEST(PhotonPopulation, Vacuum) {
  FockBasis b(3, 3);
  EXPECT_EQ(photon_population(pure(fock_state(b, 0, 0)), 0, 0), 1.0);
}

TEST(PhotonPopulation, PairCoherentSupport) {
  FockBasis b(14, 14);
  auto rho = pure(pcs_state(2.3, 0, b));
  EXPECT_EQ(photon_population(rho, 1, 0), 0.0);
  EXPECT_NEAR(photon_population(rho, 2, 2), 0.3664255468874979, 1e-12);
  EXPECT_NEAR(photon_population(rho, 1, 1), 0.2770703568147433, 1e-12);
}

TEST(PhotonPopulation, ThreeModeSumsReservoir) {
  FockBasis b(2, 2, 2);
  Mat m = Mat::Zero(b.dim(), b.dim());
  m(b.index(1, 1, 0), b.index(1, 1, 0)) = 0.25;
  m(b.index(1, 1, 2), b.index(1, 1, 2)) = 0.5;
  m(b.index(0, 0, 1), b.index(0, 0, 1)) = 0.25;
  DensityMatrix rho(b, m);
  EXPECT_DOUBLE_EQ(photon_population(rho, 1, 1), 0.75);
  EXPECT_DOUBLE_EQ(photon_population(rho, 0, 0), 0.25);
}

TEST(PhotonPopulation, OutOfBasis) {
  FockBasis b(2, 2);
  auto rho = pure(fock_state(b, 0, 0));
  EXPECT_THROW(photon_population(rho, 3, 0), DomainError);
  EXPECT_THROW(photon_population(rho, 0, -1), DomainError);
}

TEST(PhotonPopulation, ClipsRoundoff) {
  FockBasis b(1, 1);
  Mat m = Mat::Zero(4, 4);
  m(0, 0) = 1.0 + 1e-15;
  m(1, 1) = -1e-16;
  DensityMatrix rho(b, m);
  EXPECT_EQ(photon_population(rho, 0, 0), 1.0);
  EXPECT_EQ(photon_population(rho, 0, 1), 0.0);
}

TEST(Spectroscopy, VacuumPeak) {
  FockBasis b(3, 3);
  auto spec = spectroscopy_spec(device_params(), grid(-mhz(1), mhz(1), 201), khz(100));
  auto s = spectroscopy_signal(pure(fock_state(b, 0, 0)), spec);
  const auto it = std::max_element(s.begin(), s.end());
  EXPECT_NEAR(*it, 1.0, 1e-15);
  EXPECT_NEAR(spec.detunings[it - s.begin()], 0.0, 1e-6);
}

TEST(Spectroscopy, SinglePairPeak) {
  FockBasis b(3, 3);
  auto p = device_params();
  const double center = -(p.chi_qa + p.chi_qb);
  std::vector<double> g{center - khz(50), center, center + khz(50)};
  auto s = spectroscopy_signal(pure(fock_state(b, 1, 1)), spectroscopy_spec(p, g, khz(100)));
  EXPECT_NEAR(s[1], 1.0, 1e-15);
  EXPECT_NEAR(s[0], s[2], 1e-14);
  EXPECT_LT(s[0], 1.0);
}

TEST(Spectroscopy, CombHeightsAreSeparatedPopulations) {
  FockBasis b(14, 14);
  auto p = device_params();
  auto rho = pure(pcs_state(2.3, 0, b));
  std::vector<double> centers;
  for (int n = 0; n <= 8; ++n) centers.push_back(-n * (p.chi_qa + p.chi_qb));
  std::sort(centers.begin(), centers.end());
  // sigma far below the 8.15 MHz comb spacing; every other Fock state carries no population
  auto s = spectroscopy_signal(rho, spectroscopy_spec(p, centers, khz(200)));
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const int n = static_cast<int>(centers.size() - 1 - k);
    EXPECT_NEAR(s[k], photon_population(rho, n, n), 1e-9) << n;
  }
}

TEST(Spectroscopy, OverrideTable) {
  FockBasis b(2, 2);
  auto p = device_params();
  p.chi_override[{1, 1}] = mhz(8.0);
  auto s = spectroscopy_signal(pure(fock_state(b, 1, 1)), spectroscopy_spec(p, {-mhz(8.0)}, khz(10)));
  EXPECT_NEAR(s[0], 1.0, 1e-15);
}

TEST(Spectroscopy, BadSpec) {
  FockBasis b(1, 1);
  auto rho = pure(fock_state(b, 0, 0));
  EXPECT_THROW(spectroscopy_signal(rho, spectroscopy_spec(device_params(), {0.0}, 0.0)), DomainError);
  EXPECT_THROW(spectroscopy_signal(rho, spectroscopy_spec(device_params(), {1.0, 0.0}, 1.0)), DomainError);
}

TEST(Pnd, PairCoherentZeroSector) {
  FockBasis b(12, 12);
  auto rho = pure(pcs_state(2.3, 0, b));
  EXPECT_NEAR(pnd_probability(rho, 0, 12), 1.0, 1e-12);
  EXPECT_EQ(pnd_probability(rho, 1, 12), 0.0);
  EXPECT_LT(pnd_probability(rho, 0, 4), 1.0);
  EXPECT_THROW(pnd_probability(rho, 0, 13), DomainError);
}

TEST(Pnd, FullTruncationMatchesHistogram) {
  FockBasis b(5, 5);
  auto rho = mixture(pure(pcs_state(0.9, 1, b, 1e-3)), pure(pcs_state(0.7, -2, b, 1e-3)), 0.3);
  auto h = delta_distribution(rho);
  const double tr = rho.trace();
  for (int d = -5; d <= 5; ++d) EXPECT_NEAR(pnd_probability(rho, d, 5) / tr, h[d], 1e-15) << d;
}

TEST(DeltaDistribution, Eigenstate) {
  FockBasis b(10, 10);
  auto h = delta_distribution(pure(pcs_state(1.25, 2, b)));
  EXPECT_NEAR(h[2], 1.0, 1e-12);
  const double rest = std::accumulate(h.begin(), h.end(), 0.0, [](double a, auto& kv) { return a + kv.second; }) - h[2];
  EXPECT_LT(rest, 1e-15);
}

TEST(DeltaDistribution, EqualMixture) {
  FockBasis b(10, 10);
  auto rho = mixture(pure(pcs_state(1.25, 0, b)), pure(pcs_state(1.25, 1, b)), 0.5);
  auto h = delta_distribution(rho);
  EXPECT_NEAR(h[0], 0.5, 1e-10);
  EXPECT_NEAR(h[1], 0.5, 1e-10);
}

TEST(DeltaDistribution, SumsToOneForRandomState) {
  FockBasis b(4, 3);
  std::srand(7);
  Mat a = Mat::Random(b.dim(), b.dim());
  Mat m = a * a.adjoint();
  m /= m.trace();
  auto h = delta_distribution(DensityMatrix(b, m));
  double s = 0.0;
  for (auto& [d, p] : h) s += p;
  EXPECT_NEAR(s, 1.0, 1e-10);
  EXPECT_EQ(h.begin()->first, -3);
  EXPECT_EQ(h.rbegin()->first, 4);
}

TEST(DeltaDistribution, ThreeModeInput) {
  FockBasis b(2, 2, 1);
  auto rho = pure(fock_state(b, 2, 1, 1));
  auto h = delta_distribution(rho);
  EXPECT_NEAR(h[1], 1.0, 1e-15);
}

TEST(Degeneracy, DeviceShifts) {
  auto spec = spectroscopy_spec(device_params(), {}, 1.0);
  auto rep = degeneracy_report(spec, 6, mhz(1.0));
  EXPECT_NEAR(to_hz(rep.min_gap) / 1e6, 0.59, 1e-9);
  EXPECT_EQ(rep.delta_separation, 4);
  // within 1 MHz the only confusable lines sit 4 units of delta apart
  EXPECT_EQ(rep.closest_confusable_delta, 4);
  EXPECT_EQ(degeneracy_report(spec, 6, mhz(0.5)).closest_confusable_delta, 0);
}

TEST(Degeneracy, ExactCommensurability) {
  SpectroscopySpec spec;
  spec.sigma = 1;
  spec.chi_a = 1.0;
  spec.chi_b = 3.0;
  auto rep = degeneracy_report(spec, 3, 1e-9);
  EXPECT_EQ(rep.min_gap, 0.0);
  EXPECT_EQ(rep.closest_confusable_delta, 4);
}
