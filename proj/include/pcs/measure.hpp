#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/hilbert.hpp"
#include "pcs/model.hpp"

namespace pcs {

namespace detail {

inline DensityMatrix storage_view(const DensityMatrix& rho) {
  return rho.basis().modes() == 2 ? rho : partial_trace_reservoir(rho);
}

}  // namespace detail

/// Ideal number-selective readout of |na, nb>. Three-mode states are summed over the reservoir.
inline double photon_population(const DensityMatrix& rho, int na, int nb) {
  const FockBasis& b = rho.basis();
  if (!b.contains(na, nb))
    throw DomainError("photon_population: (" + std::to_string(na) + "," + std::to_string(nb) + ") outside " +
                      b.describe());
  double p = 0.0;
  if (b.modes() == 2) {
    const int i = b.index(na, nb);
    p = rho(i, i).real();
  } else {
    for (int r = 0; r <= b.cutoff(Mode::r); ++r) {
      const int i = b.index(na, nb, r);
      p += rho(i, i).real();
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

struct SpectroscopySpec {
  std::vector<double> detunings;  // rad/s, sorted
  double sigma = 0;               // Gaussian linewidth, rad/s
  double chi_a = 0, chi_b = 0;    // rad/s per photon
  std::map<std::pair<int, int>, double> chi_override;

  double shift(int na, int nb) const {
    if (auto it = chi_override.find({na, nb}); it != chi_override.end()) return it->second;
    return na * chi_a + nb * chi_b;
  }

  void validate() const {
    if (!(sigma > 0)) throw DomainError("spectroscopy linewidth must be positive");
    if (!std::is_sorted(detunings.begin(), detunings.end()))
      throw DomainError("spectroscopy detuning grid must be sorted");
  }
};

inline SpectroscopySpec spectroscopy_spec(const SystemParams& p, std::vector<double> detunings, double sigma) {
  SpectroscopySpec s;
  s.detunings = std::move(detunings);
  s.sigma = sigma;
  s.chi_a = p.chi_qa;
  s.chi_b = p.chi_qb;
  s.chi_override = p.chi_override;
  return s;
}

/// Gaussian comb with one line per Fock state at -(shift), weighted by its population.
inline std::vector<double> spectroscopy_signal(const DensityMatrix& rho, const SpectroscopySpec& spec) {
  spec.validate();
  const DensityMatrix st = detail::storage_view(rho);
  const FockBasis& b = st.basis();
  std::vector<double> out(spec.detunings.size(), 0.0);
  const double inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
  for (int na = 0; na <= b.cutoff(Mode::a); ++na)
    for (int nb = 0; nb <= b.cutoff(Mode::b); ++nb) {
      const double p = photon_population(st, na, nb);
      if (p == 0.0) continue;
      const double center = -spec.shift(na, nb);
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = spec.detunings[k] - center;
        out[k] += p * std::exp(-x * x * inv);
      }
    }
  return out;
}

/// Probability that an ideal comb of selective pulses reports photon-number difference `delta`,
/// counting only Fock states with both occupations at most `truncation`.
inline double pnd_probability(const DensityMatrix& rho, int delta, int truncation) {
  const DensityMatrix st = detail::storage_view(rho);
  const FockBasis& b = st.basis();
  if (truncation < 0 || truncation > std::min(b.cutoff(Mode::a), b.cutoff(Mode::b)))
    throw DomainError("pnd_probability: truncation exceeds basis cutoff");
  double p = 0.0;
  for (int nb = 0; nb <= truncation; ++nb) {
    const int na = nb + delta;
    if (na < 0 || na > truncation) continue;
    p += st(b.index(na, nb), b.index(na, nb)).real();
  }
  return p;
}

/// Full histogram over delta = na - nb.
inline std::map<int, double> delta_distribution(const DensityMatrix& rho) {
  const DensityMatrix st = detail::storage_view(rho);
  const FockBasis& b = st.basis();
  std::map<int, double> out;
  for (int na = 0; na <= b.cutoff(Mode::a); ++na)
    for (int nb = 0; nb <= b.cutoff(Mode::b); ++nb) out[na - nb] += st(b.index(na, nb), b.index(na, nb)).real();
  const double total = st.trace();
  if (std::abs(total) < 1e-300) throw DomainError("delta_distribution: state has zero trace");
  for (auto& [d, p] : out) p /= total;
  return out;
}

/// Closest pair of comb lines belonging to different delta sectors.
struct DegeneracyReport {
  double min_gap = 0;  // rad/s
  std::array<int, 2> state_1{}, state_2{};
  int delta_separation = 0;
  /// Smallest |delta_1 - delta_2| over all pairs closer than the resolution; 0 if none.
  int closest_confusable_delta = 0;
};

inline DegeneracyReport degeneracy_report(const SpectroscopySpec& spec, int truncation, double resolution) {
  if (truncation < 1) throw DomainError("degeneracy_report: truncation must be at least 1");
  struct Line {
    int na, nb;
    double f;
  };
  std::vector<Line> lines;
  for (int na = 0; na <= truncation; ++na)
    for (int nb = 0; nb <= truncation; ++nb) lines.push_back({na, nb, spec.shift(na, nb)});
  DegeneracyReport rep;
  rep.min_gap = INFINITY;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const int dd = std::abs((lines[i].na - lines[i].nb) - (lines[j].na - lines[j].nb));
      if (dd == 0) continue;
      const double gap = std::abs(lines[i].f - lines[j].f);
      if (gap < rep.min_gap) {
        rep.min_gap = gap;
        rep.state_1 = {lines[i].na, lines[i].nb};
        rep.state_2 = {lines[j].na, lines[j].nb};
        rep.delta_separation = dd;
      }
      if (gap < resolution && (rep.closest_confusable_delta == 0 || dd < rep.closest_confusable_delta))
        rep.closest_confusable_delta = dd;
    }
  return rep;
}

}  // namespace pcs
