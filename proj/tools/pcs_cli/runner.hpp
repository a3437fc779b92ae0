#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pcs/lindblad.hpp"
#include "pcs/measure.hpp"
#include "pcs/recon.hpp"
#include "pcs/tomo.hpp"
#include "pcs_cli/config.hpp"

namespace pcs::cli {

// ---------------------------------------------------------------------------
// Writers

/// Comma-separated table; numbers in shortest round-trip form.
class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (const auto& h : header) cell(h);
    end();
  }

  Csv& cell(const std::string& s) {
    line_ += (line_.empty() ? "" : ",") + s;
    return *this;
  }
  Csv& cell(double v) { return cell(fmt(v)); }
  Csv& cell(int v) { return cell(std::to_string(v)); }
  void end() {
    text_ += line_ + "\n";
    line_.clear();
    ++rows_;
  }
  std::size_t rows() const { return rows_ - 1; }
  const std::string& text() const { return text_; }

 private:
  std::string line_, text_;
  std::size_t rows_ = 0;
};

inline nlohmann::json complex_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

/// Basis metadata plus row-major [re, im] entries.
inline nlohmann::json density_json(const DensityMatrix& rho) {
  const auto& b = rho.basis();
  nlohmann::json cut = nlohmann::json::array();
  for (int m = 0; m < b.modes(); ++m) cut.push_back(b.cutoff(static_cast<Mode>(m)));
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < b.dim(); ++i)
    for (int j = 0; j < b.dim(); ++j) entries.push_back(complex_json(rho(i, j)));
  return {{"basis", {{"modes", b.modes()}, {"cutoffs", cut}, {"dim", b.dim()}}}, {"entries", entries}};
}

inline DensityMatrix density_from_json(const nlohmann::json& j) {
  const auto& cut = j.at("basis").at("cutoffs");
  const FockBasis b = cut.size() == 3 ? FockBasis(cut[0], cut[1], cut[2]) : FockBasis(cut.at(0), cut.at(1));
  const auto& e = j.at("entries");
  if (static_cast<int>(e.size()) != b.dim() * b.dim()) throw DomainError("density JSON: wrong entry count");
  Mat m(b.dim(), b.dim());
  for (int i = 0; i < b.dim(); ++i)
    for (int k = 0; k < b.dim(); ++k) m(i, k) = cplx(e[i * b.dim() + k][0], e[i * b.dim() + k][1]);
  return {b, m};
}

// ---------------------------------------------------------------------------
// Model assembly

inline DerivedRates scenario_rates(const Config& c, const Scenario& s) {
  const SystemParams p = s.system.params();
  DerivedRates r;
  if (c.drive && p.kappa_r > 0) {
    r = derive_rates(p, c.drive->drive());
  } else {
    r.K_eff = effective_kerr(p);
  }
  using units::hz;
  if (s.rates.eps_ab) r.eps_ab = hz(1.0) * *s.rates.eps_ab;
  if (s.rates.eps_ab_magnitude) r.set_eps_ab_magnitude(hz(*s.rates.eps_ab_magnitude));
  if (s.rates.kappa_ab) r.set_kappa_ab(hz(*s.rates.kappa_ab));
  if (s.rates.K_eff) r.K_eff = hz(*s.rates.K_eff);
  return r;
}

inline FockBasis scenario_basis(const Scenario& s) {
  const auto& c = s.model.cutoffs;
  return c.size() == 3 ? FockBasis(c[0], c[1], c[2]) : FockBasis(c[0], c[1]);
}

inline OpenSystemModel segment_model(const Config& c, const Scenario& s, const DerivedRates& rates, bool pump) {
  const SystemParams p = s.system.params();
  const FockBasis basis = scenario_basis(s);
  if (s.model.kind == ModelKind::full) {
    if (!c.drive) throw DomainError("the full model needs a drive section");
    DriveConfig d = c.drive->drive();
    DerivedRates r = rates;
    if (!pump) {
      d.eps_d = 0.0;
      r.g_ab = 0.0;
    }
    return build_full_model(p, d, r, basis);
  }
  ReducedModelOptions o;
  o.include_drive = pump;
  o.include_dephasing = s.model.dephasing && pump;
  o.include_single_photon_loss = s.model.single_photon_loss;
  o.kerr = s.model.kerr == "effective" ? KerrForm::effective : KerrForm::separate;
  DerivedRates r = rates;
  if (!pump) {
    r.pair_jump = 0.0;
    r.zeta_a = r.zeta_b = 0.0;
  }
  return build_reduced_model(p, r, basis, o);
}

inline StateVector initial_state(const InitialState& init, const FockBasis& basis) {
  const FockBasis b2 = basis.modes() == 3 ? basis.storage() : basis;
  Vec v = Vec::Zero(b2.dim());
  for (const auto& comp : init.components) {
    if (comp.kind == "fock") {
      if (!b2.contains(comp.fock[0], comp.fock[1])) throw DomainError("initial Fock state outside the basis");
      v += comp.weight * fock_state(b2, comp.fock[0], comp.fock[1]).amplitudes();
    } else {
      v += comp.weight * pcs_state(comp.gamma, comp.delta, b2, 1e-4).amplitudes();
    }
  }
  StateVector s2 = StateVector(b2, v).normalized();
  if (basis.modes() == 2) return s2;
  Vec v3 = Vec::Zero(basis.dim());
  for (int i = 0; i < b2.dim(); ++i) {
    const auto n = b2.labels(i);
    v3(basis.index(n[0], n[1], 0)) = s2.amplitudes()(i);
  }
  return {basis, v3};
}

inline DensityMatrix storage_state(const DensityMatrix& rho) {
  return rho.basis().modes() == 3 ? partial_trace_reservoir(rho) : rho;
}

// ---------------------------------------------------------------------------
// Execution

struct Sample {
  double t_us;  ///< infinity for a steady-state segment
  DensityMatrix rho;  ///< storage modes only
};

struct Run {
  std::string label;
  std::vector<Sample> samples;
};

/// Evolves every initial state through the schedule, keeping the storage state at each record time.
inline std::vector<Run> simulate(const Config& c, const Scenario& s, std::ostream* log = nullptr) {
  const DerivedRates rates = scenario_rates(c, s);
  const OpenSystemModel on = segment_model(c, s, rates, true);
  const OpenSystemModel off = segment_model(c, s, rates, false);
  std::vector<Run> runs;
  for (const auto& init : s.initial) {
    Run run{init.label, {}};
    DensityMatrix rho = DensityMatrix::pure(initial_state(init, on.basis()));
    double t = 0.0;
    run.samples.push_back({0.0, storage_state(rho)});
    for (const auto& seg : s.schedule) {
      const OpenSystemModel& model = seg.pump ? on : off;
      if (seg.steady) {
        SteadyStateOptions so;
        so.max_direct_dim = 400;
        rho = steady_state(model, rho, so);
        t = std::numeric_limits<double>::infinity();
        run.samples.push_back({t, storage_state(rho)});
        continue;
      }
      const auto times = uniform_times(seg.duration, seg.samples);
      double prev = 0.0;
      for (std::size_t k = 1; k < times.size(); ++k) {
        rho = evolve_state(model, rho, units::us(times[k] - prev));
        prev = times[k];
        run.samples.push_back({t + times[k], storage_state(rho)});
      }
      t += seg.duration;
    }
    if (log) *log << s.name << (init.label.empty() ? "" : " [" + init.label + "]") << ": simulated\n";
    runs.push_back(std::move(run));
  }
  return runs;
}

struct Artifact {
  std::string output, type, file;
  std::string content;
  nlohmann::json info = nlohmann::json::object();
};

namespace detail {

inline std::string label_text(const Label& l) { return std::to_string(l[0]) + "_" + std::to_string(l[1]); }

inline bool labelled(const std::vector<Run>& runs) { return runs.size() > 1 || !runs.front().label.empty(); }

inline std::vector<std::string> with_run(bool on, std::vector<std::string> cols) {
  if (on) cols.insert(cols.begin(), "run");
  return cols;
}

inline std::string suffixed(const std::string& name, const Run& run, bool labelled) {
  return labelled ? name + "_" + run.label : name;
}

inline SubspaceSpec subspace_spec(const SubspaceOut& o, const std::pair<Label, Label>& pair) {
  SubspaceSpec spec;
  spec.labels = {pair.first, pair.second};
  spec.amp_alpha = o.amp_alpha;
  spec.amp_beta = o.amp_beta;
  spec.readout.kind = o.readout == "fock" ? ReadoutKind::fock : ReadoutKind::parity;
  const int h = std::max(protocol_harmonic(spec), -protocol_harmonic(spec));
  spec.phases = phase_grid(std::max({o.phases, 2 * h + 1, 8}));
  return spec;
}

inline Axis axis_of(const std::string& s) {
  if (s == "re_alpha") return Axis::re_alpha;
  if (s == "im_alpha") return Axis::im_alpha;
  if (s == "re_beta") return Axis::re_beta;
  return Axis::im_beta;
}

}  // namespace detail

/// Renders every output of the scenario from simulated runs. Pure: no files are touched.
inline std::vector<Artifact> render_outputs(const Config& c, const Scenario& s, const std::vector<Run>& runs) {
  using detail::labelled;
  using detail::with_run;
  const SystemParams p = s.system.params();
  const DerivedRates rates = scenario_rates(c, s);
  const bool lab = labelled(runs);
  std::vector<Artifact> out;

  for (const auto& o : s.outputs) {
    const std::string type = o.type();
    auto add_csv = [&](const std::string& file, const Csv& csv, nlohmann::json info = nlohmann::json::object()) {
      info["rows"] = csv.rows();
      out.push_back({o.name, type, file, csv.text(), std::move(info)});
    };
    auto add_json = [&](const std::string& file, const nlohmann::json& j) {
      out.push_back({o.name, type, file, j.dump(2) + "\n", nlohmann::json::object()});
    };
    auto lead = [&](Csv& csv, const Run& run) -> Csv& {
      if (lab) csv.cell(run.label);
      return csv;
    };

    if (const auto* q = std::get_if<PopulationsOut>(&o.params)) {
      std::vector<std::string> cols{"t_us"};
      for (const auto& l : q->labels) cols.push_back("P_" + detail::label_text(l));
      Csv csv(with_run(lab, cols));
      for (const auto& run : runs)
        for (const auto& smp : run.samples) {
          lead(csv, run).cell(smp.t_us);
          for (const auto& l : q->labels)
            csv.cell(smp.rho.basis().contains(l[0], l[1]) ? photon_population(smp.rho, l[0], l[1]) : 0.0);
          csv.end();
        }
      add_csv(o.name + ".csv", csv);
    } else if (const auto* q = std::get_if<DeltaPopulationsOut>(&o.params)) {
      std::vector<std::string> cols{"t_us"};
      for (int d : q->deltas) cols.push_back("delta_" + std::to_string(d));
      Csv csv(with_run(lab, cols));
      for (const auto& run : runs)
        for (const auto& smp : run.samples) {
          const auto& b = smp.rho.basis();
          const int trunc = q->truncation < 0 ? std::min(b.cutoff(Mode::a), b.cutoff(Mode::b)) : q->truncation;
          lead(csv, run).cell(smp.t_us);
          for (int d : q->deltas) csv.cell(pnd_probability(smp.rho, d, trunc));
          csv.end();
        }
      add_csv(o.name + ".csv", csv);
    } else if (const auto* q = std::get_if<SpectroscopyOut>(&o.params)) {
      std::vector<double> grid;
      for (double f : linear_grid(q->lo, q->hi, q->points)) grid.push_back(units::hz(f));
      const auto spec = spectroscopy_spec(p, grid, units::hz(q->sigma));
      Csv csv(with_run(lab, {"detuning_mhz", "signal"}));
      for (const auto& run : runs) {
        const auto sig = spectroscopy_signal(run.samples.back().rho, spec);
        for (std::size_t k = 0; k < grid.size(); ++k) lead(csv, run).cell(units::to_hz(grid[k]) / 1e6).cell(sig[k]).end();
      }
      add_csv(o.name + ".csv", csv);
    } else if (const auto* q = std::get_if<WignerOut>(&o.params)) {
      WignerCut cut;
      if (q->cut == "planar") {
        const auto g = linear_grid(q->lo, q->hi, q->points);
        cut = PlanarCut{detail::axis_of(q->x), detail::axis_of(q->y), g, g, q->alpha0, q->beta0};
      } else {
        cut = AngularCut{q->amp_alpha, q->amp_beta, phase_grid(q->phases_alpha), phase_grid(q->phases_beta)};
      }
      Csv csv(with_run(lab, {"re_alpha", "im_alpha", "re_beta", "im_beta", "w_scaled", "leakage"}));
      int warnings = 0;
      double max_abs = 0.0;
      for (const auto& run : runs)
        for (const auto& w : wigner_cut(run.samples.back().rho, cut)) {
          lead(csv, run).cell(w.alpha.real()).cell(w.alpha.imag()).cell(w.beta.real()).cell(w.beta.imag());
          csv.cell(w.value).cell(w.leakage).end();
          warnings += w.leakage_warning;
          max_abs = std::max(max_abs, std::abs(w.value));
        }
      add_csv(o.name + ".csv", csv, {{"leakage_warnings", warnings}, {"max_abs_w_scaled", max_abs}});
    } else if (const auto* q = std::get_if<SubspaceOut>(&o.params)) {
      Csv csv(with_run(lab, {"t_us", "bra", "ket", "re", "im", "abs", "arg", "bound", "amp_err", "phase_err",
                             "consistent_with_zero"}));
      Csv sig(with_run(lab, {"t_us", "bra", "ket", "phase", "value"}));
      for (const auto& run : runs) {
        const std::size_t first = q->every_sample ? 0 : run.samples.size() - 1;
        for (std::size_t k = first; k < run.samples.size(); ++k) {
          const auto& smp = run.samples[k];
          for (const auto& pair : q->pairs) {
            const SubspaceSpec spec = detail::subspace_spec(*q, pair);
            const auto signal = simulate_subspace_protocol(smp.rho, spec);
            const double pb = photon_population(smp.rho, pair.first[0], pair.first[1]);
            const double pk = photon_population(smp.rho, pair.second[0], pair.second[1]);
            const auto e = fit_coherence(signal, pb, pk, spec);
            lead(csv, run).cell(smp.t_us).cell(detail::label_text(pair.first)).cell(detail::label_text(pair.second));
            csv.cell(e.value.real()).cell(e.value.imag()).cell(std::abs(e.value)).cell(std::arg(e.value));
            csv.cell(std::sqrt(pb * pk)).cell(e.amp_err).cell(e.phase_err).cell(e.consistent_with_zero ? 1 : 0).end();
            if (q->signal)
              for (std::size_t i = 0; i < signal.phases.size(); ++i) {
                lead(sig, run).cell(smp.t_us).cell(detail::label_text(pair.first)).cell(detail::label_text(pair.second));
                sig.cell(signal.phases[i]).cell(signal.values[i]).end();
              }
          }
        }
      }
      add_csv(o.name + ".csv", csv);
      if (q->signal) add_csv(o.name + "_signal.csv", sig);
    } else if (const auto* q = std::get_if<PhaseLedgerOut>(&o.params)) {
      Csv csv({"t_w_us", "j", "k", "t_total_us", "linear_rad", "residual_rad", "total_rad"});
      for (const auto& jk : q->pairs)
        for (double tw : q->t_w) {
          PhaseLedger l;
          l.t_w = units::us(tw + q->extra_free);
          l.dt_q = units::us(q->dt_q);
          l.dt_d = units::us(q->dt_d);
          l.delta_sd = units::hz(q->delta_sd);
          if (q->matched) {
            l.omega_3 = matched_displacement_sum(p, jk[0], jk[1]);
          } else {
            l.omega_3 = units::hz(q->omega_3);
            l.omega_4 = units::hz(q->omega_4);
          }
          const auto ph = phase_ledger_evaluate(l, p, jk[0], jk[1]);
          csv.cell(tw).cell(jk[0]).cell(jk[1]).cell(units::to_us(l.t_total()));
          csv.cell(ph.linear).cell(ph.residual).cell(ph.total()).end();
        }
      add_csv(o.name + ".csv", csv);
    } else if (const auto* q = std::get_if<DeltaEquilibriumOut>(&o.params)) {
      const cplx gamma = q->gamma ? *q->gamma : pair_amplitude(rates);
      const auto eq = delta_equilibrium(gamma, p.kappa_a, p.kappa_b, q->delta_min, q->delta_max);
      std::vector<std::string> cols{"delta", "C"};
      std::vector<std::map<int, double>> sim;
      for (const auto& run : runs) {
        cols.push_back(run.label.empty() ? "simulated" : "simulated_" + run.label);
        sim.push_back(delta_distribution(run.samples.back().rho));
      }
      Csv csv(cols);
      for (const auto& [d, w] : eq.C) {
        csv.cell(d).cell(w);
        for (const auto& h : sim) csv.cell(h.count(d) ? h.at(d) : 0.0);
        csv.end();
      }
      add_csv(o.name + ".csv", csv,
              {{"gamma", complex_json(gamma)},
               {"max_residual", eq.max_residual},
               {"window_too_small", eq.window_too_small}});
    } else if (const auto* q = std::get_if<ReconstructionOut>(&o.params)) {
      const FockBasis rb(q->cutoffs[0], q->cutoffs[1]);
      const auto grid = product_grid(linear_grid(q->lo, q->hi, q->points));
      for (const auto& run : runs) {
        const DensityMatrix& rho = run.samples.back().rho;
        std::vector<WignerSample> samples;
        samples.reserve(grid.size());
        for (const auto& [a, b] : grid) samples.push_back(joint_wigner(rho, a, b));
        const auto mm = assemble_measurements(samples, rb);
        // reference: the simulated state restricted to the reconstruction basis
        Mat proj(rb.dim(), rb.dim());
        for (int i = 0; i < rb.dim(); ++i)
          for (int j = 0; j < rb.dim(); ++j) {
            const auto li = rb.labels(i), lj = rb.labels(j);
            proj(i, j) = rho.basis().contains(li[0], li[1]) && rho.basis().contains(lj[0], lj[1])
                             ? rho(rho.basis().index(li[0], li[1]), rho.basis().index(lj[0], lj[1]))
                             : cplx(0.0);
          }
        const double kept = proj.trace().real();
        const DensityMatrix ref(rb, proj / kept);
        std::vector<double> diag;
        for (int i = 0; i < rb.dim(); ++i) diag.push_back(ref(i, i).real());
        const auto r = q->constrained ? reconstruct_constrained(mm, diag) : reconstruct_lsq(mm);
        nlohmann::json j = density_json(r.rho);
        j["samples"] = mm.samples();
        j["constrained"] = q->constrained;
        j["min_eigenvalue"] = r.min_eigenvalue;
        j["residual"] = r.residual;
        j["condition_number"] = r.condition_number;
        j["population_in_basis"] = kept;
        j["trace_distance_to_reference"] = trace_distance(r.rho, ref);
        add_json(detail::suffixed(o.name, run, lab) + ".json", j);
      }
    } else if (std::holds_alternative<StateOut>(o.params)) {
      for (const auto& run : runs) add_json(detail::suffixed(o.name, run, lab) + ".json", density_json(run.samples.back().rho));
    } else if (const auto* q = std::get_if<FidelityOut>(&o.params)) {
      const cplx gamma = q->gamma ? *q->gamma : pair_amplitude(rates);
      Csv csv(with_run(lab, {"t_us", "fidelity"}));
      for (const auto& run : runs) {
        const auto target = pcs_state(gamma, q->delta, run.samples.front().rho.basis(), 1e-3);
        for (const auto& smp : run.samples) lead(csv, run).cell(smp.t_us).cell(fidelity(smp.rho, target)).end();
      }
      add_csv(o.name + ".csv", csv, {{"gamma", complex_json(gamma)}});
    }
  }
  return out;
}

inline nlohmann::json manifest(const Scenario& s, const std::vector<Run>& runs, const std::vector<Artifact>& arts) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& r : runs) labels.push_back(r.label);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& a : arts) {
    nlohmann::json e = {{"output", a.output}, {"type", a.type}, {"file", a.file}};
    e.update(a.info);
    list.push_back(e);
  }
  return {{"scenario", s.name},
          {"description", s.description},
          {"config", "effective_config.yaml"},
          {"runs", labels},
          {"artifacts", list}};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

/// Runs one scenario and writes its artifacts, the config echo and manifest.json into `dir`.
/// Module failures are rethrown with the scenario name attached.
inline std::vector<Artifact> run_scenario(const Config& c, const std::string& name, const std::filesystem::path& dir,
                                          std::ostream* log = nullptr) {
  const Scenario& s = c.scenario(name);
  std::vector<Run> runs;
  std::vector<Artifact> arts;
  try {
    runs = simulate(c, s, log);
    arts = render_outputs(c, s, runs);
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario " + name + ": " + e.what());
  }
  std::filesystem::create_directories(dir);
  for (const auto& a : arts) write_file(dir / a.file, a.content);
  write_file(dir / "effective_config.yaml", effective_config(c, s));
  write_file(dir / "manifest.json", manifest(s, runs, arts).dump(2) + "\n");
  return arts;
}

}  // namespace pcs::cli
