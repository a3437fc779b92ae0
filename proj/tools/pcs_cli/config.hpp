#pragma once

#include <yaml-cpp/yaml.h>

#include <array>
#include <charconv>
#include <complex>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/model.hpp"
#include "pcs/units.hpp"

// Declarative scenario configs. Values are held in config units (frequencies
// as f = omega / 2pi in Hz, durations in microseconds) so that the echoed
// effective config re-parses to an identical struct.
namespace pcs::cli {

using Label = std::array<int, 2>;

// ---------------------------------------------------------------------------
// Config types

struct SystemConfig {
  std::string kerr_set = "pumped";
  double chi_qa = 0, chi_qb = 0, chi_qr = 0;
  double K_aa = 0, K_bb = 0, K_ab = 0, K_ar = 0, K_br = 0, K_rr = 0;
  double kappa_a = 0, kappa_b = 0, kappa_r = 0;

  SystemParams params() const {
    using units::hz;
    SystemParams p;
    p.chi_qa = hz(chi_qa), p.chi_qb = hz(chi_qb), p.chi_qr = hz(chi_qr);
    p.K_aa = hz(K_aa), p.K_bb = hz(K_bb), p.K_ab = hz(K_ab);
    p.K_ar = hz(K_ar), p.K_br = hz(K_br), p.K_rr = hz(K_rr);
    p.kappa_a = hz(kappa_a), p.kappa_b = hz(kappa_b), p.kappa_r = hz(kappa_r);
    return p;
  }
  bool operator==(const SystemConfig&) const = default;
};

struct DriveConfigSpec {
  std::complex<double> eps_d{0.0};
  std::optional<std::complex<double>> eps_p, g_ab;
  double fwm_coefficient = 0;
  double detuning_d = 0, detuning_p = 0;
  std::optional<double> detuning_a, detuning_b;

  DriveConfig drive() const {
    using units::hz;
    DriveConfig d;
    d.eps_d = hz(1.0) * eps_d;
    if (eps_p) d.eps_p = hz(1.0) * *eps_p;
    if (g_ab) d.g_ab = hz(1.0) * *g_ab;
    d.fwm_coefficient = fwm_coefficient;
    d.detuning_d = hz(detuning_d);
    d.detuning_p = hz(detuning_p);
    if (detuning_a) d.detuning_a = hz(*detuning_a);
    if (detuning_b) d.detuning_b = hz(*detuning_b);
    return d;
  }
  bool operator==(const DriveConfigSpec&) const = default;
};

/// Replacements applied after rates are derived from the drive.
struct RateOverrides {
  std::optional<std::complex<double>> eps_ab;
  std::optional<double> eps_ab_magnitude;  ///< keeps the derived phase
  std::optional<double> kappa_ab;
  std::optional<double> K_eff;
  bool operator==(const RateOverrides&) const = default;
};

enum class ModelKind { reduced, ideal, full };

struct ModelSpec {
  ModelKind kind = ModelKind::reduced;
  std::vector<int> cutoffs{10, 10};
  bool dephasing = true;
  bool single_photon_loss = true;
  std::string kerr = "separate";  ///< separate | effective
  bool operator==(const ModelSpec&) const = default;
};

struct StateComponent {
  std::string kind = "fock";  ///< fock | pcs
  Label fock{0, 0};
  std::complex<double> gamma{0.0};
  int delta = 0;
  std::complex<double> weight{1.0};
  bool operator==(const StateComponent&) const = default;
};

/// A single component is a plain state; several form a normalized superposition.
struct InitialState {
  std::string label;
  std::vector<StateComponent> components{StateComponent{}};
  bool operator==(const InitialState&) const = default;
};

struct Segment {
  bool pump = true;
  double duration = 0;  ///< us
  int samples = 2;      ///< recorded points including both ends
  bool steady = false;  ///< run to the steady state instead of for `duration`
  bool operator==(const Segment&) const = default;
};

struct PopulationsOut {
  std::vector<Label> labels;
  bool operator==(const PopulationsOut&) const = default;
};
struct DeltaPopulationsOut {
  std::vector<int> deltas;
  int truncation = -1;  ///< -1: basis cutoff
  bool operator==(const DeltaPopulationsOut&) const = default;
};
struct SpectroscopyOut {
  double lo = -60e6, hi = 5e6;  ///< Hz
  int points = 651;
  double sigma = 200e3;  ///< Hz
  bool operator==(const SpectroscopyOut&) const = default;
};
struct WignerOut {
  std::string cut = "planar";  ///< planar | angular
  std::string x = "re_alpha", y = "re_beta";
  double lo = -2, hi = 2;
  int points = 41;
  std::complex<double> alpha0{0.0}, beta0{0.0};
  double amp_alpha = 0.3, amp_beta = 0.3;
  int phases_alpha = 24, phases_beta = 24;
  bool operator==(const WignerOut&) const = default;
};
struct SubspaceOut {
  std::vector<std::pair<Label, Label>> pairs;
  double amp_alpha = 0.3, amp_beta = 0.3;
  int phases = 24;
  std::string readout = "parity";  ///< parity | fock
  bool every_sample = false;       ///< evaluate at every recorded time, not only the final state
  bool signal = false;             ///< also write the raw phase sweeps
  bool operator==(const SubspaceOut&) const = default;
};
struct PhaseLedgerOut {
  std::vector<double> t_w;  ///< us
  std::vector<std::array<int, 2>> pairs;
  double extra_free = 0;  ///< us added to every t_w
  double dt_q = 2.0, dt_d = 0.024;  ///< us
  double delta_sd = 0;  ///< Hz
  bool matched = true;  ///< omega_3 + omega_4 chosen per pair to close the loop
  double omega_3 = 0, omega_4 = 0;  ///< Hz, used when not matched
  bool operator==(const PhaseLedgerOut&) const = default;
};
struct DeltaEquilibriumOut {
  std::optional<std::complex<double>> gamma;  ///< default: pair amplitude of the model rates
  int delta_min = -6, delta_max = 6;
  bool operator==(const DeltaEquilibriumOut&) const = default;
};
struct ReconstructionOut {
  std::vector<int> cutoffs{4, 4};
  double lo = -1, hi = 1;
  int points = 5;
  bool constrained = true;
  bool operator==(const ReconstructionOut&) const = default;
};
struct StateOut {
  bool operator==(const StateOut&) const = default;
};
struct FidelityOut {
  std::optional<std::complex<double>> gamma;
  int delta = 0;
  bool operator==(const FidelityOut&) const = default;
};

using OutputParams = std::variant<PopulationsOut, DeltaPopulationsOut, SpectroscopyOut, WignerOut, SubspaceOut,
                                  PhaseLedgerOut, DeltaEquilibriumOut, ReconstructionOut, StateOut, FidelityOut>;

inline constexpr std::array<const char*, 10> kOutputTypes{"populations",       "delta_populations", "spectroscopy",
                                                          "wigner_cut",        "subspace",          "phase_ledger",
                                                          "delta_equilibrium", "reconstruction",    "state",
                                                          "fidelity"};

struct OutputSpec {
  std::string name;
  OutputParams params;
  std::string type() const { return kOutputTypes[params.index()]; }
  bool operator==(const OutputSpec&) const = default;
};

struct Scenario {
  std::string name;
  std::string description;
  SystemConfig system;  ///< global system with the scenario's overrides applied
  ModelSpec model;
  RateOverrides rates;
  std::vector<InitialState> initial{InitialState{}};
  std::vector<Segment> schedule;
  std::vector<OutputSpec> outputs;
  bool operator==(const Scenario&) const = default;
};

struct Config {
  SystemConfig system;
  std::optional<DriveConfigSpec> drive;
  std::vector<Scenario> scenarios;

  const Scenario& scenario(const std::string& name) const;
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& s : scenarios) out.push_back(s.name);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Scalars

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().is_null() ? -1 : n.Mark().line + 1; }

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& what) { throw ConfigError(what, line_of(n)); }

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

/// Number with an optional unit suffix, scaled by the matching factor.
inline double scaled_number(const YAML::Node& n, const std::vector<std::pair<std::string, double>>& units,
                            const char* kind) {
  if (!n.IsScalar()) fail(n, std::string("expected a ") + kind);
  const std::string s = trim(n.Scalar());
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr == s.data()) fail(n, std::string("expected a ") + kind + ", got '" + s + "'");
  const std::string unit = trim(std::string(ptr, s.data() + s.size()));
  if (unit.empty()) return v;
  for (const auto& [u, f] : units)
    if (unit == u) return v * f;
  fail(n, "unknown unit '" + unit + "' for a " + kind);
}

inline double number(const YAML::Node& n) { return scaled_number(n, {}, "number"); }
inline double frequency(const YAML::Node& n) {
  return scaled_number(n, {{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}}, "frequency");
}
inline double duration(const YAML::Node& n) {
  return scaled_number(n, {{"us", 1.0}, {"μs", 1.0}, {"ns", 1e-3}, {"ms", 1e3}, {"s", 1e6}}, "duration");
}

inline int integer(const YAML::Node& n) {
  const double v = number(n);
  if (v != static_cast<int>(v)) fail(n, "expected an integer");
  return static_cast<int>(v);
}

inline bool boolean(const YAML::Node& n) {
  if (!n.IsScalar()) fail(n, "expected true or false");
  const std::string& s = n.Scalar();
  if (s == "true" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "no" || s == "off") return false;
  fail(n, "expected true or false, got '" + s + "'");
}

inline std::string text(const YAML::Node& n) {
  if (!n.IsScalar()) fail(n, "expected a string");
  return n.Scalar();
}

inline std::string choice(const YAML::Node& n, std::initializer_list<const char*> allowed) {
  const std::string s = text(n);
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  fail(n, "'" + s + "' is not one of: " + list);
}

/// Scalar or [re, im], each part parsed by `part`.
template <class F>
std::complex<double> complex_value(const YAML::Node& n, F part) {
  if (n.IsScalar()) return part(n);
  if (n.IsSequence() && n.size() == 2) return {part(n[0]), part(n[1])};
  fail(n, "expected a scalar or [re, im]");
}

inline Label label(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) fail(n, "expected a Fock label [n_a, n_b]");
  const Label l{integer(n[0]), integer(n[1])};
  if (l[0] < 0 || l[1] < 0) fail(n, "Fock labels must be non-negative");
  return l;
}

template <class F>
auto list(const YAML::Node& n, F item) {
  if (!n.IsSequence()) fail(n, "expected a list");
  std::vector<decltype(item(n))> out;
  for (const auto& e : n) out.push_back(item(e));
  return out;
}

/// Map reader that rejects keys nobody asked for.
class Fields {
 public:
  Fields(const YAML::Node& n, std::string where) : node_(n), where_(std::move(where)) {
    if (!n.IsMap()) fail(n, where_ + ": expected a mapping");
  }
  YAML::Node get(const std::string& key) {
    known_.insert(key);
    return node_[key];
  }
  bool has(const std::string& key) {
    known_.insert(key);
    return static_cast<bool>(node_[key]);
  }
  template <class T, class F>
  void read(const std::string& key, T& dst, F parse) {
    if (has(key)) dst = parse(get(key));
  }
  void finish() const {
    for (const auto& kv : node_) {
      const std::string k = kv.first.Scalar();
      if (!known_.count(k)) fail(kv.first, where_ + ": unknown key '" + k + "'");
    }
  }
  const YAML::Node& node() const { return node_; }

 private:
  const YAML::Node node_;
  std::string where_;
  std::set<std::string> known_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Sections

namespace detail {

inline std::vector<std::pair<const char*, double SystemConfig::*>> system_fields() {
  return {{"chi_qa", &SystemConfig::chi_qa}, {"chi_qb", &SystemConfig::chi_qb}, {"chi_qr", &SystemConfig::chi_qr},
          {"K_aa", &SystemConfig::K_aa},     {"K_bb", &SystemConfig::K_bb},     {"K_ab", &SystemConfig::K_ab},
          {"K_ar", &SystemConfig::K_ar},     {"K_br", &SystemConfig::K_br},     {"K_rr", &SystemConfig::K_rr},
          {"kappa_a", &SystemConfig::kappa_a}, {"kappa_b", &SystemConfig::kappa_b}, {"kappa_r", &SystemConfig::kappa_r}};
}

inline SystemConfig table_system(const std::string& set) {
  const SystemParams p = device_params(set == "plain" ? KerrSet::plain : KerrSet::pumped);
  using units::to_hz;
  SystemConfig s;
  s.kerr_set = set;
  s.chi_qa = to_hz(p.chi_qa), s.chi_qb = to_hz(p.chi_qb), s.chi_qr = to_hz(p.chi_qr);
  s.K_aa = to_hz(p.K_aa), s.K_bb = to_hz(p.K_bb), s.K_ab = to_hz(p.K_ab);
  s.K_ar = to_hz(p.K_ar), s.K_br = to_hz(p.K_br), s.K_rr = to_hz(p.K_rr);
  s.kappa_a = to_hz(p.kappa_a), s.kappa_b = to_hz(p.kappa_b), s.kappa_r = to_hz(p.kappa_r);
  return s;
}

inline SystemConfig parse_system(const YAML::Node& n, const SystemConfig& base) {
  SystemConfig s = base;
  if (!n) return s;
  Fields f(n, "system");
  if (f.has("kerr_set")) s = table_system(choice(f.get("kerr_set"), {"pumped", "plain"}));
  for (const auto& [key, member] : system_fields()) f.read(key, s.*member, frequency);
  // lifetimes are an alternative to kappa: kappa = 1 / T1
  for (const auto& [key, member] : {std::pair{"t1_a", &SystemConfig::kappa_a}, std::pair{"t1_b", &SystemConfig::kappa_b},
                                    std::pair{"t1_r", &SystemConfig::kappa_r}}) {
    if (!f.has(key)) continue;
    if (f.has(std::string("kappa_") + key[3])) fail(f.get(key), std::string(key) + " conflicts with kappa_" + key[3]);
    const double t1 = duration(f.get(key));
    if (!(t1 > 0)) fail(f.get(key), "lifetimes must be positive");
    s.*member = units::to_hz(units::rate_from_t1(units::us(t1)));
  }
  f.finish();
  return s;
}

inline DriveConfigSpec parse_drive(const YAML::Node& n) {
  DriveConfigSpec d;
  Fields f(n, "drive");
  f.read("eps_d", d.eps_d, [](const YAML::Node& x) { return complex_value(x, frequency); });
  if (f.has("eps_p")) d.eps_p = complex_value(f.get("eps_p"), frequency);
  if (f.has("g_ab")) d.g_ab = complex_value(f.get("g_ab"), frequency);
  f.read("fwm_coefficient", d.fwm_coefficient, number);
  f.read("detuning_d", d.detuning_d, frequency);
  f.read("detuning_p", d.detuning_p, frequency);
  if (f.has("detuning_a")) d.detuning_a = frequency(f.get("detuning_a"));
  if (f.has("detuning_b")) d.detuning_b = frequency(f.get("detuning_b"));
  if (d.eps_p.has_value() == d.g_ab.has_value()) fail(n, "drive: set exactly one of eps_p and g_ab");
  f.finish();
  return d;
}

inline ModelSpec parse_model(const YAML::Node& n) {
  ModelSpec m;
  if (!n) return m;
  Fields f(n, "model");
  if (f.has("kind")) {
    const auto k = choice(f.get("kind"), {"reduced", "ideal", "full"});
    m.kind = k == "ideal" ? ModelKind::ideal : k == "full" ? ModelKind::full : ModelKind::reduced;
  }
  if (m.kind == ModelKind::ideal) {
    m.dephasing = false;
    m.single_photon_loss = false;
    m.kerr = "effective";
  }
  if (m.kind == ModelKind::full) m.cutoffs = {6, 6, 8};
  if (f.has("cutoffs")) {
    const auto c = f.get("cutoffs");
    m.cutoffs = list(c, integer);
    const std::size_t want = m.kind == ModelKind::full ? 3 : 2;
    if (m.cutoffs.size() != want) fail(c, "model: expected " + std::to_string(want) + " cutoffs");
    for (int v : m.cutoffs)
      if (v < 0) fail(c, "model: cutoffs must be non-negative");
  }
  f.read("dephasing", m.dephasing, boolean);
  f.read("single_photon_loss", m.single_photon_loss, boolean);
  f.read("kerr", m.kerr, [](const YAML::Node& x) { return choice(x, {"separate", "effective"}); });
  f.finish();
  return m;
}

inline RateOverrides parse_rates(const YAML::Node& n) {
  RateOverrides r;
  if (!n) return r;
  Fields f(n, "rates");
  if (f.has("eps_ab")) r.eps_ab = complex_value(f.get("eps_ab"), frequency);
  if (f.has("eps_ab_magnitude")) r.eps_ab_magnitude = frequency(f.get("eps_ab_magnitude"));
  if (f.has("kappa_ab")) r.kappa_ab = frequency(f.get("kappa_ab"));
  if (f.has("K_eff")) r.K_eff = frequency(f.get("K_eff"));
  if (r.eps_ab && r.eps_ab_magnitude) fail(n, "rates: eps_ab and eps_ab_magnitude are exclusive");
  if (r.kappa_ab && *r.kappa_ab < 0) fail(f.get("kappa_ab"), "rates: kappa_ab must be non-negative");
  f.finish();
  return r;
}

inline StateComponent parse_component(const YAML::Node& n) {
  StateComponent c;
  if (n.IsScalar()) {
    if (n.Scalar() != "vacuum") fail(n, "unknown state '" + n.Scalar() + "'");
    return c;
  }
  Fields f(n, "state");
  if (f.has("fock")) {
    c.fock = label(f.get("fock"));
  } else if (f.has("pcs")) {
    c.kind = "pcs";
    Fields p(f.get("pcs"), "pcs");
    if (!p.has("gamma")) fail(p.node(), "pcs: gamma is required");
    c.gamma = complex_value(p.get("gamma"), number);
    p.read("delta", c.delta, integer);
    p.finish();
  } else if (!f.has("vacuum")) {
    fail(n, "state: expected vacuum, fock or pcs");
  }
  f.read("weight", c.weight, [](const YAML::Node& x) { return complex_value(x, number); });
  f.finish();
  return c;
}

inline InitialState parse_initial(const YAML::Node& n) {
  InitialState s;
  if (n.IsMap() && n["superposition"]) {
    Fields f(n, "initial");
    f.read("label", s.label, text);
    s.components = list(f.get("superposition"), parse_component);
    if (s.components.empty()) fail(n, "superposition: no components");
    f.finish();
    return s;
  }
  if (n.IsMap() && n["label"]) {
    YAML::Node copy = YAML::Clone(n);
    s.label = text(n["label"]);
    copy.remove("label");
    s.components = {parse_component(copy)};
    return s;
  }
  s.components = {parse_component(n)};
  return s;
}

inline Segment parse_segment(const YAML::Node& n) {
  Segment s;
  Fields f(n, "schedule segment");
  f.read("pump", s.pump, boolean);
  f.read("steady", s.steady, boolean);
  f.read("samples", s.samples, integer);
  if (f.has("duration")) s.duration = duration(f.get("duration"));
  if (s.steady && f.has("duration")) fail(n, "schedule: a steady segment takes no duration");
  if (!s.steady && !(s.duration > 0)) fail(n, "schedule: segment duration must be positive");
  if (s.samples < (s.steady ? 1 : 2)) fail(n, "schedule: too few samples");
  if (s.steady) s.samples = 1;
  f.finish();
  return s;
}

inline std::pair<Label, Label> label_pair(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) fail(n, "expected a pair of Fock labels");
  return {label(n[0]), label(n[1])};
}

inline std::array<int, 2> int_pair(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) fail(n, "expected [j, k]");
  return {integer(n[0]), integer(n[1])};
}

inline OutputSpec parse_output(const YAML::Node& n) {
  Fields f(n, "output");
  OutputSpec o;
  if (!f.has("type")) fail(n, "output: type is required");
  if (!f.has("name")) fail(n, "output: name is required");
  o.name = text(f.get("name"));
  if (o.name.empty() || o.name.find('/') != std::string::npos) fail(f.get("name"), "output: invalid name");
  const std::string type = choice(f.get("type"), {"populations", "delta_populations", "spectroscopy", "wigner_cut",
                                                  "subspace", "phase_ledger", "delta_equilibrium", "reconstruction",
                                                  "state", "fidelity"});
  auto positive = [](const YAML::Node& x) {
    const int v = integer(x);
    if (v < 1) fail(x, "expected a positive integer");
    return v;
  };
  if (type == "populations") {
    PopulationsOut p;
    p.labels = list(f.get("labels"), label);
    if (p.labels.empty()) fail(n, "populations: labels are required");
    o.params = p;
  } else if (type == "delta_populations") {
    DeltaPopulationsOut p;
    p.deltas = list(f.get("deltas"), integer);
    if (p.deltas.empty()) fail(n, "delta_populations: deltas are required");
    f.read("truncation", p.truncation, integer);
    o.params = p;
  } else if (type == "spectroscopy") {
    SpectroscopyOut p;
    f.read("lo", p.lo, frequency);
    f.read("hi", p.hi, frequency);
    f.read("points", p.points, positive);
    f.read("sigma", p.sigma, frequency);
    if (!(p.hi > p.lo) || p.points < 2 || !(p.sigma > 0)) fail(n, "spectroscopy: need lo < hi, points >= 2, sigma > 0");
    o.params = p;
  } else if (type == "wigner_cut") {
    WignerOut p;
    auto axis = [](const YAML::Node& x) { return choice(x, {"re_alpha", "im_alpha", "re_beta", "im_beta"}); };
    f.read("cut", p.cut, [](const YAML::Node& x) { return choice(x, {"planar", "angular"}); });
    if (p.cut == "planar") {
      f.read("x", p.x, axis);
      f.read("y", p.y, axis);
      f.read("lo", p.lo, number);
      f.read("hi", p.hi, number);
      f.read("points", p.points, positive);
      f.read("alpha0", p.alpha0, [](const YAML::Node& x) { return complex_value(x, number); });
      f.read("beta0", p.beta0, [](const YAML::Node& x) { return complex_value(x, number); });
      if (p.x == p.y) fail(n, "wigner_cut: x and y must differ");
      if (!(p.hi > p.lo) || p.points < 2) fail(n, "wigner_cut: need lo < hi and points >= 2");
    } else {
      f.read("amp_alpha", p.amp_alpha, number);
      f.read("amp_beta", p.amp_beta, number);
      f.read("phases_alpha", p.phases_alpha, positive);
      f.read("phases_beta", p.phases_beta, positive);
      if (p.amp_alpha < 0 || p.amp_beta < 0) fail(n, "wigner_cut: amplitudes must be non-negative");
    }
    o.params = p;
  } else if (type == "subspace") {
    SubspaceOut p;
    p.pairs = list(f.get("pairs"), label_pair);
    if (p.pairs.empty()) fail(n, "subspace: pairs are required");
    f.read("amp_alpha", p.amp_alpha, number);
    f.read("amp_beta", p.amp_beta, number);
    f.read("phases", p.phases, positive);
    f.read("readout", p.readout, [](const YAML::Node& x) { return choice(x, {"parity", "fock"}); });
    f.read("every_sample", p.every_sample, boolean);
    f.read("signal", p.signal, boolean);
    o.params = p;
  } else if (type == "phase_ledger") {
    PhaseLedgerOut p;
    p.t_w = list(f.get("t_w"), duration);
    p.pairs = list(f.get("pairs"), int_pair);
    if (p.t_w.empty() || p.pairs.empty()) fail(n, "phase_ledger: t_w and pairs are required");
    f.read("extra_free", p.extra_free, duration);
    f.read("dt_q", p.dt_q, duration);
    f.read("dt_d", p.dt_d, duration);
    f.read("delta_sd", p.delta_sd, frequency);
    f.read("matched", p.matched, boolean);
    f.read("omega_3", p.omega_3, frequency);
    f.read("omega_4", p.omega_4, frequency);
    o.params = p;
  } else if (type == "delta_equilibrium") {
    DeltaEquilibriumOut p;
    if (f.has("gamma")) p.gamma = complex_value(f.get("gamma"), number);
    f.read("delta_min", p.delta_min, integer);
    f.read("delta_max", p.delta_max, integer);
    if (p.delta_min > p.delta_max) fail(n, "delta_equilibrium: empty window");
    o.params = p;
  } else if (type == "reconstruction") {
    ReconstructionOut p;
    if (f.has("cutoffs")) {
      p.cutoffs = list(f.get("cutoffs"), integer);
      if (p.cutoffs.size() != 2 || p.cutoffs[0] < 0 || p.cutoffs[1] < 0) fail(f.get("cutoffs"), "reconstruction: two cutoffs");
    }
    f.read("lo", p.lo, number);
    f.read("hi", p.hi, number);
    f.read("points", p.points, positive);
    f.read("constrained", p.constrained, boolean);
    if (!(p.hi > p.lo) || p.points < 2) fail(n, "reconstruction: need lo < hi and points >= 2");
    o.params = p;
  } else if (type == "state") {
    o.params = StateOut{};
  } else {
    FidelityOut p;
    if (f.has("gamma")) p.gamma = complex_value(f.get("gamma"), number);
    f.read("delta", p.delta, integer);
    o.params = p;
  }
  f.finish();
  return o;
}

inline Scenario parse_scenario(const std::string& name, const YAML::Node& n, const SystemConfig& system) {
  Scenario s;
  s.name = name;
  Fields f(n, "scenario " + name);
  f.read("description", s.description, text);
  s.system = parse_system(f.get("system"), system);
  s.model = parse_model(f.get("model"));
  s.rates = parse_rates(f.get("rates"));
  if (f.has("initial")) s.initial = {parse_initial(f.get("initial"))};
  if (f.has("initials")) {
    if (f.has("initial")) fail(n, "scenario " + name + ": use either initial or initials");
    s.initial = list(f.get("initials"), parse_initial);
    std::set<std::string> seen;
    for (const auto& i : s.initial)
      if (s.initial.size() > 1 && (i.label.empty() || !seen.insert(i.label).second))
        fail(f.get("initials"), "scenario " + name + ": initials need distinct labels");
  }
  if (!f.has("schedule")) fail(n, "scenario " + name + ": schedule is required");
  s.schedule = list(f.get("schedule"), parse_segment);
  if (s.schedule.empty()) fail(f.get("schedule"), "scenario " + name + ": empty schedule");
  if (f.has("outputs")) s.outputs = list(f.get("outputs"), parse_output);
  std::set<std::string> names;
  for (const auto& o : s.outputs)
    if (!names.insert(o.name).second) fail(f.get("outputs"), "scenario " + name + ": duplicate output name " + o.name);
  f.finish();
  return s;
}

}  // namespace detail

inline const Scenario& Config::scenario(const std::string& name) const {
  for (const auto& s : scenarios)
    if (s.name == name) return s;
  std::string avail;
  for (const auto& s : scenarios) avail += (avail.empty() ? "" : ", ") + s.name;
  throw ConfigError("unknown scenario '" + name + "'; available: " + (avail.empty() ? "(none)" : avail));
}

inline Config parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  Config c;
  if (root.IsNull()) return c;
  try {
    detail::Fields f(root, "config");
    c.system = detail::parse_system(f.get("system"), detail::table_system("pumped"));
    if (f.has("drive")) c.drive = detail::parse_drive(f.get("drive"));
    if (f.has("scenarios")) {
      const auto sc = f.get("scenarios");
      if (!sc.IsMap() && !sc.IsNull()) detail::fail(sc, "scenarios: expected a mapping");
      for (const auto& kv : sc) c.scenarios.push_back(detail::parse_scenario(kv.first.Scalar(), kv.second, c.system));
    }
    f.finish();
  } catch (const YAML::Exception& e) {
    throw ConfigError(e.msg, e.mark.is_null() ? -1 : e.mark.line + 1);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Echo

namespace detail {

inline std::string num(double x) { return fmt(x); }

inline void emit_complex(YAML::Emitter& e, std::complex<double> z) {
  if (z.imag() == 0.0) {
    e << num(z.real());
  } else {
    e << YAML::Flow << YAML::BeginSeq << num(z.real()) << num(z.imag()) << YAML::EndSeq;
  }
}

inline void emit_label(YAML::Emitter& e, const Label& l) {
  e << YAML::Flow << YAML::BeginSeq << l[0] << l[1] << YAML::EndSeq;
}

inline void emit_component(YAML::Emitter& e, const StateComponent& c) {
  e << YAML::BeginMap;
  if (c.kind == "fock") {
    e << YAML::Key << "fock" << YAML::Value;
    emit_label(e, c.fock);
  } else {
    e << YAML::Key << "pcs" << YAML::Value << YAML::BeginMap << YAML::Key << "gamma" << YAML::Value;
    emit_complex(e, c.gamma);
    e << YAML::Key << "delta" << YAML::Value << c.delta << YAML::EndMap;
  }
  e << YAML::Key << "weight" << YAML::Value;
  emit_complex(e, c.weight);
  e << YAML::EndMap;
}

inline void emit_output(YAML::Emitter& e, const OutputSpec& o) {
  e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << o.name << YAML::Key << "type" << YAML::Value
    << o.type();
  auto kv = [&](const char* k, const std::string& v) { e << YAML::Key << k << YAML::Value << v; };
  auto kb = [&](const char* k, bool v) { e << YAML::Key << k << YAML::Value << v; };
  auto ki = [&](const char* k, int v) { e << YAML::Key << k << YAML::Value << v; };
  auto kc = [&](const char* k, std::complex<double> v) {
    e << YAML::Key << k << YAML::Value;
    emit_complex(e, v);
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PopulationsOut>) {
          e << YAML::Key << "labels" << YAML::Value << YAML::Flow << YAML::BeginSeq;
          for (const auto& l : p.labels) emit_label(e, l);
          e << YAML::EndSeq;
        } else if constexpr (std::is_same_v<T, DeltaPopulationsOut>) {
          e << YAML::Key << "deltas" << YAML::Value << YAML::Flow << p.deltas;
          ki("truncation", p.truncation);
        } else if constexpr (std::is_same_v<T, SpectroscopyOut>) {
          kv("lo", num(p.lo)), kv("hi", num(p.hi)), ki("points", p.points), kv("sigma", num(p.sigma));
        } else if constexpr (std::is_same_v<T, WignerOut>) {
          kv("cut", p.cut);
          if (p.cut == "planar") {
            kv("x", p.x), kv("y", p.y), kv("lo", num(p.lo)), kv("hi", num(p.hi)), ki("points", p.points);
            kc("alpha0", p.alpha0), kc("beta0", p.beta0);
          } else {
            kv("amp_alpha", num(p.amp_alpha)), kv("amp_beta", num(p.amp_beta));
            ki("phases_alpha", p.phases_alpha), ki("phases_beta", p.phases_beta);
          }
        } else if constexpr (std::is_same_v<T, SubspaceOut>) {
          e << YAML::Key << "pairs" << YAML::Value << YAML::Flow << YAML::BeginSeq;
          for (const auto& [x, y] : p.pairs) {
            e << YAML::BeginSeq;
            emit_label(e, x);
            emit_label(e, y);
            e << YAML::EndSeq;
          }
          e << YAML::EndSeq;
          kv("amp_alpha", num(p.amp_alpha)), kv("amp_beta", num(p.amp_beta)), ki("phases", p.phases);
          kv("readout", p.readout), kb("every_sample", p.every_sample), kb("signal", p.signal);
        } else if constexpr (std::is_same_v<T, PhaseLedgerOut>) {
          e << YAML::Key << "t_w" << YAML::Value << YAML::Flow << YAML::BeginSeq;
          for (double t : p.t_w) e << num(t);
          e << YAML::EndSeq;
          e << YAML::Key << "pairs" << YAML::Value << YAML::Flow << YAML::BeginSeq;
          for (const auto& jk : p.pairs) e << YAML::Flow << YAML::BeginSeq << jk[0] << jk[1] << YAML::EndSeq;
          e << YAML::EndSeq;
          kv("extra_free", num(p.extra_free)), kv("dt_q", num(p.dt_q)), kv("dt_d", num(p.dt_d));
          kv("delta_sd", num(p.delta_sd)), kb("matched", p.matched);
          kv("omega_3", num(p.omega_3)), kv("omega_4", num(p.omega_4));
        } else if constexpr (std::is_same_v<T, DeltaEquilibriumOut>) {
          if (p.gamma) kc("gamma", *p.gamma);
          ki("delta_min", p.delta_min), ki("delta_max", p.delta_max);
        } else if constexpr (std::is_same_v<T, ReconstructionOut>) {
          e << YAML::Key << "cutoffs" << YAML::Value << YAML::Flow << p.cutoffs;
          kv("lo", num(p.lo)), kv("hi", num(p.hi)), ki("points", p.points), kb("constrained", p.constrained);
        } else if constexpr (std::is_same_v<T, FidelityOut>) {
          if (p.gamma) kc("gamma", *p.gamma);
          ki("delta", p.delta);
        }
      },
      o.params);
  e << YAML::EndMap;
}

}  // namespace detail

/// Fully defaulted config for one scenario, in config units; parses back to the same structs.
inline std::string effective_config(const Config& c, const Scenario& s) {
  using detail::num;
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kerr_set" << YAML::Value << s.system.kerr_set;
  for (const auto& [key, member] : detail::system_fields()) e << YAML::Key << key << YAML::Value << num(s.system.*member);
  e << YAML::EndMap;
  if (c.drive) {
    const auto& d = *c.drive;
    e << YAML::Key << "drive" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "eps_d" << YAML::Value;
    detail::emit_complex(e, d.eps_d);
    if (d.eps_p) {
      e << YAML::Key << "eps_p" << YAML::Value;
      detail::emit_complex(e, *d.eps_p);
    }
    if (d.g_ab) {
      e << YAML::Key << "g_ab" << YAML::Value;
      detail::emit_complex(e, *d.g_ab);
    }
    e << YAML::Key << "fwm_coefficient" << YAML::Value << num(d.fwm_coefficient);
    e << YAML::Key << "detuning_d" << YAML::Value << num(d.detuning_d);
    e << YAML::Key << "detuning_p" << YAML::Value << num(d.detuning_p);
    if (d.detuning_a) e << YAML::Key << "detuning_a" << YAML::Value << num(*d.detuning_a);
    if (d.detuning_b) e << YAML::Key << "detuning_b" << YAML::Value << num(*d.detuning_b);
    e << YAML::EndMap;
  }
  e << YAML::Key << "scenarios" << YAML::Value << YAML::BeginMap << YAML::Key << s.name << YAML::Value
    << YAML::BeginMap;
  if (!s.description.empty()) e << YAML::Key << "description" << YAML::Value << s.description;

  const auto& m = s.model;
  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value
    << (m.kind == ModelKind::ideal ? "ideal" : m.kind == ModelKind::full ? "full" : "reduced");
  e << YAML::Key << "cutoffs" << YAML::Value << YAML::Flow << m.cutoffs;
  e << YAML::Key << "dephasing" << YAML::Value << m.dephasing;
  e << YAML::Key << "single_photon_loss" << YAML::Value << m.single_photon_loss;
  e << YAML::Key << "kerr" << YAML::Value << m.kerr << YAML::EndMap;

  const auto& r = s.rates;
  if (r.eps_ab || r.eps_ab_magnitude || r.kappa_ab || r.K_eff) {
    e << YAML::Key << "rates" << YAML::Value << YAML::BeginMap;
    if (r.eps_ab) {
      e << YAML::Key << "eps_ab" << YAML::Value;
      detail::emit_complex(e, *r.eps_ab);
    }
    if (r.eps_ab_magnitude) e << YAML::Key << "eps_ab_magnitude" << YAML::Value << num(*r.eps_ab_magnitude);
    if (r.kappa_ab) e << YAML::Key << "kappa_ab" << YAML::Value << num(*r.kappa_ab);
    if (r.K_eff) e << YAML::Key << "K_eff" << YAML::Value << num(*r.K_eff);
    e << YAML::EndMap;
  }

  e << YAML::Key << "initials" << YAML::Value << YAML::BeginSeq;
  for (const auto& i : s.initial) {
    e << YAML::BeginMap << YAML::Key << "label" << YAML::Value << i.label << YAML::Key << "superposition"
      << YAML::Value << YAML::BeginSeq;
    for (const auto& comp : i.components) detail::emit_component(e, comp);
    e << YAML::EndSeq << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "schedule" << YAML::Value << YAML::BeginSeq;
  for (const auto& seg : s.schedule) {
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "pump" << YAML::Value << seg.pump;
    if (seg.steady)
      e << YAML::Key << "steady" << YAML::Value << true;
    else
      e << YAML::Key << "duration" << YAML::Value << num(seg.duration);
    e << YAML::Key << "samples" << YAML::Value << seg.samples << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "outputs" << YAML::Value << YAML::BeginSeq;
  for (const auto& o : s.outputs) detail::emit_output(e, o);
  e << YAML::EndSeq;
  e << YAML::EndMap << YAML::EndMap << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace pcs::cli
