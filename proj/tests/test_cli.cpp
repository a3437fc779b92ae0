#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pcs_cli/runner.hpp"

using namespace pcs;
using namespace pcs::cli;
namespace fs = std::filesystem;

namespace {

const std::string kShipped = PCS_SOURCE_DIR "/tools/configs/scenarios.yaml";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pcs_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int error_line(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

const char* kSmoke = R"(
system:
  kappa_r: 0.78 MHz
scenarios:
  short:
    model: {cutoffs: [4, 4]}
    rates: {eps_ab: 99 kHz, kappa_ab: 12.5 kHz}
    initials:
      - {label: vac, fock: [0, 0]}
      - {label: one, fock: [1, 0]}
    schedule:
      - {pump: true, duration: 2, samples: 3}
      - {pump: false, duration: 0.5}
    outputs:
      - {name: pops, type: populations, labels: [[0, 0], [1, 1], [1, 0]]}
      - {name: deltas, type: delta_populations, deltas: [0, 1]}
      - {name: w, type: wigner_cut, cut: angular, amp_alpha: 0.2, amp_beta: 0.2, phases_alpha: 3, phases_beta: 2}
      - {name: rho, type: state}
  outside:
    model: {cutoffs: [2, 2]}
    initial: {fock: [5, 0]}
    schedule:
      - {duration: 1}
)";

}  // namespace

TEST(Config, ShippedScenarioListing) {
  const auto c = load_config(kShipped);
  const std::vector<std::string> want{"fig2d",          "fig2e",       "fig3",        "fig4_wigner",        "fig5_subspace",
                                      "fig6_coherence", "figE1_delta", "figE2_recon", "figE3_superposition"};
  EXPECT_EQ(c.names(), want);
}

TEST(Config, EmptyConfigHasNoScenarios) {
  EXPECT_TRUE(parse_config("").names().empty());
  EXPECT_TRUE(parse_config("scenarios: {}\n").names().empty());
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("system:\n  chi_qa: [1, 2\n"), 3);
  EXPECT_EQ(error_line("system:\n  chi_qa: 1 MHz\n  bogus: 3\n"), 3);
  EXPECT_EQ(error_line("system:\n  K_aa: 8 parsecs\n"), 2);
  EXPECT_EQ(error_line("scenarios:\n  x:\n    schedule:\n      - {pump: true, duration: -1}\n"), 4);
  EXPECT_EQ(error_line("scenarios:\n  x:\n    schedule: [{duration: 1}]\n    outputs:\n      - {name: a, type: nope}\n"), 5);
}

TEST(Config, DuplicateOutputNames) {
  EXPECT_THROW(parse_config("scenarios:\n  x:\n    schedule: [{duration: 1}]\n    outputs:\n"
                            "      - {name: a, type: state}\n      - {name: a, type: state}\n"),
               ConfigError);
}

TEST(Config, Units) {
  const auto c = parse_config("system:\n  chi_qa: 1.5 MHz\n  K_aa: 8kHz\n  kappa_r: 12\n  t1_a: 200 us\n");
  EXPECT_DOUBLE_EQ(c.system.chi_qa, 1.5e6);
  EXPECT_DOUBLE_EQ(c.system.K_aa, 8e3);
  EXPECT_DOUBLE_EQ(c.system.kappa_r, 12.0);
  EXPECT_NEAR(c.system.params().kappa_a, 1.0 / 200e-6, 1e-9);
  EXPECT_THROW(parse_config("system:\n  t1_a: 200\n  kappa_a: 1 kHz\n"), ConfigError);
}

TEST(Config, DefaultsComeFromTheDeviceTable) {
  const auto p = parse_config("system: {kerr_set: plain}\n").system.params();
  const auto t = device_params(KerrSet::plain);
  EXPECT_NEAR(p.K_bb, t.K_bb, 1e-9);
  EXPECT_NEAR(p.chi_qb, t.chi_qb, 1e-6);
}

TEST(Config, EffectiveConfigRoundTrips) {
  const auto c = load_config(kShipped);
  for (const auto& s : c.scenarios) {
    const auto text = effective_config(c, s);
    const auto back = parse_config(text);
    ASSERT_EQ(back.scenarios.size(), 1u) << s.name;
    EXPECT_EQ(back.scenarios[0], s) << s.name << "\n" << text;
    EXPECT_EQ(back.drive, c.drive);
    EXPECT_EQ(effective_config(back, back.scenarios[0]), text) << s.name;
  }
}

TEST(Config, UnknownScenarioListsAvailable) {
  const auto c = parse_config(kSmoke);
  try {
    c.scenario("nope");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("available: short, outside"), std::string::npos) << e.what();
  }
}

TEST(Runner, WritesArtifactsDeterministically) {
  const auto c = parse_config(kSmoke);
  const auto d1 = scratch("a"), d2 = scratch("b");
  const auto arts = run_scenario(c, "short", d1);
  run_scenario(c, "short", d2);
  ASSERT_EQ(arts.size(), 5u);
  for (const auto* f : {"pops.csv", "deltas.csv", "w.csv", "rho_vac.json", "rho_one.json", "manifest.json",
                        "effective_config.yaml"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;

  const auto pops = slurp(d1 / "pops.csv");
  EXPECT_EQ(pops.substr(0, pops.find('\n')), "run,t_us,P_0_0,P_1_1,P_1_0");
  // 3 samples while pumping plus the end of the free segment, for each of two runs
  EXPECT_EQ(std::count(pops.begin(), pops.end(), '\n'), 1 + 2 * 4);
  EXPECT_NE(pops.find("vac,0,1,0,0\n"), std::string::npos);
  EXPECT_NE(pops.find("one,2.5,"), std::string::npos);

  const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  EXPECT_EQ(m["scenario"], "short");
  EXPECT_EQ(m["artifacts"].size(), 5u);
  EXPECT_EQ(m["artifacts"][0]["rows"], 8);
  EXPECT_EQ(m["config"], "effective_config.yaml");
  EXPECT_EQ(parse_config(slurp(d1 / "effective_config.yaml")).scenarios[0], c.scenario("short"));
}

TEST(Runner, StateJsonRoundTrips) {
  const auto c = parse_config(kSmoke);
  const auto d = scratch("state");
  run_scenario(c, "short", d);
  const auto rho = density_from_json(nlohmann::json::parse(slurp(d / "rho_one.json")));
  EXPECT_EQ(rho.basis(), FockBasis(4, 4));
  EXPECT_NEAR(rho.trace(), 1.0, 1e-9);
  // only single-photon loss moves weight out of delta = 1; a few percent over 2.5 us
  const double stay = delta_distribution(rho)[1];
  EXPECT_GT(stay, 0.95);
  EXPECT_LT(stay, 1.0);
}

TEST(Runner, ModuleErrorsNameTheScenario) {
  const auto c = parse_config(kSmoke);
  try {
    run_scenario(c, "outside", scratch("outside"));
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("scenario outside: ", 0), 0u) << e.what();
  }
}

TEST(Runner, Fig3DeltaSectors) {
  const auto c = load_config(kShipped);
  const auto runs = simulate(c, c.scenario("fig3"));
  ASSERT_EQ(runs.size(), 2u);
  const auto h10 = delta_distribution(runs[0].samples.back().rho);
  const auto h01 = delta_distribution(runs[1].samples.back().rho);
  for (const auto& [d, p] : h10)
    if (d != 1) EXPECT_GT(h10.at(1), p) << d;
  for (const auto& [d, p] : h01)
    if (d != -1) EXPECT_GT(h01.at(-1), p) << d;
}
