#include <CLI11.hpp>

#include <iostream>

#include "pcs_cli/runner.hpp"

namespace {

using namespace pcs;
using namespace pcs::cli;

void print_params(const Config& c, std::ostream& os) {
  using units::to_khz;
  const SystemParams p = c.system.params();
  os << "kerr_set " << c.system.kerr_set << "\n";
  os << "K_eff/2pi_kHz " << fmt(to_khz(effective_kerr(p))) << "\n";
  if (!c.drive) {
    os << "no drive section; derived rates unavailable\n";
    return;
  }
  const DerivedRates r = derive_rates(p, c.drive->drive());
  auto z = [](cplx v) { return fmt(v.real()) + " " + fmt(v.imag()); };
  os << "r_0 " << z(r.r_0) << "  |r_0| " << fmt(std::abs(r.r_0)) << "\n";
  os << "xi_p " << z(r.xi_p) << "\n";
  os << "g_ab/2pi_kHz " << z(r.g_ab / units::khz(1.0)) << "\n";
  os << "eps_ab/2pi_kHz " << z(r.eps_ab / units::khz(1.0)) << "\n";
  os << "kappa_ab/2pi_kHz " << fmt(to_khz(r.kappa_ab)) << "\n";
  os << "zeta_a " << z(r.zeta_a) << "  |zeta_a|^2/2/2pi_kHz " << fmt(to_khz(std::norm(r.zeta_a) / 2)) << "\n";
  os << "zeta_b " << z(r.zeta_b) << "  |zeta_b|^2/2/2pi_kHz " << fmt(to_khz(std::norm(r.zeta_b) / 2)) << "\n";
  const cplx gamma = pair_amplitude(r);
  os << "gamma " << z(gamma) << "  |gamma| " << fmt(std::abs(gamma)) << "\n";
  const auto rep = adiabaticity_report(p, r, std::abs(gamma));
  os << "adiabaticity cross_kerr " << fmt(rep.cross_kerr_ratio) << " pull " << fmt(rep.pull_ratio) << " coupling "
     << fmt(rep.coupling_ratio) << " threshold " << fmt(rep.threshold) << (rep.ok() ? " ok" : " VIOLATED") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pair-coherent-state stabilization scenarios"};
  app.require_subcommand(1);
  std::string config, scenario, out_dir;
  bool verbose = false;

  auto* run = app.add_subcommand("run", "run one scenario and write its artifacts");
  run->add_option("--config", config, "scenario config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--scenario", scenario, "scenario name")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("-v,--verbose", verbose, "progress on stderr");

  auto* list = app.add_subcommand("list", "list scenarios in a config");
  list->add_option("--config", config, "scenario config (YAML)")->required()->check(CLI::ExistingFile);

  auto* params = app.add_subcommand("params", "print derived rates and the adiabaticity report");
  params->add_option("--config", config, "scenario config (YAML)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const Config c = load_config(config);
    if (*list) {
      for (const auto& n : c.names()) std::cout << n << "\n";
    } else if (*params) {
      print_params(c, std::cout);
    } else {
      const auto arts = run_scenario(c, scenario, out_dir, verbose ? &std::cerr : nullptr);
      for (const auto& a : arts) std::cout << a.file << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
