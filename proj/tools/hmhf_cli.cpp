// hmhf: run one scenario from a key=value config file and/or flags.
//
//   hmhf simulate --n 1 --horizon 1 --output runs/sim
//   hmhf cross_energy --N 1 --eps-sweep 0.02,0.01,0.005
//   hmhf --config scenario.cfg --dt 5e-5
//   hmhf verify --checks 1,2,13
#include "hmhf/checks.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Controlled harmonic map heat flow on the circle: scenarios and checks"};
  app.footer("Exit codes: 0 pass, 1 validation error, 2 stage failure, 3 property failure.\n"
             "Relative output paths resolve against $HMHF_OUTPUT_ROOT.");

  std::string kind, config_file;
  bool list_checks = false;
  app.add_option("kind", kind, "scenario kind (or kind= in the config file)");
  app.add_option("-c,--config", config_file, "key=value config file, flags override it");
  app.add_flag("--list-checks", list_checks, "print the verify sub-checks and exit");

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const hmhf::KeyInfo& k : hmhf::scenario_keys()) {
    const std::string key = k.key;
    if (key == "kind") continue;
    std::string dashed = key;
    for (char& c : dashed)
      if (c == '_') c = '-';
    std::string names = "--" + dashed;
    if (dashed != key) names += ",--" + key;
    if (key == "n") names += ",--N";
    if (key == "n1") names += ",--N1";
    options[key] = app.add_option(names, values[key], k.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << hmhf::error_line("UsageError", "parse", e.what()) << "\n";
    return 1;
  }

  if (list_checks) {
    for (const hmhf::CheckInfo& c : hmhf::check_catalog())
      std::cout << c.id << " " << c.name << ": " << c.summary << "\n";
    return 0;
  }

  hmhf::ScenarioConfig cfg;
  try {
    if (!config_file.empty()) cfg.load_file(config_file);
    if (!kind.empty()) cfg.set("kind", kind);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) cfg.set(key, values[key]);
  } catch (const hmhf::Error& e) {
    std::cerr << hmhf::error_line(e.kind(), "config", e.what()) << "\n";
    return 1;
  }
  return hmhf::run_scenario(cfg, std::cout, std::cerr);
}
