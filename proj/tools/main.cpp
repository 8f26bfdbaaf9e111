#include "commands.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace qprobe;
using namespace qprobe::cli;

int main(int argc, char** argv) {
  CLI::App app{"qprobe: probe-based spectroscopy of quantum systems"};
  app.require_subcommand(1);
  RunOptions opts;
  std::uint64_t seed = 0;
  int jobs = 1;

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const RunOptions&);
  };
  const Entry entries[] = {
      {"sweep", "exact and sampled transition probabilities on a (lambda, tau) grid", cmd_sweep},
      {"fit", "per-tau oscillation fits of a sweep CSV", cmd_fit},
      {"reconstruct", "Fourier spectrum of a fitted or raw tau series", cmd_reconstruct},
      {"validate", "validity reports for a model at (lambda, tau) points", cmd_validate},
      {"spin-demo", "nuclear-spin spectroscopy with a single probe spin", cmd_spin_demo},
      {"vibronic-demo", "donor-acceptor reconstruction of f(tau), E_r and J(omega)", cmd_vibronic_demo},
  };
  std::vector<std::pair<CLI::App*, int (*)(const RunOptions&)>> subs;
  for (const auto& e : entries) {
    auto* sc = app.add_subcommand(e.name, e.help);
    sc->add_option("--config", opts.config, "config file (YAML) or run manifest")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", opts.out, "output directory");
    sc->add_option("--seed", seed, "master seed (overrides the config)");
    sc->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 1024));
    subs.emplace_back(sc, e.fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (const auto& [sc, fn] : subs) {
    if (!sc->parsed()) continue;
    if (sc->count("--seed")) opts.seed = seed;
    if (sc->count("--jobs")) opts.jobs = jobs;
    try {
      return fn(opts);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const YAML::Exception& e) {
      std::cerr << "error: config:" << e.mark.line + 1 << ": " << e.msg << "\n";
      return 2;
    } catch (const numerical_error& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      return 3;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "failure: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
