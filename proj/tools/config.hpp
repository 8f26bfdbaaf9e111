#pragma once

#include "qprobe/dynamics.hpp"
#include "qprobe/spin.hpp"
#include "qprobe/vibronic.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace qprobe::cli {

// Schema violation; exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg);

// Rejects keys outside `allowed` with the offending line.
void allow_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed);
YAML::Node require(const YAML::Node& n, const std::string& key);

double get_double(const YAML::Node& n, const std::string& key, std::optional<double> def = std::nullopt);
bool get_bool(const YAML::Node& n, const std::string& key, std::optional<bool> def = std::nullopt);
long long get_int(const YAML::Node& n, const std::string& key, std::optional<long long> def = std::nullopt);
std::string get_string(const YAML::Node& n, const std::string& key, std::optional<std::string> def = std::nullopt);
std::vector<double> get_doubles(const YAML::Node& n, const std::string& key);

// {start, stop, count} or an explicit list.
std::vector<double> get_axis(const YAML::Node& n, const std::string& key);

// Flattened row-major (re, im) pairs.
CMat get_complex_matrix(const YAML::Node& n, const std::string& key, Index rows, Index cols);

model::ProbePureState get_probe_state(const YAML::Node& n, const std::string& key);

struct LoadedConfig {
  YAML::Node root;
  std::string text;  // config as given (or as stored in a manifest)
  std::filesystem::path dir;
  std::optional<std::uint64_t> seed;
};

// Reads a YAML config, or the config embedded in a run manifest.
LoadedConfig load_config(const std::filesystem::path& path);

// Model on probe ⊗ system. Energies divided by `hbar` so that lambda and tau are in the builder's units.
struct ModelSpec {
  CMat v_ps;
  CMat rho_s;
  double hbar = 1;
  double lambda_shift = 0;  // added to every lambda before evolution
  std::string builder;
};

ModelSpec parse_model(const YAML::Node& n, std::uint64_t seed);

spin::SpinGeometry parse_spin_geometry(const YAML::Node& n, std::uint64_t seed, std::vector<spin::Vec3>* probes);
spin::NmrRunConfig parse_nmr_run(const YAML::Node& n);
vibronic::VibronicModel parse_vibronic_model(const YAML::Node& n);

estimation::Window parse_window(const YAML::Node& n, const std::string& key);

}  // namespace qprobe::cli
