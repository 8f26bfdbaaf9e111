#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace qprobe::cli {

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

int cmd_sweep(const RunOptions& o);
int cmd_fit(const RunOptions& o);
int cmd_reconstruct(const RunOptions& o);
int cmd_validate(const RunOptions& o);
int cmd_spin_demo(const RunOptions& o);
int cmd_vibronic_demo(const RunOptions& o);

}  // namespace qprobe::cli
