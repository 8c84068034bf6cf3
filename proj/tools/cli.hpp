#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dwrpm/data.hpp"
#include "dwrpm/model.hpp"
#include "dwrpm/optim.hpp"

namespace dwrpm::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Everything a command may read from flags or a config file.
struct RunConfig {
  std::filesystem::path records;
  std::filesystem::path stations;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out = ".";
  std::string arch = "dwrpm";
  std::size_t seq_len = 210;
  SplitYears years;
  TrainConfig train;
  ArchitectureOptions layers;  // overrides on top of the architecture defaults
  std::string split = "test";
  std::uint64_t seed = 0;
};

/// Runs one command line (args excludes the program name). Diagnostics go to
/// `err`; human-readable results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dwrpm::cli
