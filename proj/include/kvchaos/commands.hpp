#pragma once
// File-producing entry points behind the command-line tool. Each validates
// its inputs before writing anything into the output directory.

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "kvchaos/config.hpp"
#include "kvchaos/verify.hpp"

namespace kvchaos {

/// kernels_order{n}.csv for n = 0..N and kernels_summary.json.
std::vector<std::filesystem::path> run_kernels(const ExperimentConfig& c);

/// simulate_summary.json, plus paths.csv when dump_paths > 0.
nlohmann::json run_simulate(const ExperimentConfig& c);

/// expand.json.
nlohmann::json run_expand(const ExperimentConfig& c);

/// report.json and report.csv.
VerifyReport run_verify_files(const ExperimentConfig& c);

}  // namespace kvchaos
