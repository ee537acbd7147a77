#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "kvchaos/chaos_mc.hpp"
#include "kvchaos/domain.hpp"
#include "kvchaos/path_sim.hpp"
#include "kvchaos/semigroup.hpp"

namespace kvchaos {

struct ExpansionSettings {
  int order = 2;
  std::size_t simplex_nodes = 24;
  double alpha_cutoff = 1e-6;
  double max_horizon = 50.0;
};

struct SimulateSettings {
  Measure measure = Measure::Q;
  /// "survival" (1{tau > time}), "phi" (stopped phi) or "position" (w at time).
  std::string estimator = "survival";
  double time = 1.0;
  std::size_t dump_paths = 10;
  bool bridge = true;
};

// Sample sizes and tolerances of the acceptance checks.
struct VerifySettings {
  // P1
  std::size_t harmonic_nodes = 64;
  double harmonic_tolerance = 1e-8;
  double harmonic_fd_step = 1e-3;
  // P2
  std::vector<double> survival_times{0.1, 0.5, 1.0};
  std::size_t survival_samples = 100000;
  double survival_sigmas = 3.0;
  nlohmann::json halfline_domain = {{"kind", "halfline"}, {"rho", {{"0", 0.7}}}};
  double halfline_u = 1.0;
  double halfline_time = 1.0;
  // P3
  std::vector<double> normalization_times{0.1, 0.5, 1.0};
  double normalization_tolerance = 1e-8;
  // P4
  double semigroup_s = 0.2;
  double semigroup_t = 0.3;
  std::size_t semigroup_functions = 5;
  double semigroup_tolerance = 1e-7;
  // P5
  std::size_t clark_samples = 100000;
  double clark_relative_tolerance = 0.01;
  std::size_t clark_refine = 4;
  std::size_t clark_refined_samples = 25000;
  double clark_ratio_min = 1.6;
  double clark_ratio_max = 2.6;
  // P6
  double eq1_t = 0.5;
  std::size_t eq1_samples = 100000;
  double eq1_sigmas = 3.0;
  double eq1_tolerance = 1e-4;
  std::size_t eq1_time_nodes = 32;
  // P7, P8 (one shared sample)
  std::size_t chaos_samples = 10000;
  double chaos_sigmas = 3.0;
  double parseval_allowance = 0.10;
  double isometry_allowance = 0.05;
  // P9
  double wiener_t = 0.5;
  std::size_t wiener_samples = 10000;
  std::size_t wiener_probes = 10;
  double wiener_level = 0.01;
  double wiener_sigmas = 3.0;
  double wiener_max_failure_rate = 1e-3;
  // P10
  std::size_t gradient_points = 20;
  double gradient_tolerance = 1e-6;
  double gradient_fd_step = 1e-5;
  // Determinism reruns
  std::size_t determinism_samples = 2000;
  std::size_t determinism_workers = 3;
  double determinism_horizon = 0.3;
};

struct ExperimentConfig {
  nlohmann::json domain_json;
  std::shared_ptr<const DomainModel> model;
  double u = 0.5;
  BoundaryFunction phi;
  GridSettings grid;
  MCConfig mc;
  ExpansionSettings expansion;
  SimulateSettings simulate;
  VerifySettings verify;
  std::string output_dir = "out";
};

/// Validates every field; errors carry the JSON path of the offending field.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

}  // namespace kvchaos
