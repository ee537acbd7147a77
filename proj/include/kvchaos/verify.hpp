#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kvchaos/config.hpp"

namespace kvchaos {

/// One computed-versus-oracle comparison; pass <=> |computed - oracle| <= tolerance.
struct Comparison {
  std::string label;
  double computed = 0.0;
  double oracle = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ReportRecord {
  std::string name;
  std::string title;
  std::vector<Comparison> comparisons;
  /// Supplementary numbers (standard errors, counts) reported with the check.
  nlohmann::json info = nlohmann::json::object();
  std::string error;
  double runtime_s = 0.0;

  bool pass() const;
  void compare(std::string label, double computed, double oracle, double tolerance);
  /// Requires lo <= computed <= hi; stored with the interval midpoint as oracle.
  void within(std::string label, double computed, double lo, double hi);
};

struct VerifyReport {
  std::vector<ReportRecord> records;
  bool pass() const;
};

/// Sizes that differ between the full checks and the reduced determinism reruns.
struct CheckScale {
  std::size_t workers = 0;
  bool reduced = false;
};

ReportRecord check_harmonicity(const ExperimentConfig& c);
ReportRecord check_survival(const ExperimentConfig& c, const CheckScale& scale);
ReportRecord check_normalization(const ExperimentConfig& c);
ReportRecord check_semigroup(const ExperimentConfig& c);
ReportRecord check_clark(const ExperimentConfig& c, const CheckScale& scale);
ReportRecord check_eq1(const ExperimentConfig& c, const CheckScale& scale);
/// P7 and P8 come from one shared sample.
std::vector<ReportRecord> check_expansion(const ExperimentConfig& c, const CheckScale& scale);
ReportRecord check_wiener(const ExperimentConfig& c, const CheckScale& scale);
ReportRecord check_gradients(const ExperimentConfig& c);
ReportRecord check_determinism(const ExperimentConfig& c);

/// Runs P1..P10 and the determinism check; a throwing check is recorded as failed.
VerifyReport run_verify(const ExperimentConfig& c);

nlohmann::json report_to_json(const VerifyReport& r, const ExperimentConfig& c);
std::string report_to_csv(const VerifyReport& r);

}  // namespace kvchaos
