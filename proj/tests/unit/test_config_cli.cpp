#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kvchaos/commands.hpp"

using namespace kvchaos;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json quick_json() {
  std::ifstream in(std::string(KVCHAOS_SOURCE_DIR) + "/configs/quick.json");
  return json::parse(in);
}

std::string field_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kvchaos_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json strip_runtime(json j) {
  for (auto& c : j["checks"]) c.erase("runtime_s");
  j["config"].erase("output_dir");
  return j;
}

}  // namespace

TEST_SUITE("config_cli") {
  TEST_CASE("errors name the offending field") {
    json j = quick_json();
    j.erase("u");
    CHECK(field_of(j) == "/u");
    j = quick_json();
    j["u"] = 1.0;
    CHECK(field_of(j) == "/u");
    j = quick_json();
    j["expansion"]["N"] = 4;
    CHECK(field_of(j) == "/expansion/N");
    j = quick_json();
    j["mc"]["sampler"] = "Qt";
    CHECK(field_of(j) == "/mc/sampler");
    j = quick_json();
    j["mc"]["dt"] = -1.0;
    CHECK(field_of(j) == "/mc/dt");
    j = quick_json();
    j["mc"]["colour"] = 3;
    CHECK(field_of(j) == "/mc/colour");
    j = quick_json();
    j["verify"]["p5"]["n_samples"] = "many";
    CHECK(field_of(j) == "/verify/p5/n_samples");
    j = quick_json();
    j["phi"].erase("b");
    CHECK(field_of(j) == "/phi/b");
    j = quick_json();
    j["domain"]["rho"]["a"] = 1.0;
    CHECK(field_of(j) == "/domain/rho/a");
    CHECK(field_of(quick_json()) == "");
  }

  TEST_CASE("round trip is idempotent") {
    const json once = config_to_json(config_from_json(quick_json()));
    const json twice = config_to_json(config_from_json(once));
    CHECK(once == twice);
    CHECK(once["mc"]["strides"] == json::array({1, 1, 10}));
  }

  TEST_CASE("kernels with N = 0 write one constant row") {
    ExperimentConfig c = config_from_json(quick_json());
    c.expansion.order = 0;
    c.output_dir = fresh_dir("kernels0").string();
    const auto files = run_kernels(c);
    REQUIRE(files.size() == 2);
    CHECK(slurp(files[0]) == "value\n0.80000000000000004\n");
    const json s = json::parse(slurp(files[1]));
    CHECK(s["schema_version"] == 1);
    CHECK(s["parseval_terms"].size() == 1);
  }

  TEST_CASE("simulate rejects empty runs before writing") {
    ExperimentConfig c = config_from_json(quick_json());
    c.mc.n_samples = 0;
    c.output_dir = fresh_dir("simulate0").string();
    CHECK_THROWS_AS(run_simulate(c), ConfigError);
    CHECK_FALSE(fs::exists(c.output_dir));
  }

  TEST_CASE("simulate output does not depend on the worker variable") {
    auto run = [](const char* workers) {
      setenv("KVCHAOS_WORKERS", workers, 1);
      ExperimentConfig c = config_from_json(quick_json());
      c.output_dir = fresh_dir(std::string("simulate_w") + workers).string();
      const json s = run_simulate(c);
      return std::pair{s, slurp(fs::path(c.output_dir) / "paths.csv")};
    };
    const auto a = run("1"), b = run("3");
    setenv("KVCHAOS_WORKERS", "1", 1);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first["schema_version"] == 1);
    CHECK(a.second.rfind("sample_id,step,time,position,exited,weight\n", 0) == 0);
  }

  TEST_CASE("expand reuses the kernel Parseval terms") {
    ExperimentConfig c = config_from_json(quick_json());
    c.output_dir = fresh_dir("expand").string();
    run_kernels(c);
    const json k = json::parse(slurp(fs::path(c.output_dir) / "kernels_summary.json"));
    const json e = run_expand(c);
    CHECK(e["parseval_terms"] == k["parseval_terms"]);
    CHECK(e["schema_version"] == 1);
    CHECK(e["orthogonality"].size() == 3);
    CHECK(json::parse(slurp(fs::path(c.output_dir) / "expand.json")) == e);
  }

  TEST_CASE("constant boundary data passes with zero residuals") {
    json j = quick_json();
    j["phi"] = {{"a", 0.6}, {"b", 0.6}};
    ExperimentConfig c = config_from_json(j);
    c.output_dir = fresh_dir("expand_const").string();
    const json e = run_expand(c);
    CHECK(e["residual"]["mean"] == 0.0);
    CHECK(e["a0"] == doctest::Approx(0.6).epsilon(1e-15));
  }

  TEST_CASE("verify twice gives identical reports") {
    ExperimentConfig c = config_from_json(quick_json());
    c.output_dir = fresh_dir("verify1").string();
    const VerifyReport a = run_verify_files(c);
    const json ja = json::parse(slurp(fs::path(c.output_dir) / "report.json"));
    c.output_dir = fresh_dir("verify2").string();
    run_verify_files(c);
    const json jb = json::parse(slurp(fs::path(c.output_dir) / "report.json"));
    CHECK(ja["schema_version"] == 1);
    CHECK(strip_runtime(ja) == strip_runtime(jb));
    CHECK(a.records.size() == 11);
    CHECK(a.pass());
  }
}
