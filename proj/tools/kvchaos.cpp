#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kvchaos/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

kvchaos::ExperimentConfig load(const Options& o) {
  kvchaos::ExperimentConfig c = kvchaos::load_config(o.config);
  if (o.seed) c.mc.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  return c;
}

int verify(const Options& o) {
  const auto c = load(o);
  const auto rep = kvchaos::run_verify_files(c);
  for (const auto& r : rep.records) {
    std::printf("%-12s %s  %7.2fs  %s\n", r.name.c_str(), r.pass() ? "PASS" : "FAIL", r.runtime_s, r.title.c_str());
    if (!r.error.empty()) std::printf("             error: %s\n", r.error.c_str());
  }
  std::printf("overall: %s (report in %s)\n", rep.pass() ? "PASS" : "FAIL", c.output_dir.c_str());
  return rep.pass() ? 0 : 1;
}

int kernels(const Options& o) {
  for (const auto& p : kvchaos::run_kernels(load(o))) std::printf("wrote %s\n", p.string().c_str());
  return 0;
}

int simulate(const Options& o) {
  std::cout << kvchaos::run_simulate(load(o)).dump(2) << "\n";
  return 0;
}

int expand(const Options& o) {
  std::cout << kvchaos::run_expand(load(o)).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chaos expansions of stopped Wiener functionals"};
  app.require_subcommand(1);
  Options opts;
  int (*action)(const Options&) = nullptr;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "override the master seed");
    sub->add_option("--out", opts.out, "override the output directory");
    sub->callback([&action, fn] { action = fn; });
  };
  add("verify", "run the acceptance checks and write report.json/report.csv", verify);
  add("kernels", "tabulate chaos kernels and Parseval terms", kernels);
  add("simulate", "simulate paths and write summary statistics", simulate);
  add("expand", "estimate the truncated expansion residual", expand);
  CLI11_PARSE(app, argc, argv);
  try {
    return action(opts);
  } catch (const kvchaos::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
