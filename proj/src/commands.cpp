#include "kvchaos/commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kvchaos/parallel.hpp"

namespace kvchaos {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path prepare_dir(const ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct KernelSetup {
  std::shared_ptr<const KilledSemigroup> ops;
  std::unique_ptr<ChaosKernel> kernel;
  SimplexQuadrature quad;
};

KernelSetup kernel_setup(const ExperimentConfig& c) {
  KernelSetup s;
  s.ops = std::make_shared<KilledSemigroup>(c.model, QuadratureGrid::for_model(*c.model, c.grid, c.u));
  s.kernel = std::make_unique<ChaosKernel>(s.ops, c.phi, c.u);
  s.quad = SimplexQuadrature::for_base_point(*c.model, c.u, c.expansion.simplex_nodes, c.expansion.alpha_cutoff,
                                             c.expansion.max_horizon);
  return s;
}

json parseval_json(const ParsevalTerm& t) {
  return {{"order", t.order}, {"value", t.value}, {"tail_bound", t.tail_bound}, {"max_abs_kernel", t.max_abs_kernel}};
}

}  // namespace

std::vector<fs::path> run_kernels(const ExperimentConfig& c) {
  const KernelSetup s = kernel_setup(c);
  std::vector<std::string> tables;
  json terms = json::array();
  for (int n = 0; n <= c.expansion.order; ++n) {
    std::ostringstream csv;
    for (int k = 1; k <= n; ++k) csv << "t" << k << ",";
    csv << "value\n";
    for (const auto& row : kernel_table(*s.kernel, n, s.quad)) {
      for (std::size_t k = 0; k < row.size(); ++k) csv << (k ? "," : "") << fmt(row[k]);
      csv << "\n";
    }
    tables.push_back(csv.str());
    terms.push_back(parseval_json(parseval_term(*s.kernel, n, s.quad)));
  }
  const json summary = {{"schema_version", 1},
                        {"N", c.expansion.order},
                        {"a0", s.kernel->a0()},
                        {"u", c.u},
                        {"simplex_horizon", s.quad.horizon},
                        {"simplex_nodes", s.quad.nodes_per_axis},
                        {"second_moment", second_moment(*c.model, c.phi, c.u)},
                        {"parseval_terms", terms}};
  const fs::path dir = prepare_dir(c);
  std::vector<fs::path> written;
  for (std::size_t n = 0; n < tables.size(); ++n) {
    written.push_back(dir / ("kernels_order" + std::to_string(n) + ".csv"));
    write_text(written.back(), tables[n]);
  }
  written.push_back(dir / "kernels_summary.json");
  write_text(written.back(), summary.dump(2) + "\n");
  return written;
}

json run_simulate(const ExperimentConfig& c) {
  const MCConfig& cfg = c.mc;
  if (cfg.n_samples < 2) throw ConfigError("/mc/n_samples", "simulate needs at least two samples");
  const SimulateSettings& sim = c.simulate;
  const DomainModel& m = *c.model;
  const TimeGrid grid = TimeGrid::covering(cfg.dt, sim.time);
  if (sim.measure == Measure::Qt) conditioning_steps(grid, sim.time);
  const BoundaryFunction phi = c.phi;
  const RngStream rng(cfg.seed, cfg.stream);

  struct Out {
    double value = 0.0;
    std::size_t clamps = 0;
    PathSample path;
  };
  const auto outs = parallel_map<Out>(cfg.n_samples, cfg.workers, [&](std::size_t k) {
    SampleRng g = rng.sample(k);
    Out o;
    const SimulationOptions opts{sim.bridge};
    PathSample p = sim.measure == Measure::P   ? simulate_P(m, c.u, grid, g, opts)
                   : sim.measure == Measure::Q ? simulate_Q(m, c.u, grid, g, opts)
                                               : simulate_Qt(m, c.u, sim.time, grid, g);
    o.clamps = p.clamp_events;
    if (sim.estimator == "survival") {
      o.value = p.weight * (p.exit_time > sim.time * (1.0 + 1e-12) ? 1.0 : 0.0);
    } else if (sim.estimator == "phi") {
      o.value = p.weight * stopped_functional(m, phi, p);
    } else {
      o.value = p.weight * p.end_position();
    }
    if (k < sim.dump_paths) o.path = std::move(p);
    return o;
  });
  std::vector<double> values(outs.size());
  std::size_t clamps = 0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    values[k] = outs[k].value;
    clamps += outs[k].clamps;
  }
  const MCEstimate e = estimate(values);
  const json summary = {{"schema_version", 1},
                        {"n_samples", cfg.n_samples},
                        {"dt", cfg.dt},
                        {"horizon", grid.horizon()},
                        {"measure", to_string(sim.measure)},
                        {"estimator", sim.estimator},
                        {"mean", e.mean},
                        {"stderr", e.std_error},
                        {"clamp_events", clamps},
                        {"seed", cfg.seed}};
  const fs::path dir = prepare_dir(c);
  if (sim.dump_paths > 0) {
    std::ostringstream csv;
    csv << "sample_id,step,time,position,exited,weight\n";
    for (std::size_t k = 0; k < std::min(sim.dump_paths, outs.size()); ++k) {
      const PathSample& p = outs[k].path;
      for (std::size_t i = 0; i <= p.last_index(); ++i) {
        const bool exited = p.exited() && i == *p.exit_index;
        csv << k << "," << i << "," << fmt(exited ? p.exit_time : p.grid.time(i)) << "," << fmt(p.positions[i]) << ","
            << (exited ? 1 : 0) << "," << fmt(p.weight) << "\n";
      }
    }
    write_text(dir / "paths.csv", csv.str());
  }
  write_text(dir / "simulate_summary.json", summary.dump(2) + "\n");
  return summary;
}

json run_expand(const ExperimentConfig& c) {
  const int N = c.expansion.order;
  if (c.mc.n_samples < 2) throw ConfigError("/mc/n_samples", "expand needs at least two samples");
  const KernelSetup s = kernel_setup(c);
  json terms = json::array();
  double parseval_sum = 0.0;
  for (int n = 0; n <= N; ++n) {
    const ParsevalTerm t = parseval_term(*s.kernel, n, s.quad);
    parseval_sum += t.value;
    terms.push_back(parseval_json(t));
  }
  const auto tables = chaos_tables(*s.kernel, N, c.mc);
  const ChaosSamples samples = sample_chaos(*c.model, c.phi, c.u, tables, c.mc, false);
  const MCEstimate res = residual_estimate(samples, N);
  json orth = json::array();
  for (int m = 0; m <= N; ++m)
    for (int n = m + 1; n <= N; ++n) {
      const MCEstimate e = product_estimate(samples, m, n);
      orth.push_back({{"m", m}, {"n", n}, {"mean", e.mean}, {"stderr", e.std_error}});
    }
  const double ef2 = second_moment(*c.model, c.phi, c.u);
  const json out = {{"schema_version", 1},
                    {"N", N},
                    {"a0", s.kernel->a0()},
                    {"parseval_terms", terms},
                    {"second_moment", ef2},
                    {"parseval_remainder", ef2 - parseval_sum},
                    {"residual", {{"mean", res.mean}, {"stderr", res.std_error}}},
                    {"orthogonality", orth},
                    {"truncated_paths", samples.truncated},
                    {"horizon", samples.horizon},
                    {"dt", c.mc.dt},
                    {"n_samples", c.mc.n_samples},
                    {"seed", c.mc.seed}};
  write_text(prepare_dir(c) / "expand.json", out.dump(2) + "\n");
  return out;
}

VerifyReport run_verify_files(const ExperimentConfig& c) {
  VerifyReport rep = run_verify(c);
  const fs::path dir = prepare_dir(c);
  write_text(dir / "report.json", report_to_json(rep, c).dump(2) + "\n");
  write_text(dir / "report.csv", report_to_csv(rep));
  return rep;
}

}  // namespace kvchaos
