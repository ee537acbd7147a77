#include "kvchaos/verify.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "kvchaos/parallel.hpp"

namespace kvchaos {

namespace {

using nlohmann::json;

// Stream tags keep the checks statistically independent under one master seed.
enum Stream : std::uint64_t {
  kSurvival = 2,
  kSurvivalHalfLine = 21,
  kClark = 5,
  kClarkRefined = 51,
  kEq1 = 6,
  kChaos = 7,
  kWiener = 9,
};

std::shared_ptr<const KilledSemigroup> make_ops(const ExperimentConfig& c) {
  return std::make_shared<KilledSemigroup>(c.model, QuadratureGrid::for_model(*c.model, c.grid, c.u));
}

MCConfig mc_for(const ExperimentConfig& c, const CheckScale& scale, std::uint64_t stream, std::size_t samples) {
  MCConfig m = c.mc;
  m.stream = stream;
  m.workers = scale.workers;
  m.n_samples = scale.reduced ? std::min(samples, c.verify.determinism_samples) : samples;
  return m;
}

std::vector<double> interior_points(const DomainModel& model, double u, double cutoff, std::size_t n) {
  const double lo = model.lower();
  const double hi = std::isfinite(model.upper()) ? model.upper() : u + cutoff;
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(n + 1);
  return x;
}

template <class Fn>
ReportRecord timed(const char* name, const char* title, Fn&& body) {
  ReportRecord r;
  r.name = name;
  r.title = title;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

json estimate_json(const MCEstimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"n_samples", e.n_samples}};
}

}  // namespace

bool ReportRecord::pass() const {
  if (!error.empty() || comparisons.empty()) return false;
  return std::all_of(comparisons.begin(), comparisons.end(), [](const Comparison& c) { return c.pass; });
}

void ReportRecord::compare(std::string label, double computed, double oracle, double tolerance) {
  const bool ok = std::abs(computed - oracle) <= tolerance;
  comparisons.push_back({std::move(label), computed, oracle, tolerance, ok});
}

void ReportRecord::within(std::string label, double computed, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  const bool ok = computed >= lo && computed <= hi;
  comparisons.push_back({std::move(label), computed, mid, 0.5 * (hi - lo), ok});
}

bool VerifyReport::pass() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const ReportRecord& r) { return r.pass(); });
}

// ---------------------------------------------------------------------------

ReportRecord check_harmonicity(const ExperimentConfig& c) {
  return timed("P1", "harmonicity of beta and T~phi", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    auto run = [&](const DomainModel& m, double u, const BoundaryFunction& phi, const std::string& tag) {
      double beta_res = 0.0, pde_res = 0.0, pde_fd = 0.0;
      for (double x : interior_points(m, u, c.grid.halfline_cutoff, v.harmonic_nodes)) {
        const double h = std::min(v.harmonic_fd_step, 0.5 * m.distance_to_boundary(x));
        const double d2 = (m.beta(x + h) - 2.0 * m.beta(x) + m.beta(x - h)) / (h * h);
        beta_res = std::max(beta_res, std::abs(d2));
        const double g = grad_op_T_tilde(m, phi, x);
        const double gl = m.grad_log_beta(x);
        pde_res = std::max(pde_res, std::abs(0.5 * hessian_op_T_tilde(m, phi, x) + gl * g));
        const double f2 =
            (op_T_tilde(m, phi, x + h) - 2.0 * op_T_tilde(m, phi, x) + op_T_tilde(m, phi, x - h)) / (h * h);
        pde_fd = std::max(pde_fd, std::abs(0.5 * f2 + gl * g));
      }
      r.compare(tag + "beta_second_difference", beta_res, 0.0, v.harmonic_tolerance);
      r.compare(tag + "generator_residual", pde_res, 0.0, v.harmonic_tolerance);
      r.info[tag + "generator_residual_fd"] = pde_fd;
    };
    run(*c.model, c.u, c.phi, "");
    const auto hl = domain_from_json(v.halfline_domain);
    run(*hl, v.halfline_u, BoundaryFunction{{1.0}}, "halfline_");
  });
}

ReportRecord check_survival(const ExperimentConfig& c, const CheckScale& scale) {
  return timed("P2", "alpha against simulated survival under Q_u", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    auto survival = [&](const DomainModel& m, double u, const std::vector<double>& times, std::uint64_t stream) {
      const MCConfig cfg = mc_for(c, scale, stream, v.survival_samples);
      const double T = *std::max_element(times.begin(), times.end());
      const TimeGrid grid = TimeGrid::covering(cfg.dt, T);
      const RngStream rng(cfg.seed, cfg.stream);
      const auto exits = parallel_map<double>(cfg.n_samples, cfg.workers, [&](std::size_t k) {
        SampleRng g = rng.sample(k);
        return simulate_Q(m, u, grid, g).exit_time;
      });
      std::vector<MCEstimate> out;
      std::vector<double> ind(exits.size());
      for (double s : times) {
        for (std::size_t k = 0; k < exits.size(); ++k) ind[k] = exits[k] > s * (1.0 + 1e-12) ? 1.0 : 0.0;
        out.push_back(estimate(ind));
      }
      return out;
    };
    const auto est = survival(*c.model, c.u, v.survival_times, kSurvival);
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double s = v.survival_times[i];
      char label[64];
      std::snprintf(label, sizeof label, "survival_s=%g", s);
      r.compare(label, est[i].mean, c.model->alpha(s, c.u), v.survival_sigmas * est[i].std_error);
      r.info[std::string(label) + "_stderr"] = est[i].std_error;
    }
    const auto hl = domain_from_json(v.halfline_domain, "/verify/p2/halfline_domain");
    const auto he = survival(*hl, v.halfline_u, {v.halfline_time}, kSurvivalHalfLine)[0];
    const double exact = std::erf(v.halfline_u / std::sqrt(2.0 * v.halfline_time));
    r.compare("halfline_survival_vs_reflection", he.mean, exact, v.survival_sigmas * he.std_error);
    r.compare("halfline_alpha_vs_reflection", hl->alpha(v.halfline_time, v.halfline_u), exact, 1e-12);
    r.info["halfline_survival_stderr"] = he.std_error;
  });
}

ReportRecord check_normalization(const ExperimentConfig& c) {
  return timed("P3", "T^k 1 equals alpha", [&](ReportRecord& r) {
    const auto ops = make_ops(c);
    const GridFunction one = GridFunction::constant(ops->grid(), 1.0);
    for (double t : c.verify.normalization_times) {
      const GridFunction a = ops->apply(t, one);
      double err = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i)
        err = std::max(err, std::abs(a.values[i] - c.model->alpha(t, ops->grid()->nodes()[i])));
      char label[64];
      std::snprintf(label, sizeof label, "max_node_error_t=%g", t);
      r.compare(label, err, 0.0, c.verify.normalization_tolerance);
    }
  });
}

ReportRecord check_semigroup(const ExperimentConfig& c) {
  return timed("P4", "semigroup law", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    const auto ops = make_ops(c);
    const auto grid = ops->grid();
    const double span = grid->upper() - grid->lower();
    std::mt19937_64 rng(c.mc.seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < v.semigroup_functions; ++k) {
      double cs[6], ph[6];
      for (int j = 0; j < 6; ++j) {
        cs[j] = coef(rng);
        ph[j] = std::numbers::pi * coef(rng);
      }
      const GridFunction f = GridFunction::from(grid, [&](double x) {
        double s = 0.0;
        for (int j = 0; j < 6; ++j) s += cs[j] * std::cos(j * std::numbers::pi * (x - grid->lower()) / span + ph[j]);
        return s;
      });
      const GridFunction lhs = ops->apply(v.semigroup_s, ops->apply(v.semigroup_t, f));
      const GridFunction rhs = ops->apply(v.semigroup_s + v.semigroup_t, f);
      double err = 0.0;
      for (std::size_t i = 0; i < lhs.size(); ++i) err = std::max(err, std::abs(lhs.values[i] - rhs.values[i]));
      r.info["error_f" + std::to_string(k)] = err;
      worst = std::max(worst, err);
    }
    r.compare("max_sup_error", worst, 0.0, v.semigroup_tolerance);
  });
}

ReportRecord check_clark(const ExperimentConfig& c, const CheckScale& scale) {
  return timed("P5", "stopped Clark representation", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    const double ef2 = second_moment(*c.model, c.phi, c.u);
    const MCConfig coarse = mc_for(c, scale, kClark, v.clark_samples);
    MCConfig fine = mc_for(c, scale, kClarkRefined, v.clark_refined_samples);
    fine.dt = coarse.dt / static_cast<double>(v.clark_refine);
    const MCEstimate rc = clark_residual(*c.model, c.u, c.phi, coarse);
    const MCEstimate rf = clark_residual(*c.model, c.u, c.phi, fine);
    r.compare("mean_square_residual", rc.mean, 0.0, v.clark_relative_tolerance * ef2);
    const double ratio = std::sqrt(rc.mean / rf.mean);
    r.within("rms_ratio_dt_over_refined", ratio, v.clark_ratio_min, v.clark_ratio_max);
    r.info["second_moment"] = ef2;
    r.info["residual"] = estimate_json(rc);
    r.info["refined_residual"] = estimate_json(rf);
    r.info["dt"] = coarse.dt;
    r.info["refined_dt"] = fine.dt;
  });
}

ReportRecord check_eq1(const ExperimentConfig& c, const CheckScale& scale) {
  return timed("P6", "conditioned identity, psi(x)=x and g=1", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    const auto ops = make_ops(c);
    const MCConfig cfg = mc_for(c, scale, kEq1, v.eq1_samples);
    const Eq1Result e = eq1_check(
        *ops, c.u, v.eq1_t, [](double x) { return x; }, [](double) { return 1.0; }, cfg, v.eq1_time_nodes);
    r.compare("lhs_minus_rhs", e.lhs.mean, e.rhs, v.eq1_sigmas * e.lhs.std_error + v.eq1_tolerance);
    r.info["lhs"] = estimate_json(e.lhs);
    r.info["rhs"] = e.rhs;
    r.info["rhs_quadrature_error"] = e.rhs_quadrature_error;
    r.info["failed_paths"] = e.failed_paths;
    r.info["clamp_events"] = e.clamp_events;
  });
}

std::vector<ReportRecord> check_expansion(const ExperimentConfig& c, const CheckScale& scale) {
  const VerifySettings& v = c.verify;
  constexpr int kOrder = 2;
  ReportRecord p7, p8;
  p7.name = "P7";
  p7.title = "Parseval identity against the truncated expansion";
  p8.name = "P8";
  p8.title = "orthogonality and isometry of the multiple integrals";
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto ops = make_ops(c);
    const ChaosKernel kernel(ops, c.phi, c.u);
    MCConfig cfg = mc_for(c, scale, kChaos, v.chaos_samples);
    if (scale.reduced) cfg.horizon = v.determinism_horizon;
    const SimplexQuadrature quad = SimplexQuadrature::for_base_point(
        *c.model, c.u, c.expansion.simplex_nodes, c.expansion.alpha_cutoff, c.expansion.max_horizon);
    std::vector<ParsevalTerm> terms;
    for (int n = 0; n <= kOrder; ++n) terms.push_back(parseval_term(kernel, n, quad));
    const auto tables = chaos_tables(kernel, kOrder, cfg);
    const ChaosSamples s = sample_chaos(*c.model, c.phi, c.u, tables, cfg, false);

    const double ef2 = second_moment(*c.model, c.phi, c.u);
    double oracle = ef2;
    json pj = json::array();
    for (const auto& t : terms) {
      oracle -= t.value;
      pj.push_back({{"order", t.order}, {"value", t.value}, {"tail_bound", t.tail_bound}});
    }
    const MCEstimate res = residual_estimate(s, kOrder);
    p7.compare("residual_vs_parseval_remainder", res.mean, oracle,
               v.chaos_sigmas * res.std_error + v.parseval_allowance * std::abs(oracle));
    p7.info["second_moment"] = ef2;
    p7.info["parseval_terms"] = pj;
    p7.info["residual"] = estimate_json(res);
    p7.info["truncated_paths"] = s.truncated;
    p7.info["horizon"] = s.horizon;
    for (int n = 0; n < kOrder; ++n) p7.info["residual_N" + std::to_string(n)] = estimate_json(residual_estimate(s, n));

    for (auto [m, n] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
      const MCEstimate e = product_estimate(s, m, n);
      const std::string label = "E[I" + std::to_string(m) + " I" + std::to_string(n) + "]";
      p8.compare(label, e.mean, 0.0, v.chaos_sigmas * e.std_error);
      p8.info[label + "_stderr"] = e.std_error;
    }
    for (int n = 1; n <= kOrder; ++n) {
      const MCEstimate e = product_estimate(s, n, n);
      const double target = terms[static_cast<std::size_t>(n)].value;
      const std::string label = "E[I" + std::to_string(n) + "^2]";
      p8.compare(label, e.mean, target, v.chaos_sigmas * e.std_error + v.isometry_allowance * target);
      p8.info[label + "_stderr"] = e.std_error;
    }
  } catch (const std::exception& e) {
    p7.error = p8.error = e.what();
  }
  p7.runtime_s = p8.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {p7, p8};
}

ReportRecord check_wiener(const ExperimentConfig& c, const CheckScale& scale) {
  return timed("P9", "increments of w^_t under Q_{t,u} are Wiener increments", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    const MCConfig cfg = mc_for(c, scale, kWiener, v.wiener_samples);
    const TimeGrid grid(cfg.dt, conditioning_steps(TimeGrid::covering(cfg.dt, v.wiener_t), v.wiener_t));
    if (grid.steps < 2 * v.wiener_probes) throw std::invalid_argument("P9: too few steps for the probes");
    std::vector<std::size_t> probes(v.wiener_probes);
    for (std::size_t k = 0; k < probes.size(); ++k)
      probes[k] = std::min(grid.steps - 2, (2 * k + 1) * grid.steps / (2 * probes.size()));
    struct Out {
      bool failed = false;
      std::size_t clamps = 0;
      std::vector<double> z, next;
    };
    const RngStream rng(cfg.seed, cfg.stream);
    const double sd = std::sqrt(cfg.dt);
    const auto paths = parallel_map<Out>(cfg.n_samples, cfg.workers, [&](std::size_t k) {
      SampleRng g = rng.sample(k);
      const PathSample p = simulate_Qt(*c.model, c.u, v.wiener_t, grid, g);
      Out o;
      o.clamps = p.clamp_events;
      if (p.exited()) {
        o.failed = true;
        return o;
      }
      const auto inc = increments_hat(*c.model, p, v.wiener_t);
      for (std::size_t i : probes) {
        o.z.push_back(inc[i] / sd);
        o.next.push_back(inc[i + 1] / sd);
      }
      return o;
    });
    std::vector<double> z, next;
    std::size_t failed = 0, clamps = 0;
    for (const auto& o : paths) {
      failed += o.failed;
      clamps += o.clamps;
      z.insert(z.end(), o.z.begin(), o.z.end());
      next.insert(next.end(), o.next.begin(), o.next.end());
    }
    const MCEstimate mean = estimate(z);
    std::vector<double> sq(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) sq[i] = (z[i] - mean.mean) * (z[i] - mean.mean);
    const MCEstimate var = estimate(sq);
    const GoodnessOfFit ks = ks_test_standard_normal(z);
    const double corr = sample_correlation(z, next);
    const double n = static_cast<double>(z.size());
    r.compare("mean", mean.mean, 0.0, v.wiener_sigmas * mean.std_error);
    r.compare("variance", var.mean, 1.0, v.wiener_sigmas * var.std_error);
    r.within("ks_p_value", ks.p_value, v.wiener_level, 1.0);
    r.compare("adjacent_correlation", corr, 0.0, 3.0 / std::sqrt(n));
    r.within("failure_rate", static_cast<double>(failed) / static_cast<double>(cfg.n_samples), 0.0,
             v.wiener_max_failure_rate);
    r.info["pooled_increments"] = z.size();
    r.info["ks_statistic"] = ks.statistic;
    r.info["failed_paths"] = failed;
    r.info["clamp_events"] = clamps;
  });
}

ReportRecord check_gradients(const ExperimentConfig& c) {
  return timed("P10", "analytic gradients against central differences", [&](ReportRecord& r) {
    const VerifySettings& v = c.verify;
    const auto ops = make_ops(c);
    const DomainModel& m = *c.model;
    const double lo = m.lower();
    const double hi = std::isfinite(m.upper()) ? m.upper() : c.u + c.grid.halfline_cutoff;
    const double margin = 0.05 * (hi - lo);
    std::mt19937_64 rng(c.mc.seed + 10);
    std::uniform_real_distribution<double> pos(lo + margin, hi - margin);
    std::uniform_real_distribution<double> time(0.05, 1.0);
    const double h = v.gradient_fd_step;
    const GridFunction f = GridFunction::from(ops->grid(), [&](double x) { return std::sin(3.0 * (x - lo) / (hi - lo)) + x; });
    auto rel = [](double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(a)); };
    double e_beta = 0, e_alpha = 0, e_tilde = 0, e_tk = 0;
    for (std::size_t k = 0; k < v.gradient_points; ++k) {
      const double x = pos(rng);
      const double s = time(rng);
      e_beta = std::max(e_beta, rel(m.grad_log_beta(x), (std::log(m.beta(x + h)) - std::log(m.beta(x - h))) / (2 * h)));
      e_alpha = std::max(e_alpha, rel(m.grad_log_alpha(s, x),
                                      (std::log(m.alpha(s, x + h)) - std::log(m.alpha(s, x - h))) / (2 * h)));
      e_tilde = std::max(e_tilde, rel(grad_op_T_tilde(m, c.phi, x),
                                      (op_T_tilde(m, c.phi, x + h) - op_T_tilde(m, c.phi, x - h)) / (2 * h)));
      e_tk = std::max(e_tk, rel(ops->grad_tilde_at(s, f, x),
                                (ops->apply_tilde_at(s, f, x + h) - ops->apply_tilde_at(s, f, x - h)) / (2 * h)));
    }
    r.compare("grad_log_beta", e_beta, 0.0, v.gradient_tolerance);
    r.compare("grad_log_alpha", e_alpha, 0.0, v.gradient_tolerance);
    r.compare("grad_T_tilde", e_tilde, 0.0, v.gradient_tolerance);
    r.compare("grad_Tk_tilde", e_tk, 0.0, v.gradient_tolerance);
  });
}

namespace {

// Bit patterns of every number a record reports, runtime excluded.
std::vector<std::uint64_t> fingerprint(const ReportRecord& r) {
  std::vector<std::uint64_t> out;
  for (const auto& c : r.comparisons) {
    out.push_back(std::bit_cast<std::uint64_t>(c.computed));
    out.push_back(std::bit_cast<std::uint64_t>(c.oracle));
    out.push_back(std::bit_cast<std::uint64_t>(c.tolerance));
  }
  const std::string info = r.info.dump();
  for (char ch : info) out.push_back(static_cast<unsigned char>(ch));
  if (!r.error.empty()) out.push_back(~0ULL);
  return out;
}

}  // namespace

ReportRecord check_determinism(const ExperimentConfig& c) {
  return timed("Determinism", "reruns with a different worker count are bit-identical", [&](ReportRecord& r) {
    const std::size_t other = c.verify.determinism_workers;
    const CheckScale one{1, true}, many{other, true};
    auto same = [&](const std::string& label, const std::vector<ReportRecord>& a, const std::vector<ReportRecord>& b) {
      bool ok = a.size() == b.size();
      for (std::size_t i = 0; ok && i < a.size(); ++i) ok = fingerprint(a[i]) == fingerprint(b[i]) && a[i].error.empty();
      r.compare(label, ok ? 0.0 : 1.0, 0.0, 0.0);
    };
    same("P1", {check_harmonicity(c)}, {check_harmonicity(c)});
    same("P2", {check_survival(c, one)}, {check_survival(c, many)});
    same("P3", {check_normalization(c)}, {check_normalization(c)});
    same("P4", {check_semigroup(c)}, {check_semigroup(c)});
    same("P5", {check_clark(c, one)}, {check_clark(c, many)});
    same("P6", {check_eq1(c, one)}, {check_eq1(c, many)});
    same("P7/P8", check_expansion(c, one), check_expansion(c, many));
    same("P9", {check_wiener(c, one)}, {check_wiener(c, many)});
    same("P10", {check_gradients(c)}, {check_gradients(c)});
    r.info["reduced_samples"] = c.verify.determinism_samples;
    r.info["workers"] = {1, other};
  });
}

VerifyReport run_verify(const ExperimentConfig& c) {
  VerifyReport rep;
  const CheckScale full{c.mc.workers, false};
  rep.records.push_back(check_harmonicity(c));
  rep.records.push_back(check_survival(c, full));
  rep.records.push_back(check_normalization(c));
  rep.records.push_back(check_semigroup(c));
  rep.records.push_back(check_clark(c, full));
  rep.records.push_back(check_eq1(c, full));
  for (auto& r : check_expansion(c, full)) rep.records.push_back(std::move(r));
  rep.records.push_back(check_wiener(c, full));
  rep.records.push_back(check_gradients(c));
  rep.records.push_back(check_determinism(c));
  return rep;
}

json report_to_json(const VerifyReport& r, const ExperimentConfig& c) {
  json checks = json::array();
  for (const auto& rec : r.records) {
    json cmp = json::array();
    for (const auto& x : rec.comparisons)
      cmp.push_back({{"label", x.label},
                     {"computed", x.computed},
                     {"oracle", x.oracle},
                     {"tolerance", x.tolerance},
                     {"pass", x.pass}});
    json j = {{"name", rec.name},
              {"title", rec.title},
              {"pass", rec.pass()},
              {"comparisons", cmp},
              {"info", rec.info},
              {"runtime_s", rec.runtime_s}};
    if (!rec.error.empty()) j["error"] = rec.error;
    checks.push_back(std::move(j));
  }
  return {{"schema_version", 1}, {"pass", r.pass()}, {"config", config_to_json(c)}, {"checks", checks}};
}

std::string report_to_csv(const VerifyReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "check,label,computed,oracle,tolerance,pass,runtime_s\n";
  for (const auto& rec : r.records) {
    if (rec.comparisons.empty()) out << rec.name << ",error,,,,false," << rec.runtime_s << "\n";
    for (const auto& x : rec.comparisons) {
      out << rec.name << "," << x.label << "," << x.computed << "," << x.oracle << "," << x.tolerance << ","
          << (x.pass && rec.error.empty() ? "true" : "false") << "," << rec.runtime_s << "\n";
    }
  }
  return out.str();
}

}  // namespace kvchaos
