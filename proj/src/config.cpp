#include "kvchaos/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <stdexcept>

namespace kvchaos {

namespace {

using nlohmann::json;

// Reads optional fields of one JSON object, keeping the defaults for absent keys.
class Section {
 public:
  Section(const json& parent, const std::string& key, const std::string& parent_path)
      : path_(parent_path + "/" + key) {
    if (parent.contains(key)) {
      node_ = &parent.at(key);
      if (!node_->is_object()) throw ConfigError(path_, "expected an object");
    }
  }
  Section(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node_->is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const char* key) const { return node_ && node_->contains(key); }
  const json& at(const char* key) const { return node_->at(key); }

  void allow(std::initializer_list<const char*> keys) const {
    if (!node_) return;
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : node_->items())
      if (!ok.count(k)) throw ConfigError(path_ + "/" + k, "unknown field");
  }

  void number(const char* key, double& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
  }
  void positive(const char* key, double& out) const {
    number(key, out);
    if (!(out > 0.0)) throw ConfigError(field(key), "must be positive");
  }
  void nonnegative(const char* key, double& out) const {
    number(key, out);
    if (!(out >= 0.0)) throw ConfigError(field(key), "must be non-negative");
  }
  void count(const char* key, std::size_t& out, std::size_t min = 0) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(field(key), "expected a non-negative integer");
    out = v.get<std::size_t>();
    if (out < min) throw ConfigError(field(key), "must be at least " + std::to_string(min));
  }
  void seed(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void flag(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = at(key).get<bool>();
  }
  void text(const char* key, std::string& out) const {
    if (!has(key)) return;
    if (!at(key).is_string()) throw ConfigError(field(key), "expected a string");
    out = at(key).get<std::string>();
  }
  void times(const char* key, std::vector<double>& out) const {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a non-empty array of times");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !(v[i].get<double>() > 0.0))
        throw ConfigError(field(key) + "/" + std::to_string(i), "expected a positive number");
      out.push_back(v[i].get<double>());
    }
  }

  std::string field(const char* key) const { return path_ + "/" + key; }

 private:
  const json* node_ = nullptr;
  std::string path_;
};

void check_interior(const DomainModel& m, double u, const std::string& field) {
  if (!m.is_interior(u)) throw ConfigError(field, "base point must lie strictly inside the domain");
}

void read_verify(const Section& s, VerifySettings& v) {
  s.allow({"p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "determinism"});
  const json empty = json::object();
  auto sub = [&](const char* key) { return s.has(key) ? Section(s.at(key), s.field(key)) : Section(empty, s.field(key)); };

  const Section p1 = sub("p1");
  p1.allow({"nodes", "tolerance", "fd_step"});
  p1.count("nodes", v.harmonic_nodes, 2);
  p1.positive("tolerance", v.harmonic_tolerance);
  p1.positive("fd_step", v.harmonic_fd_step);

  const Section p2 = sub("p2");
  p2.allow({"times", "n_samples", "sigmas", "halfline_domain", "halfline_u", "halfline_time"});
  p2.times("times", v.survival_times);
  p2.count("n_samples", v.survival_samples, 2);
  p2.positive("sigmas", v.survival_sigmas);
  if (p2.has("halfline_domain")) {
    v.halfline_domain = p2.at("halfline_domain");
    const auto hl = domain_from_json(v.halfline_domain, p2.field("halfline_domain"));
    if (hl->kind() != "halfline") throw ConfigError(p2.field("halfline_domain") + "/kind", "expected a half-line");
  }
  p2.number("halfline_u", v.halfline_u);
  if (!(v.halfline_u > 0.0)) throw ConfigError(p2.field("halfline_u"), "must be positive");
  p2.positive("halfline_time", v.halfline_time);

  const Section p3 = sub("p3");
  p3.allow({"times", "tolerance"});
  p3.times("times", v.normalization_times);
  p3.positive("tolerance", v.normalization_tolerance);

  const Section p4 = sub("p4");
  p4.allow({"s", "t", "functions", "tolerance"});
  p4.positive("s", v.semigroup_s);
  p4.positive("t", v.semigroup_t);
  p4.count("functions", v.semigroup_functions, 1);
  p4.positive("tolerance", v.semigroup_tolerance);

  const Section p5 = sub("p5");
  p5.allow({"n_samples", "relative_tolerance", "refine", "refined_samples", "ratio_min", "ratio_max"});
  p5.count("n_samples", v.clark_samples, 2);
  p5.positive("relative_tolerance", v.clark_relative_tolerance);
  p5.count("refine", v.clark_refine, 2);
  p5.count("refined_samples", v.clark_refined_samples, 2);
  p5.positive("ratio_min", v.clark_ratio_min);
  p5.positive("ratio_max", v.clark_ratio_max);
  if (!(v.clark_ratio_min < v.clark_ratio_max)) throw ConfigError(p5.field("ratio_max"), "must exceed ratio_min");

  const Section p6 = sub("p6");
  p6.allow({"t", "n_samples", "sigmas", "tolerance", "time_nodes"});
  p6.positive("t", v.eq1_t);
  p6.count("n_samples", v.eq1_samples, 2);
  p6.positive("sigmas", v.eq1_sigmas);
  p6.nonnegative("tolerance", v.eq1_tolerance);
  p6.count("time_nodes", v.eq1_time_nodes, 2);

  const Section p7 = sub("p7");
  p7.allow({"n_samples", "sigmas", "discretization_allowance"});
  p7.count("n_samples", v.chaos_samples, 2);
  p7.positive("sigmas", v.chaos_sigmas);
  p7.nonnegative("discretization_allowance", v.parseval_allowance);

  const Section p8 = sub("p8");
  p8.allow({"isometry_allowance"});
  p8.nonnegative("isometry_allowance", v.isometry_allowance);

  const Section p9 = sub("p9");
  p9.allow({"t", "n_samples", "probes", "level", "sigmas", "max_failure_rate"});
  p9.positive("t", v.wiener_t);
  p9.count("n_samples", v.wiener_samples, 2);
  p9.count("probes", v.wiener_probes, 1);
  p9.positive("level", v.wiener_level);
  p9.positive("sigmas", v.wiener_sigmas);
  p9.nonnegative("max_failure_rate", v.wiener_max_failure_rate);

  const Section p10 = sub("p10");
  p10.allow({"points", "tolerance", "fd_step"});
  p10.count("points", v.gradient_points, 1);
  p10.positive("tolerance", v.gradient_tolerance);
  p10.positive("fd_step", v.gradient_fd_step);

  const Section det = sub("determinism");
  det.allow({"n_samples", "workers", "horizon"});
  det.count("n_samples", v.determinism_samples, 2);
  det.count("workers", v.determinism_workers, 1);
  det.positive("horizon", v.determinism_horizon);
}

json verify_to_json(const VerifySettings& v) {
  return {
      {"p1", {{"nodes", v.harmonic_nodes}, {"tolerance", v.harmonic_tolerance}, {"fd_step", v.harmonic_fd_step}}},
      {"p2",
       {{"times", v.survival_times},
        {"n_samples", v.survival_samples},
        {"sigmas", v.survival_sigmas},
        {"halfline_domain", domain_from_json(v.halfline_domain, "/verify/p2/halfline_domain")->to_json()},
        {"halfline_u", v.halfline_u},
        {"halfline_time", v.halfline_time}}},
      {"p3", {{"times", v.normalization_times}, {"tolerance", v.normalization_tolerance}}},
      {"p4",
       {{"s", v.semigroup_s},
        {"t", v.semigroup_t},
        {"functions", v.semigroup_functions},
        {"tolerance", v.semigroup_tolerance}}},
      {"p5",
       {{"n_samples", v.clark_samples},
        {"relative_tolerance", v.clark_relative_tolerance},
        {"refine", v.clark_refine},
        {"refined_samples", v.clark_refined_samples},
        {"ratio_min", v.clark_ratio_min},
        {"ratio_max", v.clark_ratio_max}}},
      {"p6",
       {{"t", v.eq1_t},
        {"n_samples", v.eq1_samples},
        {"sigmas", v.eq1_sigmas},
        {"tolerance", v.eq1_tolerance},
        {"time_nodes", v.eq1_time_nodes}}},
      {"p7",
       {{"n_samples", v.chaos_samples},
        {"sigmas", v.chaos_sigmas},
        {"discretization_allowance", v.parseval_allowance}}},
      {"p8", {{"isometry_allowance", v.isometry_allowance}}},
      {"p9",
       {{"t", v.wiener_t},
        {"n_samples", v.wiener_samples},
        {"probes", v.wiener_probes},
        {"level", v.wiener_level},
        {"sigmas", v.wiener_sigmas},
        {"max_failure_rate", v.wiener_max_failure_rate}}},
      {"p10", {{"points", v.gradient_points}, {"tolerance", v.gradient_tolerance}, {"fd_step", v.gradient_fd_step}}},
      {"determinism",
       {{"n_samples", v.determinism_samples},
        {"workers", v.determinism_workers},
        {"horizon", v.determinism_horizon}}},
  };
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  const Section root(j, "");
  root.allow({"domain", "u", "phi", "grid", "mc", "expansion", "simulate", "verify", "output_dir"});
  ExperimentConfig c;
  if (!j.contains("domain")) throw ConfigError("/domain", "missing required field");
  c.model = domain_from_json(j.at("domain"), "/domain");
  c.domain_json = c.model->to_json();

  if (!j.contains("u")) throw ConfigError("/u", "missing required field");
  root.number("u", c.u);
  check_interior(*c.model, c.u, "/u");

  if (!j.contains("phi")) throw ConfigError("/phi", "missing required field");
  c.phi = boundary_function_from_json(*c.model, j.at("phi"), "/phi");
  for (std::size_t i = 0; i < c.phi.values.size(); ++i)
    if (!std::isfinite(c.phi.values[i])) throw ConfigError("/phi/" + c.model->boundary_labels()[i], "must be finite");

  const Section grid(j, "grid", "");
  grid.allow({"nodes", "halfline_cutoff"});
  grid.count("nodes", c.grid.nodes, 2);
  grid.positive("halfline_cutoff", c.grid.halfline_cutoff);

  const Section mc(j, "mc", "");
  mc.allow({"n_samples", "dt", "horizon", "horizon_alpha", "max_horizon", "seed", "sampler", "strides"});
  mc.count("n_samples", c.mc.n_samples);
  mc.positive("dt", c.mc.dt);
  mc.nonnegative("horizon", c.mc.horizon);
  mc.positive("horizon_alpha", c.mc.horizon_alpha);
  mc.positive("max_horizon", c.mc.max_horizon);
  mc.seed("seed", c.mc.seed);
  if (mc.has("sampler")) {
    std::string s;
    mc.text("sampler", s);
    if (s != "P" && s != "Q") throw ConfigError(mc.field("sampler"), "expected \"P\" or \"Q\"");
    c.mc.sampler = measure_from_string(s);
  }
  if (mc.has("strides")) {
    const json& st = mc.at("strides");
    if (!st.is_array() || st.size() != 3) throw ConfigError(mc.field("strides"), "expected three positive integers");
    std::size_t* dst[3] = {&c.mc.stride1, &c.mc.stride2, &c.mc.stride3};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!st[i].is_number_unsigned() || st[i].get<std::size_t>() == 0)
        throw ConfigError(mc.field("strides") + "/" + std::to_string(i), "expected a positive integer");
      *dst[i] = st[i].get<std::size_t>();
    }
  }

  const Section ex(j, "expansion", "");
  ex.allow({"N", "simplex_nodes", "alpha_cutoff", "max_horizon"});
  if (ex.has("N")) {
    const json& n = ex.at("N");
    if (!n.is_number_integer() || n.get<long long>() < 0 || n.get<long long>() > kMaxChaosOrder)
      throw ConfigError(ex.field("N"), "expansion order must be an integer in [0, 3]");
    c.expansion.order = n.get<int>();
  }
  ex.count("simplex_nodes", c.expansion.simplex_nodes, 1);
  ex.positive("alpha_cutoff", c.expansion.alpha_cutoff);
  ex.positive("max_horizon", c.expansion.max_horizon);

  const Section sim(j, "simulate", "");
  sim.allow({"measure", "estimator", "time", "dump_paths", "bridge"});
  if (sim.has("measure")) {
    std::string s;
    sim.text("measure", s);
    if (s != "P" && s != "Q" && s != "Qt") throw ConfigError(sim.field("measure"), "expected \"P\", \"Q\" or \"Qt\"");
    c.simulate.measure = measure_from_string(s);
  }
  sim.text("estimator", c.simulate.estimator);
  if (c.simulate.estimator != "survival" && c.simulate.estimator != "phi" && c.simulate.estimator != "position")
    throw ConfigError(sim.field("estimator"), "expected \"survival\", \"phi\" or \"position\"");
  if (c.simulate.measure == Measure::Qt && c.simulate.estimator != "position")
    throw ConfigError(sim.field("estimator"), "conditioned paths support only the \"position\" estimator");
  sim.positive("time", c.simulate.time);
  sim.count("dump_paths", c.simulate.dump_paths);
  sim.flag("bridge", c.simulate.bridge);

  const Section ver(j, "verify", "");
  read_verify(ver, c.verify);

  root.text("output_dir", c.output_dir);
  if (c.output_dir.empty()) throw ConfigError("/output_dir", "must not be empty");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json phi = boundary_function_to_json(*c.model, c.phi);
  return {
      {"domain", c.model->to_json()},
      {"u", c.u},
      {"phi", phi},
      {"grid", {{"nodes", c.grid.nodes}, {"halfline_cutoff", c.grid.halfline_cutoff}}},
      {"mc",
       {{"n_samples", c.mc.n_samples},
        {"dt", c.mc.dt},
        {"horizon", c.mc.horizon},
        {"horizon_alpha", c.mc.horizon_alpha},
        {"max_horizon", c.mc.max_horizon},
        {"seed", c.mc.seed},
        {"sampler", to_string(c.mc.sampler)},
        {"strides", {c.mc.stride1, c.mc.stride2, c.mc.stride3}}}},
      {"expansion",
       {{"N", c.expansion.order},
        {"simplex_nodes", c.expansion.simplex_nodes},
        {"alpha_cutoff", c.expansion.alpha_cutoff},
        {"max_horizon", c.expansion.max_horizon}}},
      {"simulate",
       {{"measure", to_string(c.simulate.measure)},
        {"estimator", c.simulate.estimator},
        {"time", c.simulate.time},
        {"dump_paths", c.simulate.dump_paths},
        {"bridge", c.simulate.bridge}}},
      {"verify", verify_to_json(c.verify)},
      {"output_dir", c.output_dir},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace kvchaos
