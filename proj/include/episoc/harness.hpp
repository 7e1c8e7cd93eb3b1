#pragma once

#include "episoc/baselines.hpp"
#include "episoc/errors.hpp"
#include "episoc/graph.hpp"
#include "episoc/metrics.hpp"
#include "episoc/simulator.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace episoc
{

struct ExperimentConfig
{
  std::string graph_path;
  ModelParams mp;
  std::vector<double> q_lambda{1.0};
  std::vector<double> q_x{400.0};
  double eta = 1.0;
  double t_final = 10.0;
  std::size_t runs_per_policy = 50;
  std::uint64_t base_seed = 1;
  std::vector<PolicyKind> policies{all_policies.begin(), all_policies.end()};
  std::vector<double> q_x_sweep;
  std::string output_dir = "out";
  std::size_t initial_infected = 10;
  // 0 means "same as runs_per_policy"
  std::size_t calibration_batch = 0;
  double calibration_tolerance = default_calibration_tolerance;
  std::size_t grid_points = default_grid_points;
  std::size_t jobs = 1;
  bool write_events = true;
  bool debug_checks = false;

  std::size_t calibration_runs() const
  {
    return calibration_batch ? calibration_batch : runs_per_policy;
  }

  ControlParams control(std::size_t n) const
  {
    auto widen = [n](std::vector<double> const &v, char const *key) {
      if (v.size() == 1)
        return std::vector<double>(n, v.front());
      if (v.size() != n)
        throw config_error(std::string(key) + ": expected 1 or " + std::to_string(n) +
                           " values, got " + std::to_string(v.size()));
      return v;
    };
    return {widen(q_lambda, "q_lambda"), widen(q_x, "q_x"), eta};
  }
};

namespace detail
{

inline std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(std::string const &key, std::string const &v)
{
  try
  {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size())
      throw std::invalid_argument(v);
    return d;
  }
  catch (std::exception const &)
  {
    throw config_error(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(std::string const &key, std::string const &v)
{
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw config_error(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(std::string const &key, std::string const &v)
{
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw config_error(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(std::string const &v)
{
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v)
  {
    if (ch == ',' || ch == ' ' || ch == '\t')
    {
      if (!cur.empty())
        out.push_back(cur);
      cur.clear();
    }
    else
      cur.push_back(ch);
  }
  if (!cur.empty())
    out.push_back(cur);
  return out;
}

inline std::vector<double> parse_doubles(std::string const &key, std::string const &v)
{
  std::vector<double> out;
  for (auto const &tok : split_list(v))
    out.push_back(parse_double(key, tok));
  if (out.empty())
    throw config_error(key + ": empty list");
  return out;
}

} // namespace detail

/// Flat `key = value` configuration, one key per line, `#` comments.
inline ExperimentConfig parse_config(std::string_view text)
{
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size())
  {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos)
      nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (auto h = line.find('#'); h != std::string_view::npos)
      line = line.substr(0, h);
    auto t = detail::trim(line);
    if (t.empty())
      continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    auto val = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty())
      throw config_error("line " + std::to_string(lineno) + ": missing key");
    if (!kv.emplace(key, val).second)
      throw config_error(key + ": given more than once");
  }

  for (char const *req : {"beta", "gamma", "delta", "rho", "eta"})
    if (!kv.count(req))
      throw config_error(std::string(req) + ": required key missing");

  for (auto const &[key, val] : kv)
  {
    if (key == "graph")
      cfg.graph_path = val;
    else if (key == "beta")
      cfg.mp.beta = detail::parse_double(key, val);
    else if (key == "gamma")
      cfg.mp.gamma = detail::parse_double(key, val);
    else if (key == "delta")
      cfg.mp.delta = detail::parse_double(key, val);
    else if (key == "rho")
      cfg.mp.rho = detail::parse_double(key, val);
    else if (key == "eta")
      cfg.eta = detail::parse_double(key, val);
    else if (key == "q_lambda")
      cfg.q_lambda = detail::parse_doubles(key, val);
    else if (key == "q_x")
      cfg.q_x = detail::parse_doubles(key, val);
    else if (key == "t_final")
      cfg.t_final = detail::parse_double(key, val);
    else if (key == "runs_per_policy")
      cfg.runs_per_policy = detail::parse_uint(key, val);
    else if (key == "base_seed")
      cfg.base_seed = detail::parse_uint(key, val);
    else if (key == "policies")
    {
      cfg.policies.clear();
      for (auto const &name : detail::split_list(val))
      {
        auto k = parse_policy(name);
        if (!k)
          throw config_error(key + ": unknown policy '" + name + "'");
        cfg.policies.push_back(*k);
      }
      if (cfg.policies.empty())
        throw config_error(key + ": empty list");
    }
    else if (key == "q_x_sweep")
      cfg.q_x_sweep = detail::parse_doubles(key, val);
    else if (key == "output_dir")
      cfg.output_dir = val;
    else if (key == "initial_infected")
      cfg.initial_infected = detail::parse_uint(key, val);
    else if (key == "calibration_batch")
      cfg.calibration_batch = detail::parse_uint(key, val);
    else if (key == "calibration_tolerance")
      cfg.calibration_tolerance = detail::parse_double(key, val);
    else if (key == "grid_points")
      cfg.grid_points = detail::parse_uint(key, val);
    else if (key == "jobs")
      cfg.jobs = detail::parse_uint(key, val);
    else if (key == "write_events")
      cfg.write_events = detail::parse_bool(key, val);
    else if (key == "debug_checks")
      cfg.debug_checks = detail::parse_bool(key, val);
    else
      throw config_error(key + ": unknown key");
  }

  auto nonneg = [](char const *key, double v) {
    if (!(v >= 0))
      throw config_error(std::string(key) + ": must be non-negative");
  };
  nonneg("beta", cfg.mp.beta);
  nonneg("gamma", cfg.mp.gamma);
  nonneg("delta", cfg.mp.delta);
  nonneg("rho", cfg.mp.rho);
  if (cfg.mp.gamma > cfg.mp.beta)
    throw config_error("gamma: must not exceed beta");
  if (!(cfg.eta > 0))
    throw config_error("eta: must be strictly positive");
  for (double q : cfg.q_lambda)
    if (!(q > 0))
      throw config_error("q_lambda: entries must be positive");
  for (double q : cfg.q_x)
    nonneg("q_x", q);
  for (double q : cfg.q_x_sweep)
    nonneg("q_x_sweep", q);
  if (!(cfg.t_final > 0))
    throw config_error("t_final: must be positive");
  if (cfg.runs_per_policy < 1)
    throw config_error("runs_per_policy: must be at least 1");
  if (cfg.initial_infected < 1)
    throw config_error("initial_infected: must be at least 1");
  if (!(cfg.calibration_tolerance > 0))
    throw config_error("calibration_tolerance: must be positive");
  if (cfg.jobs < 1)
    throw config_error("jobs: must be at least 1");
  return cfg;
}

inline ExperimentConfig parse_config_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
    throw config_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline constexpr std::uint64_t seed_block = 1000000;

/// Simulation seed of run r under policy p. Initial conditions use
/// base_seed + r for every policy.
inline std::uint64_t run_seed(std::uint64_t base, PolicyKind p, std::size_t r)
{
  return base + policy_index(p) * seed_block + r;
}

using Logger = std::function<void(std::string const &)>;

/// Shared read-only inputs of one experiment.
struct Experiment
{
  ExperimentConfig cfg;
  Network net;
  ControlParams cp;
  std::vector<double> drop_scores;
  Logger log = [](std::string const &) {};

  Experiment(ExperimentConfig c, Network n)
      : cfg(std::move(c)), net(std::move(n)), cp(cfg.control(net.node_count())),
        drop_scores(spectral_drop_scores(net))
  {
    cfg.mp.validate();
    cp.validate(net.node_count());
    if (cfg.initial_infected > net.node_count())
      throw config_error("initial_infected: exceeds node count");
  }

  RunConfig run_config(PolicySpec const &spec, std::size_t r) const
  {
    RunConfig rc;
    rc.t_final = cfg.t_final;
    rc.seed = run_seed(cfg.base_seed, spec.kind, r);
    rc.init_seed = cfg.base_seed + r;
    rc.initial_infected_count = cfg.initial_infected;
    rc.policy = spec;
    rc.mp = cfg.mp;
    rc.cp = cp;
    rc.grid_points = cfg.grid_points;
    rc.debug_checks = cfg.debug_checks;
    return rc;
  }

  std::vector<RunResult> batch(PolicySpec const &spec, std::size_t runs) const
  {
    return parallel_map<RunResult>(runs, cfg.jobs, [&](std::size_t r) {
      return run(run_config(spec, r), net, drop_scores);
    });
  }

  double mean_treatments(PolicySpec const &spec, std::size_t runs) const
  {
    auto out = parallel_map<long>(runs, cfg.jobs, [&](std::size_t r) {
      return run(run_config(spec, r), net, drop_scores).metrics.total_treatments;
    });
    double acc = 0;
    for (long v : out)
      acc += static_cast<double>(v);
    return acc / static_cast<double>(runs);
  }
};

struct PolicyBatch
{
  PolicySpec spec;
  std::vector<RunResult> runs;
  BatchStats stats;
};

struct CalibrationRow
{
  PolicyKind policy;
  double scale = 1;
  double target = 0;
  double achieved = 0;
  std::size_t batch = 0;
  std::uint64_t seed0 = 0;
  // achieved within the calibration tolerance of target
  bool matched = false;
};

struct CompareResult
{
  double target = 0;
  std::vector<PolicyBatch> batches;
  std::vector<CalibrationRow> calibration;
  // One diagnostic per baseline whose budget could not be matched. Such a
  // baseline is still run, at the closest scale found.
  std::vector<std::string> failures;

  bool complete() const noexcept { return failures.empty(); }
};

inline PolicyBatch run_policy_batch(Experiment const &ex, PolicySpec const &spec)
{
  PolicyBatch pb;
  pb.spec = spec;
  pb.runs = ex.batch(spec, ex.cfg.runs_per_policy);
  std::vector<MetricsSummary> ms;
  for (auto const &r : pb.runs)
    ms.push_back(r.metrics);
  pb.stats = aggregate(ms);
  return pb;
}

/// SOC batch, budget target, calibrated baselines, comparison batches.
inline CompareResult run_compare(Experiment const &ex)
{
  CompareResult out;
  auto const &cfg = ex.cfg;
  std::vector<PolicyKind> order{PolicyKind::SOC};
  for (auto k : cfg.policies)
    if (k != PolicyKind::SOC)
      order.push_back(k);

  char buf[256];
  for (auto kind : order)
  {
    PolicySpec spec{kind, 1.0, 0.0};
    if (kind == PolicyKind::SOC)
    {
      auto pb = run_policy_batch(ex, spec);
      out.target = pb.stats.total_treatments.mean;
      std::snprintf(buf, sizeof buf, "SOC: mean coverage %.4f, mean treatments %.3f",
                    pb.stats.coverage.mean, out.target);
      ex.log(buf);
      out.batches.push_back(std::move(pb));
      continue;
    }
    CalibrationRow row{kind, 1.0, out.target, 0, cfg.calibration_runs(),
                       run_seed(cfg.base_seed, kind, 0)};
    if (is_front_loaded(kind))
      spec.budget = out.target;
    else
    {
      try
      {
        auto cal = calibrate_scale(
            spec, out.target,
            [&](PolicySpec const &s) { return ex.mean_treatments(s, cfg.calibration_runs()); },
            cfg.calibration_tolerance);
        spec = cal.spec;
      }
      catch (calibration_error const &e)
      {
        out.failures.emplace_back(e.what());
        ex.log(std::string("calibration failed: ") + e.what());
        spec.scale = e.best_scale();
      }
    }
    auto pb = run_policy_batch(ex, spec);
    row.scale = spec.scale;
    row.achieved = cfg.calibration_runs() == cfg.runs_per_policy
                       ? pb.stats.total_treatments.mean
                       : ex.mean_treatments(spec, cfg.calibration_runs());
    row.matched = std::abs(row.achieved - row.target) <= cfg.calibration_tolerance * row.target;
    out.calibration.push_back(row);
    std::snprintf(buf, sizeof buf,
                  "%s: scale %.6g, mean coverage %.4f, mean treatments %.3f",
                  std::string(policy_name(kind)).c_str(), spec.scale,
                  pb.stats.coverage.mean, pb.stats.total_treatments.mean);
    ex.log(buf);
    out.batches.push_back(std::move(pb));
  }
  return out;
}

namespace detail
{

inline std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_out(std::filesystem::path const &p)
{
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os)
    throw error("cannot write '" + p.string() + "'");
  return os;
}

} // namespace detail

inline void write_summary_csv(std::ostream &os, std::span<PolicyBatch const> batches)
{
  os << "policy,run_id,seed,coverage,peak_infected,total_treatments,discounted_cost\n";
  for (auto const &pb : batches)
    for (std::size_t r = 0; r < pb.runs.size(); ++r)
    {
      auto const &m = pb.runs[r].metrics;
      os << policy_name(pb.spec.kind) << ',' << r << ',' << pb.runs[r].seed << ','
         << detail::fmt(m.total_infection_coverage) << ',' << m.peak_infected << ','
         << m.total_treatments << ',' << detail::fmt(m.discounted_cost) << '\n';
    }
}

inline void write_timeseries_csv(std::ostream &os, std::span<PolicyBatch const> batches)
{
  os << "policy,t,mean_infected,ci_lo,ci_hi\n";
  for (auto const &pb : batches)
    for (auto const &p : pb.stats.timeseries)
      os << policy_name(pb.spec.kind) << ',' << detail::fmt(p.t) << ','
         << detail::fmt(p.infected.mean) << ',' << detail::fmt(p.infected.ci_lo) << ','
         << detail::fmt(p.infected.ci_hi) << '\n';
}

inline void write_calibration_csv(std::ostream &os, std::span<CalibrationRow const> rows)
{
  os << "policy,scale,target,achieved,batch,seed0\n";
  for (auto const &c : rows)
    os << policy_name(c.policy) << ',' << detail::fmt(c.scale) << ',' << detail::fmt(c.target)
       << ',' << detail::fmt(c.achieved) << ',' << c.batch << ',' << c.seed0 << '\n';
}

inline void write_event_logs(std::filesystem::path const &dir,
                             std::span<PolicyBatch const> batches)
{
  for (auto const &pb : batches)
    for (std::size_t r = 0; r < pb.runs.size(); ++r)
    {
      auto os = detail::open_out(dir / "events" / std::string(policy_name(pb.spec.kind)) /
                                 (std::to_string(r) + ".csv"));
      write_events_csv(os, pb.runs[r].events, r);
    }
}

inline void write_batches(std::filesystem::path const &dir,
                          std::span<PolicyBatch const> batches, bool events)
{
  {
    auto os = detail::open_out(dir / "summary.csv");
    write_summary_csv(os, batches);
  }
  {
    auto os = detail::open_out(dir / "timeseries.csv");
    write_timeseries_csv(os, batches);
  }
  if (events)
    write_event_logs(dir, batches);
}

inline void write_compare(std::filesystem::path const &dir, CompareResult const &res,
                          bool events)
{
  write_batches(dir, res.batches, events);
  {
    auto os = detail::open_out(dir / "calibration.csv");
    write_calibration_csv(os, res.calibration);
  }
  auto flag = dir / "INCOMPLETE.txt";
  if (res.complete())
    std::filesystem::remove(flag);
  else
  {
    auto os = detail::open_out(flag);
    os << "budget matching failed; calibration.csv rows with achieved outside tolerance "
          "were run at the closest scale found\n";
    for (auto const &f : res.failures)
      os << f << '\n';
  }
}

/// Full comparison protocol for every q_x in the sweep; one sub-directory
/// per value plus a combined sweep.csv.
inline std::vector<std::pair<double, CompareResult>> run_sweep(ExperimentConfig cfg,
                                                               Network const &net,
                                                               Logger log = {})
{
  if (cfg.q_x_sweep.empty())
    throw config_error("q_x_sweep: required for a sweep");
  std::vector<std::pair<double, CompareResult>> out;
  std::filesystem::path root(cfg.output_dir);
  auto sweep = detail::open_out(root / "sweep.csv");
  sweep << "q_x,policy,mean_coverage,sem_coverage,mean_treatments\n";
  for (double qx : cfg.q_x_sweep)
  {
    auto c = cfg;
    c.q_x = {qx};
    Experiment ex(c, net);
    if (log)
    {
      ex.log = log;
      log("q_x = " + detail::fmt(qx));
    }
    auto res = run_compare(ex);
    write_compare(root / ("qx_" + detail::fmt(qx)), res, cfg.write_events);
    for (auto const &pb : res.batches)
      sweep << detail::fmt(qx) << ',' << policy_name(pb.spec.kind) << ','
            << detail::fmt(pb.stats.coverage.mean) << ',' << detail::fmt(pb.stats.coverage.sem)
            << ',' << detail::fmt(pb.stats.total_treatments.mean) << '\n';
    out.emplace_back(qx, std::move(res));
  }
  return out;
}

} // namespace episoc
