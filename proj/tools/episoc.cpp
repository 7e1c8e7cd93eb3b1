#include "episoc/episoc.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace episoc;

namespace
{

enum ExitCode
{
  exit_ok = 0,
  exit_other = 1,
  exit_config = 2,
  exit_calibration = 3,
  exit_numerical = 4
};

struct CommonFlags
{
  std::string config;
  std::string graph;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App *cmd, CommonFlags &f, bool need_config)
{
  auto *c = cmd->add_option("--config", f.config, "experiment config file");
  if (need_config)
    c->required();
  cmd->add_option("--graph", f.graph, "edge list (overrides the config)");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--seed", f.seed, "base seed (overrides the config)");
  cmd->add_option("--jobs", f.jobs, "parallel runs")->check(CLI::PositiveNumber);
}

ExperimentConfig load_config(CommonFlags const &f)
{
  auto cfg = parse_config_file(f.config);
  if (!f.graph.empty())
    cfg.graph_path = f.graph;
  if (!f.out.empty())
    cfg.output_dir = f.out;
  if (f.seed)
    cfg.base_seed = *f.seed;
  if (f.jobs)
    cfg.jobs = *f.jobs;
  if (cfg.graph_path.empty())
    throw config_error("graph: no edge list given");
  return cfg;
}

Network load_graph(std::string const &path)
{
  try
  {
    return load_edge_list_file(path);
  }
  catch (parse_error const &e)
  {
    throw config_error(path + ": " + e.what());
  }
}

void log_line(std::string const &s) { std::cerr << s << '\n'; }

Experiment make_experiment(CommonFlags const &f)
{
  auto cfg = load_config(f);
  auto net = load_graph(cfg.graph_path);
  Experiment ex(std::move(cfg), std::move(net));
  ex.log = log_line;
  return ex;
}

PolicySpec policy_from(std::string const &name, double scale, double budget)
{
  auto k = parse_policy(name);
  if (!k)
    throw config_error("policy: unknown policy '" + name + "'");
  PolicySpec spec{*k, scale, budget};
  spec.validate();
  return spec;
}

int cmd_simulate(CommonFlags const &f, std::string const &policy, double scale, double budget)
{
  auto ex = make_experiment(f);
  auto pb = run_policy_batch(ex, policy_from(policy, scale, budget));
  std::vector<PolicyBatch> one{std::move(pb)};
  write_batches(ex.cfg.output_dir, one, ex.cfg.write_events);
  auto const &s = one.front().stats;
  std::printf("%s: runs %zu, coverage %.4f (sem %.4f), treatments %.3f\n", policy.c_str(),
              s.runs, s.coverage.mean, s.coverage.sem, s.total_treatments.mean);
  return exit_ok;
}

int cmd_compare(CommonFlags const &f)
{
  auto ex = make_experiment(f);
  auto res = run_compare(ex);
  write_compare(ex.cfg.output_dir, res, ex.cfg.write_events);
  if (!res.complete())
  {
    std::cerr << "budget matching failed for " << res.failures.size()
              << " baseline(s); outputs flagged with INCOMPLETE.txt\n";
    return exit_calibration;
  }
  return exit_ok;
}

int cmd_sweep(CommonFlags const &f)
{
  auto cfg = load_config(f);
  auto net = load_graph(cfg.graph_path);
  auto res = run_sweep(cfg, net, log_line);
  for (auto const &[qx, r] : res)
    if (!r.complete())
      return exit_calibration;
  return exit_ok;
}

int cmd_calibrate(CommonFlags const &f, std::string const &policy,
                  std::optional<double> target)
{
  auto ex = make_experiment(f);
  auto spec = policy_from(policy, 1.0, 0.0);
  if (spec.kind == PolicyKind::SOC || is_front_loaded(spec.kind))
    throw config_error("policy: only T, MN, LN and LRSR have a scale to calibrate");
  auto const runs = ex.cfg.calibration_runs();
  if (!target)
    target = ex.mean_treatments(PolicySpec{PolicyKind::SOC, 1.0, 0.0}, runs);
  auto cal = calibrate_scale(
      spec, *target, [&](PolicySpec const &s) { return ex.mean_treatments(s, runs); },
      ex.cfg.calibration_tolerance);
  CalibrationRow row{spec.kind, cal.spec.scale, *target, cal.achieved, runs,
                     run_seed(ex.cfg.base_seed, spec.kind, 0), true};
  auto os = detail::open_out(fs::path(ex.cfg.output_dir) / "calibration.csv");
  write_calibration_csv(os, std::span(&row, 1));
  std::printf("%s: scale %.10g, target %.4f, achieved %.4f, %zu evaluations\n",
              policy.c_str(), cal.spec.scale, *target, cal.achieved, cal.evaluations);
  return exit_ok;
}

std::vector<node_t> resolve_nodes(Network const &net, std::string const &list)
{
  std::vector<node_t> out;
  for (auto const &tok : detail::split_list(list))
  {
    if (auto i = net.find_label(tok))
      out.push_back(*i);
    else if (auto v = detail::as_index(tok); v && *v < net.node_count())
      out.push_back(*v);
    else
      throw config_error("infected: unknown node '" + tok + "'");
  }
  return out;
}

int cmd_policy_debug(CommonFlags const &f, std::string const &infected)
{
  ExperimentConfig cfg;
  cfg.mp = {6, 5, 1, 5};
  if (!f.config.empty())
    cfg = parse_config_file(f.config);
  if (!f.graph.empty())
    cfg.graph_path = f.graph;
  if (cfg.graph_path.empty())
    throw config_error("graph: no edge list given");
  auto net = load_graph(cfg.graph_path);
  auto cp = cfg.control(net.node_count());
  auto s = init_state(net, resolve_nodes(net, infected));

  auto pc = compute_constants(cfg.mp, cp);
  auto lp = solve_policy_lp(net, s.x, pc);
  auto lam = optimal_intensity(s, net, pc, cp, lp.d);
  auto vc = compute_value_constants(net, s.x, lp.d, cfg.mp, cp);
  auto res = hjb_residuals(vc, net, s.x, cfg.mp, cp);

  std::printf("constants: k1 %.10g k2 %.10g k3 %.10g k4 %.10g\n", pc.k1, pc.k2[0], pc.k3,
              pc.k4[0]);
  std::printf("lp: %zu rows, %zu cols, %zu blocks, objective %.10g\n", lp.rows, lp.cols,
              lp.blocks, lp.objective);
  std::printf("node,label,x,d,lambda\n");
  for (node_t i = 0; i < net.node_count(); ++i)
    std::printf("%zu,%s,%d,%.10g,%.10g\n", i, net.label(i).c_str(), int(s.x[i]), lp.d[i],
                lam[i]);
  std::printf("max_hjb_residual %.3e\n", res.max_residual);
  return exit_ok;
}

int cmd_lp_check(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
    throw config_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  auto lp = lp::parse_lp_text(ss.str());
  auto sol = lp::solve(lp);
  std::printf("status %s\n", lp::status_name(sol.status));
  if (sol.status != lp::Status::Optimal)
    return exit_ok;
  std::printf("objective %.12g\n", sol.objective_value);
  std::printf("x");
  for (double v : sol.x)
    std::printf(" %.12g", v);
  std::printf("\nmax_violation %.3e\npivots %zu\n", lp::max_violation(lp, sol.x), sol.pivots);
  return exit_ok;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"SIS epidemic simulation with optimal treatment policies"};
  app.require_subcommand(1);

  CommonFlags sim_f, cmp_f, sweep_f, cal_f, dbg_f;
  std::string sim_policy = "SOC", cal_policy, infected, lp_file;
  double sim_scale = 1.0, sim_budget = 0.0;
  std::optional<double> cal_target;

  auto *sim = app.add_subcommand("simulate", "run a batch of one policy");
  add_common(sim, sim_f, true);
  sim->add_option("--policy", sim_policy, "SOC, T, T-FL, MN, MN-FL, LN, LN-FL or LRSR");
  sim->add_option("--scale", sim_scale, "baseline intensity scale");
  sim->add_option("--budget", sim_budget, "front-loaded treatment budget");

  auto *cmp = app.add_subcommand("compare", "SOC batch, budget-matched baselines");
  add_common(cmp, cmp_f, true);

  auto *sweep = app.add_subcommand("sweep", "compare over the q_x_sweep values");
  add_common(sweep, sweep_f, true);

  auto *cal = app.add_subcommand("calibrate", "match one baseline to a treatment budget");
  add_common(cal, cal_f, true);
  cal->add_option("--policy", cal_policy, "baseline to calibrate")->required();
  cal->add_option("--target", cal_target, "target mean treatments (default: SOC mean)");

  auto *dbg = app.add_subcommand("policy-debug", "optimal intensity for one snapshot");
  add_common(dbg, dbg_f, false);
  dbg->add_option("--infected", infected, "comma-separated labels or indices")->required();

  auto *lpc = app.add_subcommand("lp-check", "solve an LP from a text file");
  lpc->add_option("file", lp_file, "LP file")->required();

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try
  {
    if (*sim)
      return cmd_simulate(sim_f, sim_policy, sim_scale, sim_budget);
    if (*cmp)
      return cmd_compare(cmp_f);
    if (*sweep)
      return cmd_sweep(sweep_f);
    if (*cal)
      return cmd_calibrate(cal_f, cal_policy, cal_target);
    if (*dbg)
      return cmd_policy_debug(dbg_f, infected);
    if (*lpc)
      return cmd_lp_check(lp_file);
  }
  catch (calibration_error const &e)
  {
    std::cerr << "calibration failed: " << e.what() << '\n';
    return exit_calibration;
  }
  catch (config_error const &e)
  {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  }
  catch (parse_error const &e)
  {
    std::cerr << "parse error: " << e.what() << '\n';
    return exit_config;
  }
  catch (validation_error const &e)
  {
    std::cerr << "invalid input: " << e.what() << '\n';
    return exit_config;
  }
  catch (parameter_error const &e)
  {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return exit_config;
  }
  catch (numerical_error const &e)
  {
    std::cerr << "numerical error: " << e.what() << '\n';
    return exit_numerical;
  }
  catch (invariant_violation const &e)
  {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return exit_numerical;
  }
  catch (policy_error const &e)
  {
    std::cerr << "policy error: " << e.what() << '\n';
    return exit_numerical;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return exit_other;
  }
  return exit_other;
}
