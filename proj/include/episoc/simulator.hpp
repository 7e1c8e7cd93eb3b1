#pragma once

#include "episoc/baselines.hpp"
#include "episoc/dynamics.hpp"
#include "episoc/errors.hpp"
#include "episoc/graph.hpp"
#include "episoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace episoc
{

/// Counter-based seed derivation plus a Mersenne Twister stream.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  static std::uint64_t splitmix64(std::uint64_t x)
  {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform on the open interval (0, 1).
  double uniform()
  {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n)
  {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return std::min(k, n - 1);
  }

private:
  std::mt19937_64 eng_;
};

/// `count` distinct nodes, uniformly at random.
inline std::vector<node_t> sample_initial_infected(std::size_t node_count, std::size_t count,
                                                   std::uint64_t seed)
{
  if (count > node_count)
    throw parameter_error("more initial infections than nodes");
  Rng rng(seed);
  std::vector<node_t> pool(node_count);
  for (node_t i = 0; i < node_count; ++i)
    pool[i] = i;
  for (std::size_t k = 0; k < count; ++k)
    std::swap(pool[k], pool[k + rng.below(node_count - k)]);
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Draw the next event given the current (frozen) rates, or nothing when the
/// total rate is zero. Categories are ordered treatment, infection, recovery.
inline std::optional<Event> step(EpidemicState const &s, Network const &net,
                                 ModelParams const &mp, std::span<double const> treat_rates,
                                 Rng &rng)
{
  auto const r = intensities(s, net, mp, treat_rates);
  double const total = r.total();
  if (!(total > 0))
    return std::nullopt;

  double const dt = -std::log(rng.uniform()) / total;
  double target = rng.uniform() * total;
  auto const nn = net.node_count();
  Event ev{s.t + dt, 0, EventKind::Recovery};
  std::optional<Event> last_positive;
  for (auto [rates, kind] : {std::pair{&r.treatment, EventKind::TreatmentStart},
                             std::pair{&r.infection, EventKind::Infection},
                             std::pair{&r.recovery, EventKind::Recovery}})
  {
    for (node_t i = 0; i < nn; ++i)
    {
      double const v = (*rates)[i];
      if (v <= 0)
        continue;
      ev.node = i;
      ev.kind = kind;
      last_positive = ev;
      if (target < v)
        return ev;
      target -= v;
    }
  }
  // rounding left a sliver past the last category
  return last_positive;
}

struct RunConfig
{
  double t_final = 10.0;
  std::uint64_t seed = 0;
  // Seed for drawing the initial infected set; defaults to `seed`.
  std::optional<std::uint64_t> init_seed;
  std::size_t initial_infected_count = 1;
  // Explicit initial infected set; overrides the random draw.
  std::optional<std::vector<node_t>> initial_infected;
  PolicySpec policy;
  ModelParams mp;
  ControlParams cp;
  std::size_t grid_points = default_grid_points;
  // Full recompute of Z/M after every event.
  bool debug_checks = false;

  void validate(Network const &net) const
  {
    if (!(t_final > 0))
      throw parameter_error("t_final must be positive");
    if (!initial_infected && initial_infected_count > net.node_count())
      throw parameter_error("initial_infected_count exceeds node count");
    mp.validate();
    cp.validate(net.node_count());
    policy.validate();
  }
};

struct RunResult
{
  std::vector<Event> events;
  std::vector<std::uint8_t> x0;
  EpidemicState final_state;
  std::vector<TraceSegment> trace;
  MetricsSummary metrics;
  std::size_t lp_solves = 0;
  std::uint64_t seed = 0;
};

/// One exact trajectory: rates are recomputed for every node after every
/// event. Stops at extinction or when the next event would fall past
/// t_final; the state is then frozen at t_final.
inline RunResult run(RunConfig const &cfg, Network const &net,
                     std::span<double const> drop_scores = {})
{
  cfg.validate(net);
  RunResult res;
  res.seed = cfg.seed;
  auto const infected =
      cfg.initial_infected ? *cfg.initial_infected
                           : sample_initial_infected(net.node_count(),
                                                     cfg.initial_infected_count,
                                                     cfg.init_seed.value_or(cfg.seed));
  EpidemicState s = init_state(net, infected);
  res.x0 = s.x;

  PolicyEngine policy(cfg.policy, net, cfg.mp, cfg.cp, drop_scores);
  Rng rng(cfg.seed);

  for (;;)
  {
    auto lam = policy.treat_rates(s);
    TraceSegment seg{s.t, {}};
    for (node_t i = 0; i < lam.size(); ++i)
      if (lam[i] != 0.0)
        seg.rates.emplace_back(i, lam[i]);
    if (!seg.rates.empty() || (!res.trace.empty() && !res.trace.back().rates.empty()))
      res.trace.push_back(std::move(seg));

    auto ev = step(s, net, cfg.mp, lam, rng);
    if (!ev || ev->t > cfg.t_final)
      break;
    apply_event(s, net, *ev, cfg.debug_checks);
    res.events.push_back(*ev);
  }
  s.t = cfg.t_final;
  res.final_state = std::move(s);
  res.lp_solves = policy.lp_solves();
  res.metrics = summarize(res.events, res.trace, res.x0, cfg.cp, cfg.t_final, cfg.grid_points);
  return res;
}

/// Run `count` jobs indexed 0..count-1 on up to `jobs` threads. Results are
/// stored by index, so the output does not depend on scheduling.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t jobs, Fn &&fn)
{
  std::vector<std::optional<Result>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < count; k += stride)
    {
      try
      {
        slots[k].emplace(fn(k));
      }
      catch (...)
      {
        errors[k] = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1)
    worker(0, 1);
  else
  {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
      pool.emplace_back(worker, j, jobs);
    for (auto &t : pool)
      t.join();
  }
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  std::vector<Result> out;
  out.reserve(count);
  for (auto &s : slots)
    out.push_back(std::move(*s));
  return out;
}

} // namespace episoc
