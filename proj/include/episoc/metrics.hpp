#pragma once

#include "episoc/dynamics.hpp"
#include "episoc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace episoc
{

/// Control signal over one inter-event segment, stored sparsely.
struct TraceSegment
{
  double t_start = 0;
  std::vector<std::pair<node_t, double>> rates;
};

struct MetricsSummary
{
  double total_infection_coverage = 0;
  std::size_t peak_infected = 0;
  long total_treatments = 0;
  double discounted_cost = 0;
  std::vector<std::pair<double, std::size_t>> infected_timeseries;
};

namespace detail
{

// Minimal X/H replay used by the metrics; it needs no network.
class Replay
{
public:
  explicit Replay(std::span<std::uint8_t const> x0)
      : x_(x0.begin(), x0.end()), h_(x0.size(), 0)
  {
    for (auto v : x_)
      infected_ += v;
  }

  void apply(Event const &e)
  {
    if (e.node >= x_.size())
      throw replay_error("event node " + std::to_string(e.node) + " out of range");
    if (e.t < last_t_)
      throw replay_error("event times decrease at t=" + std::to_string(e.t));
    last_t_ = e.t;
    auto const i = e.node;
    switch (e.kind)
    {
    case EventKind::Infection:
      if (x_[i])
        throw replay_error("infection of infected node " + std::to_string(i));
      x_[i] = 1;
      ++infected_;
      break;
    case EventKind::Recovery:
      if (!x_[i])
        throw replay_error("recovery of healthy node " + std::to_string(i));
      x_[i] = 0;
      h_[i] = 0;
      --infected_;
      break;
    case EventKind::TreatmentStart:
      if (!x_[i] || h_[i])
        throw replay_error("illegal treatment start at node " + std::to_string(i));
      h_[i] = 1;
      ++treatments_;
      break;
    }
  }

  std::size_t infected() const noexcept { return infected_; }
  long treatments() const noexcept { return treatments_; }
  std::vector<std::uint8_t> const &x() const noexcept { return x_; }

private:
  std::vector<std::uint8_t> x_, h_;
  std::size_t infected_ = 0;
  long treatments_ = 0;
  double last_t_ = -std::numeric_limits<double>::infinity();
};

// integral of exp(-eta t) over [a, b]
inline double discount_weight(double eta, double a, double b)
{
  if (b <= a)
    return 0.0;
  if (std::isinf(b))
    return std::exp(-eta * a) / eta;
  return std::exp(-eta * a) * -std::expm1(-eta * (b - a)) / eta;
}

} // namespace detail

/// Exact integral of the number of infected nodes over [0, t_final].
inline double coverage(std::span<Event const> events, std::span<std::uint8_t const> x0,
                       double t_final)
{
  detail::Replay rp(x0);
  double acc = 0, t = 0;
  for (auto const &e : events)
  {
    if (e.t > t_final)
      break;
    acc += static_cast<double>(rp.infected()) * (e.t - t);
    t = e.t;
    rp.apply(e);
  }
  acc += static_cast<double>(rp.infected()) * (t_final - t);
  return acc;
}

/// Realised discounted loss: sum over segments of l * int exp(-eta t) dt,
/// l = 1/2 sum q_lambda_i lambda_i^2 + sum q_x_i X_i, piecewise constant
/// between events and trace breakpoints. t_final may be +infinity.
inline double discounted_cost(std::span<Event const> events,
                              std::span<TraceSegment const> trace,
                              std::span<std::uint8_t const> x0, ControlParams const &cp,
                              double t_final)
{
  if (!(cp.eta > 0))
    throw parameter_error("eta must be strictly positive");
  detail::Replay rp(x0);
  auto state_loss = [&] {
    double l = 0;
    auto const &x = rp.x();
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i])
        l += cp.q_x[i];
    return l;
  };
  auto control_loss = [&](TraceSegment const *seg) {
    double l = 0;
    if (seg)
      for (auto [i, lam] : seg->rates)
        l += 0.5 * cp.q_lambda[i] * lam * lam;
    return l;
  };

  std::size_t ei = 0, ti = 0;
  TraceSegment const *seg = nullptr;
  double t = 0, acc = 0;
  while (ti < trace.size() && trace[ti].t_start <= t)
    seg = &trace[ti++];
  double xl = state_loss();
  double cl = control_loss(seg);
  while (t < t_final)
  {
    double next = t_final;
    if (ei < events.size())
      next = std::min(next, events[ei].t);
    if (ti < trace.size())
      next = std::min(next, trace[ti].t_start);
    acc += (xl + cl) * detail::discount_weight(cp.eta, t, next);
    t = next;
    if (t >= t_final)
      break;
    bool changed = false;
    while (ei < events.size() && events[ei].t <= t)
    {
      rp.apply(events[ei++]);
      changed = true;
    }
    if (changed)
      xl = state_loss();
    while (ti < trace.size() && trace[ti].t_start <= t)
    {
      seg = &trace[ti++];
      cl = control_loss(seg);
    }
  }
  return acc;
}

/// Infected count sampled at `points` uniform times on [0, t_final]
/// (right-continuous: an event at exactly a grid time is counted).
inline std::vector<std::pair<double, std::size_t>>
infected_timeseries(std::span<Event const> events, std::span<std::uint8_t const> x0,
                    double t_final, std::size_t points)
{
  std::vector<std::pair<double, std::size_t>> out;
  if (points == 0)
    return out;
  detail::Replay rp(x0);
  std::size_t ei = 0;
  for (std::size_t k = 0; k < points; ++k)
  {
    double const tk = points == 1 ? 0.0 : t_final * static_cast<double>(k) /
                                              static_cast<double>(points - 1);
    while (ei < events.size() && events[ei].t <= tk)
      rp.apply(events[ei++]);
    out.emplace_back(tk, rp.infected());
  }
  return out;
}

inline constexpr std::size_t default_grid_points = 200;

inline MetricsSummary summarize(std::span<Event const> events,
                                std::span<TraceSegment const> trace,
                                std::span<std::uint8_t const> x0, ControlParams const &cp,
                                double t_final, std::size_t grid_points = default_grid_points)
{
  MetricsSummary m;
  m.total_infection_coverage = coverage(events, x0, t_final);
  m.discounted_cost = discounted_cost(events, trace, x0, cp, t_final);
  m.infected_timeseries = infected_timeseries(events, x0, t_final, grid_points);
  detail::Replay rp(x0);
  m.peak_infected = rp.infected();
  for (auto const &e : events)
  {
    if (e.t > t_final)
      break;
    rp.apply(e);
    m.peak_infected = std::max(m.peak_infected, rp.infected());
  }
  m.total_treatments = rp.treatments();
  return m;
}

struct Stat
{
  double mean = 0;
  double sem = 0;
  double ci_lo = 0;
  double ci_hi = 0;
};

inline constexpr double z95 = 1.96;

inline Stat describe(std::span<double const> v)
{
  if (v.empty())
    throw std::invalid_argument("cannot summarise an empty sample");
  Stat s;
  double sum = 0;
  for (double e : v)
    sum += e;
  auto const n = static_cast<double>(v.size());
  s.mean = sum / n;
  if (v.size() > 1)
  {
    double ss = 0;
    for (double e : v)
      ss += (e - s.mean) * (e - s.mean);
    s.sem = std::sqrt(ss / (n - 1)) / std::sqrt(n);
  }
  s.ci_lo = s.mean - z95 * s.sem;
  s.ci_hi = s.mean + z95 * s.sem;
  return s;
}

struct TimeseriesPoint
{
  double t = 0;
  Stat infected;
};

struct BatchStats
{
  std::size_t runs = 0;
  Stat coverage;
  Stat peak_infected;
  Stat total_treatments;
  Stat discounted_cost;
  std::vector<TimeseriesPoint> timeseries;
};

/// Mean, SEM and normal 95% CI per metric, and pointwise over the shared grid.
inline BatchStats aggregate(std::span<MetricsSummary const> runs)
{
  if (runs.empty())
    throw std::invalid_argument("aggregate needs at least one run");
  BatchStats b;
  b.runs = runs.size();
  std::vector<double> buf(runs.size());
  auto stat_of = [&](auto get) {
    for (std::size_t r = 0; r < runs.size(); ++r)
      buf[r] = get(runs[r]);
    return describe(buf);
  };
  b.coverage = stat_of([](auto const &m) { return m.total_infection_coverage; });
  b.peak_infected = stat_of([](auto const &m) { return double(m.peak_infected); });
  b.total_treatments = stat_of([](auto const &m) { return double(m.total_treatments); });
  b.discounted_cost = stat_of([](auto const &m) { return m.discounted_cost; });

  auto const grid = runs.front().infected_timeseries.size();
  for (auto const &m : runs)
    if (m.infected_timeseries.size() != grid)
      throw std::invalid_argument("runs do not share a timeseries grid");
  for (std::size_t k = 0; k < grid; ++k)
  {
    TimeseriesPoint p;
    p.t = runs.front().infected_timeseries[k].first;
    p.infected = stat_of([k](auto const &m) { return double(m.infected_timeseries[k].second); });
    b.timeseries.push_back(p);
  }
  return b;
}

} // namespace episoc
