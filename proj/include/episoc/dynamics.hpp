#pragma once

#include "episoc/errors.hpp"
#include "episoc/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace episoc
{

/// Disease rates. beta/gamma act per infected/treated neighbour.
struct ModelParams
{
  double beta = 0;
  double gamma = 0;
  double delta = 0;
  double rho = 0;

  void validate() const
  {
    if (!(beta >= 0) || !(gamma >= 0) || !(delta >= 0) || !(rho >= 0))
      throw parameter_error("model rates must be non-negative");
    if (gamma > beta)
      throw parameter_error("gamma must not exceed beta");
  }
};

/// Loss weights: 1/2 lambda' diag(q_lambda) lambda + q_x' X, discounted at eta.
struct ControlParams
{
  std::vector<double> q_lambda;
  std::vector<double> q_x;
  double eta = 1.0;

  static ControlParams uniform(std::size_t n, double q_lambda, double q_x,
                               double eta)
  {
    return {std::vector<double>(n, q_lambda), std::vector<double>(n, q_x), eta};
  }

  void validate(std::size_t n) const
  {
    if (q_lambda.size() != n || q_x.size() != n)
      throw parameter_error("control weight vectors must have one entry per node");
    for (double q : q_lambda)
      if (!(q > 0))
        throw parameter_error("q_lambda entries must be positive");
    for (double q : q_x)
      if (!(q >= 0))
        throw parameter_error("q_x entries must be non-negative");
    if (!(eta > 0))
      throw parameter_error("eta must be strictly positive");
  }
};

enum class EventKind : std::uint8_t
{
  Infection,
  Recovery,
  TreatmentStart
};

inline char kind_code(EventKind k)
{
  switch (k)
  {
  case EventKind::Infection: return 'I';
  case EventKind::Recovery: return 'R';
  case EventKind::TreatmentStart: return 'T';
  }
  return '?';
}

inline char const *kind_name(EventKind k)
{
  switch (k)
  {
  case EventKind::Infection: return "Infection";
  case EventKind::Recovery: return "Recovery";
  case EventKind::TreatmentStart: return "TreatmentStart";
  }
  return "?";
}

struct Event
{
  double t = 0;
  node_t node = 0;
  EventKind kind = EventKind::Infection;

  friend bool operator==(Event const &, Event const &) = default;
};

/// Full per-node epidemic state.
///
/// Z and M are the infected/treated neighbour counts (A'X, A'H); they are
/// updated incrementally by apply_event. Y, W, N count infections,
/// recoveries and treatment starts.
struct EpidemicState
{
  double t = 0;
  std::vector<std::uint8_t> x;
  std::vector<std::uint8_t> h;
  std::vector<int> z;
  std::vector<int> m;
  std::vector<long> y;
  std::vector<long> w;
  std::vector<long> n;
  std::vector<std::uint8_t> x0;

  std::size_t size() const noexcept { return x.size(); }

  std::size_t infected_count() const noexcept
  {
    std::size_t c = 0;
    for (auto v : x)
      c += v;
    return c;
  }

  long total_treatments() const noexcept
  {
    long c = 0;
    for (auto v : n)
      c += v;
    return c;
  }

  friend bool operator==(EpidemicState const &, EpidemicState const &) = default;
};

inline EpidemicState init_state(Network const &net,
                                std::span<node_t const> initially_infected)
{
  auto const nn = net.node_count();
  EpidemicState s;
  s.x.assign(nn, 0);
  s.h.assign(nn, 0);
  s.z.assign(nn, 0);
  s.m.assign(nn, 0);
  s.y.assign(nn, 0);
  s.w.assign(nn, 0);
  s.n.assign(nn, 0);
  for (node_t i : initially_infected)
  {
    net.check_index(i);
    s.x[i] = 1;
  }
  for (node_t i = 0; i < nn; ++i)
    if (s.x[i])
      for (node_t j : net.neighbors(i))
        ++s.z[j];
  s.x0 = s.x;
  return s;
}

/// Recompute Z and M from scratch and check every structural invariant.
inline void check_state(EpidemicState const &s, Network const &net)
{
  auto const nn = net.node_count();
  std::vector<int> z(nn, 0), m(nn, 0);
  for (node_t i = 0; i < nn; ++i)
  {
    if (s.x[i] > 1 || s.h[i] > 1)
      throw invariant_violation("non-binary state at node " + std::to_string(i));
    if (s.h[i] && !s.x[i])
      throw invariant_violation("treated but healthy node " + std::to_string(i));
    if (static_cast<long>(s.x[i]) != s.x0[i] + s.y[i] - s.w[i])
      throw invariant_violation("counter identity broken at node " +
                                std::to_string(i));
    for (node_t j : net.neighbors(i))
    {
      z[j] += s.x[i];
      m[j] += s.h[i];
    }
  }
  for (node_t i = 0; i < nn; ++i)
  {
    if (z[i] != s.z[i] || m[i] != s.m[i])
      throw invariant_violation("neighbour counts out of sync at node " +
                                std::to_string(i));
    if (s.m[i] > s.z[i])
      throw invariant_violation("M > Z at node " + std::to_string(i));
  }
}

/// Apply one jump. Treatment ends exactly when the treated node recovers.
inline void apply_event(EpidemicState &s, Network const &net, Event const &ev,
                        bool full_check = false)
{
  net.check_index(ev.node);
  if (ev.t < s.t)
    throw time_order_error("event at t=" + std::to_string(ev.t) +
                           " precedes state time " + std::to_string(s.t));
  auto const i = ev.node;
  auto illegal = [&] {
    return illegal_transition(std::string(kind_name(ev.kind)) + " not allowed at node " +
                              std::to_string(i) + " (X=" + std::to_string(s.x[i]) +
                              ", H=" + std::to_string(s.h[i]) + ")");
  };

  switch (ev.kind)
  {
  case EventKind::Infection:
    if (s.x[i])
      throw illegal();
    s.x[i] = 1;
    for (node_t j : net.neighbors(i))
      ++s.z[j];
    ++s.y[i];
    break;
  case EventKind::Recovery:
    if (!s.x[i])
      throw illegal();
    s.x[i] = 0;
    for (node_t j : net.neighbors(i))
      --s.z[j];
    if (s.h[i])
    {
      s.h[i] = 0;
      for (node_t j : net.neighbors(i))
        --s.m[j];
    }
    ++s.w[i];
    break;
  case EventKind::TreatmentStart:
    if (!s.x[i] || s.h[i])
      throw illegal();
    s.h[i] = 1;
    for (node_t j : net.neighbors(i))
      ++s.m[j];
    ++s.n[i];
    break;
  }
  s.t = ev.t;
  if (full_check)
    check_state(s, net);
}

struct Intensities
{
  std::vector<double> infection;
  std::vector<double> recovery;
  std::vector<double> treatment;

  double total() const noexcept
  {
    double acc = 0;
    for (auto const *v : {&infection, &recovery, &treatment})
      for (double r : *v)
        acc += r;
    return acc;
  }
};

inline constexpr double negative_rate_tolerance = 1e-12;

/// Per-node rates of the three counting processes.
inline Intensities intensities(EpidemicState const &s, Network const &net,
                               ModelParams const &mp,
                               std::span<double const> treat_rates)
{
  auto const nn = net.node_count();
  if (treat_rates.size() != nn)
    throw std::invalid_argument("treat_rates has wrong length");
  Intensities r;
  r.infection.resize(nn);
  r.recovery.resize(nn);
  r.treatment.resize(nn);
  for (node_t i = 0; i < nn; ++i)
  {
    if (!(treat_rates[i] >= 0))
      throw invariant_violation("negative treatment rate at node " + std::to_string(i));
    double inf = 0;
    if (!s.x[i])
    {
      inf = mp.beta * s.z[i] - mp.gamma * s.m[i];
      if (inf < -negative_rate_tolerance)
        throw invariant_violation("negative infection rate at node " +
                                  std::to_string(i));
      inf = std::max(inf, 0.0);
    }
    r.infection[i] = inf;
    r.recovery[i] = s.x[i] ? mp.delta + mp.rho * s.h[i] : 0.0;
    r.treatment[i] = (s.x[i] && !s.h[i]) ? treat_rates[i] : 0.0;
  }
  return r;
}

/// CSV `run_id,t,node,kind`, times with 9 significant digits.
inline void write_events_csv(std::ostream &os, std::span<Event const> events,
                             std::size_t run_id, bool header = true)
{
  if (header)
    os << "run_id,t,node,kind\n";
  char buf[64];
  for (auto const &e : events)
  {
    std::snprintf(buf, sizeof buf, "%.9g", e.t);
    os << run_id << ',' << buf << ',' << e.node << ',' << kind_code(e.kind) << '\n';
  }
}

} // namespace episoc
