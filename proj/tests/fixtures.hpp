#pragma once

// Random problem instances shared by the unit tests and the acceptance run.

#include "episoc/episoc.hpp"
#include "oracles.hpp"

#include <random>

namespace fixture
{

struct PolicyInstance
{
  episoc::Network net;
  std::vector<std::uint8_t> x;
  episoc::ModelParams mp;
  episoc::ControlParams cp;
};

// Connected-ish random graph on <= max_nodes nodes, random X with at least
// one infected node, and random valid parameters (gamma <= beta, eta > 0).
inline PolicyInstance random_policy_instance(std::mt19937_64 &rng, std::size_t max_nodes)
{
  std::uniform_int_distribution<std::size_t> size(2, max_nodes);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t const n = size(rng);
  auto edges = oracle::random_graph(rng, n, 0.45);
  episoc::Network net(n, edges);

  std::vector<std::uint8_t> x(n);
  for (auto &v : x)
    v = u(rng) < 0.5;
  x[rng() % n] = 1;

  episoc::ModelParams mp;
  mp.beta = 0.5 + 9.5 * u(rng);
  mp.gamma = mp.beta * u(rng);
  mp.delta = 0.1 + 4.9 * u(rng);
  mp.rho = 10 * u(rng);
  episoc::ControlParams cp;
  cp.eta = 0.1 + 4.9 * u(rng);
  for (std::size_t i = 0; i < n; ++i)
  {
    cp.q_lambda.push_back(0.2 + 4.8 * u(rng));
    cp.q_x.push_back(1000 * u(rng));
  }
  return {std::move(net), std::move(x), mp, cp};
}

// The policy LP assembled directly from the adjacency matrix: variables are
// d over all susceptible nodes, one row per infected node with a
// susceptible neighbour.
struct DensePolicyLp
{
  oracle::Matrix g;
  oracle::Vector h;
  oracle::Vector c;
  std::vector<std::size_t> rows, cols;
};

inline DensePolicyLp dense_policy_lp(PolicyInstance const &inst)
{
  auto const n = inst.net.node_count();
  auto const a = oracle::adjacency(n, inst.net.edges());
  auto const &[beta, gamma, delta, rho] = inst.mp;
  double const eta = inst.cp.eta;
  double const k3 = eta * (gamma * (delta + eta) + beta * (delta + rho));

  DensePolicyLp out;
  for (std::size_t j = 0; j < n; ++j)
    if (!inst.x[j])
      out.cols.push_back(j);
  for (std::size_t i = 0; i < n; ++i)
  {
    if (!inst.x[i])
      continue;
    bool any = false;
    for (auto j : out.cols)
      any = any || a(i, j) != 0;
    if (any)
      out.rows.push_back(i);
  }
  auto const m = static_cast<Eigen::Index>(out.rows.size());
  auto const k = static_cast<Eigen::Index>(out.cols.size());
  out.g.resize(m, k);
  out.h.resize(m);
  for (Eigen::Index r = 0; r < m; ++r)
  {
    auto const i = out.rows[r];
    for (Eigen::Index c = 0; c < k; ++c)
      out.g(r, c) = a(i, out.cols[c]);
    out.h(r) = -beta * (delta + rho) * inst.cp.q_x[i] / k3;
  }
  out.c = out.g.colwise().sum().transpose();
  return out;
}

// Optimal intensity straight from the closed form, for X_i = 1, H_i = 0.
inline double closed_form_lambda(episoc::ModelParams const &mp, double eta, double q,
                                 double qx, double ad)
{
  auto const &[beta, gamma, delta, rho] = mp;
  double const k1 = beta * (2 * delta + eta + rho);
  double const k2 = beta * (delta + eta) * (delta + eta + rho) * q;
  double const k3 = eta * (gamma * (delta + eta) + beta * (delta + rho));
  double const k4 = beta * (delta + rho) * qx;
  double const rad = std::max(0.0, 2 * k1 * q * (k3 * ad + k4) + k2 * k2);
  return std::max(0.0, (std::sqrt(rad) - k2) / (k1 * q));
}

} // namespace fixture
