#pragma once

#include "episoc/dynamics.hpp"
#include "episoc/errors.hpp"
#include "episoc/graph.hpp"
#include "episoc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace episoc
{

/// Scalar/vector constants of the closed-form treatment intensity.
struct PolicyConstants
{
  double k1 = 0;          // beta (2 delta + eta + rho)
  std::vector<double> k2; // beta (delta + eta)(delta + eta + rho) q_lambda_i
  double k3 = 0;          // eta (gamma (delta + eta) + beta (delta + rho))
  std::vector<double> k4; // beta (delta + rho) q_x_i
  // gamma eta + beta (2 delta + rho). Computed for completeness; neither the
  // intensity nor the LP uses it.
  double k5 = 0;
};

inline PolicyConstants compute_constants(ModelParams const &mp, ControlParams const &cp)
{
  if (!(cp.eta > 0))
    throw parameter_error("eta must be strictly positive for the optimal policy");
  if (cp.q_lambda.size() != cp.q_x.size())
    throw parameter_error("q_lambda and q_x differ in length");
  auto const [beta, gamma, delta, rho] = mp;
  double const eta = cp.eta;

  PolicyConstants pc;
  pc.k1 = beta * (2 * delta + eta + rho);
  pc.k3 = eta * (gamma * (delta + eta) + beta * (delta + rho));
  pc.k5 = gamma * eta + beta * (2 * delta + rho);
  pc.k2.resize(cp.q_lambda.size());
  pc.k4.resize(cp.q_x.size());
  for (std::size_t i = 0; i < cp.q_lambda.size(); ++i)
  {
    pc.k2[i] = beta * (delta + eta) * (delta + eta + rho) * cp.q_lambda[i];
    pc.k4[i] = beta * (delta + rho) * cp.q_x[i];
  }
  return pc;
}

struct PolicyLpResult
{
  std::vector<double> d;
  // sum over infected rows of |(A d)_i + k4_i / k3|
  double objective = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t blocks = 0;
};

/// Solve for d over the susceptible nodes.
///
/// Rows are infected nodes with at least one susceptible neighbour, columns
/// susceptible nodes with at least one infected neighbour; everything else
/// has d = 0. The constraint forces every residual (A d)_i + r_i to be
/// non-negative, so the L1 objective reduces to the linear 1'(A_10 d). The
/// problem separates over connected components of the infected/susceptible
/// bipartite graph and each block is solved on its own.
inline PolicyLpResult solve_policy_lp(Network const &net, std::span<std::uint8_t const> x,
                                      PolicyConstants const &pc,
                                      double tol = lp::default_tolerance)
{
  auto const nn = net.node_count();
  if (x.size() != nn || pc.k4.size() != nn)
    throw std::invalid_argument("state/constant length does not match network");
  if (!(pc.k3 > 0))
    throw policy_error("K3 must be positive to form the policy LP");

  PolicyLpResult res;
  res.d.assign(nn, 0.0);

  // Union-find over nodes restricted to infected-susceptible edges.
  std::vector<node_t> parent(nn);
  std::iota(parent.begin(), parent.end(), node_t{0});
  auto find = [&](node_t a) {
    while (parent[a] != a)
      a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<std::uint8_t> in_lp(nn, 0);
  for (auto [u, v] : net.edges())
    if (x[u] != x[v])
    {
      in_lp[u] = in_lp[v] = 1;
      auto ru = find(u), rv = find(v);
      if (ru != rv)
        parent[std::max(ru, rv)] = std::min(ru, rv);
    }

  std::vector<std::vector<node_t>> blocks;
  std::vector<std::size_t> block_of(nn, SIZE_MAX);
  for (node_t i = 0; i < nn; ++i)
  {
    if (!in_lp[i])
      continue;
    auto r = find(i);
    if (block_of[r] == SIZE_MAX)
    {
      block_of[r] = blocks.size();
      blocks.emplace_back();
    }
    blocks[block_of[r]].push_back(i);
  }

  std::vector<std::size_t> col_of(nn, SIZE_MAX);
  for (auto const &blk : blocks)
  {
    std::vector<node_t> rows, cols;
    for (node_t i : blk)
      (x[i] ? rows : cols).push_back(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      col_of[cols[k]] = k;

    lp::LinearProgram prog(cols.size());
    std::vector<double> row(cols.size());
    for (node_t i : rows)
    {
      std::fill(row.begin(), row.end(), 0.0);
      for (node_t j : net.neighbors(i))
        if (!x[j])
        {
          row[col_of[j]] = 1.0;
          prog.objective[col_of[j]] += 1.0;
        }
      prog.add_constraint(row, -pc.k4[i] / pc.k3);
    }
    auto sol = lp::solve(prog, tol);
    if (sol.status != lp::Status::Optimal)
      throw policy_error(std::string("policy LP block returned ") +
                         lp::status_name(sol.status));
    for (std::size_t k = 0; k < cols.size(); ++k)
      res.d[cols[k]] = sol.x[k];
    res.rows += rows.size();
    res.cols += cols.size();
  }
  res.blocks = blocks.size();

  for (node_t i = 0; i < nn; ++i)
  {
    if (!x[i])
      continue;
    double ad = 0;
    for (node_t j : net.neighbors(i))
      ad += res.d[j];
    res.objective += std::abs(ad + pc.k4[i] / pc.k3);
  }
  return res;
}

inline constexpr double radical_tolerance = 1e-9;

/// Closed-form optimal treatment intensity for every node.
inline std::vector<double> optimal_intensity(EpidemicState const &s, Network const &net,
                                             PolicyConstants const &pc,
                                             ControlParams const &cp,
                                             std::span<double const> d)
{
  auto const nn = net.node_count();
  if (d.size() != nn)
    throw std::invalid_argument("d has wrong length");
  std::vector<double> lam(nn, 0.0);
  for (node_t i = 0; i < nn; ++i)
  {
    if (!s.x[i] || s.h[i])
      continue;
    if (!(pc.k1 > 0))
      throw policy_error("K1 must be positive to evaluate the optimal intensity");
    double ad = 0;
    for (node_t j : net.neighbors(i))
      ad += d[j];
    double const q = cp.q_lambda[i];
    double rad = 2 * pc.k1 * q * (pc.k3 * ad + pc.k4[i]) + pc.k2[i] * pc.k2[i];
    if (rad < -radical_tolerance)
      throw invariant_violation("negative radical " + std::to_string(rad) + " at node " +
                                std::to_string(i));
    rad = std::max(rad, 0.0);
    lam[i] = std::max(0.0, -(pc.k2[i] - std::sqrt(rad)) / (pc.k1 * q));
  }
  return lam;
}

/// Coefficients of the linear value function V = b'X + c'H + d'Z + f'M.
struct ValueConstants
{
  std::vector<double> b, c, d, f;
};

/// Build b, c, f from an LP solution d.
///
/// The jump term for treating infected node i, c_i + (A f)_i, is taken as
/// the negative root of the quadratic obtained by eliminating b_i; b_i then
/// follows from the X_i-coefficient equation. Susceptible nodes use
/// f = -(gamma/beta) d, b = (eta/beta) d - A_00 d and c = -A f.
inline ValueConstants compute_value_constants(Network const &net,
                                              std::span<std::uint8_t const> x,
                                              std::span<double const> d,
                                              ModelParams const &mp,
                                              ControlParams const &cp)
{
  if (!(mp.beta > 0))
    throw parameter_error("beta must be positive to build value constants");
  auto const nn = net.node_count();
  auto const [beta, gamma, delta, rho] = mp;
  double const eta = cp.eta;

  ValueConstants vc;
  vc.b.assign(nn, 0.0);
  vc.c.assign(nn, 0.0);
  vc.d.assign(nn, 0.0);
  vc.f.assign(nn, 0.0);
  for (node_t i = 0; i < nn; ++i)
    if (!x[i])
    {
      vc.d[i] = d[i];
      vc.f[i] = -(gamma / beta) * d[i];
    }

  auto row_dot = [&](node_t i, std::vector<double> const &v) {
    double acc = 0;
    for (node_t j : net.neighbors(i))
      acc += v[j];
    return acc;
  };

  for (node_t i = 0; i < nn; ++i)
  {
    double const ad = row_dot(i, vc.d);
    double const af = row_dot(i, vc.f);
    if (!x[i])
    {
      vc.b[i] = (eta / beta) * vc.d[i] - ad;
      vc.c[i] = -af;
      continue;
    }
    double const q = cp.q_lambda[i];
    double const qx = cp.q_x[i];
    double const lead = beta * (delta + eta) * (delta + eta + rho) * q;
    double rad = 2 * beta * q * (2 * delta + eta + rho) *
                     (eta * ad * (gamma * (delta + eta) + beta * (delta + rho)) +
                      beta * (delta + rho) * qx) +
                 lead * lead;
    if (rad < -radical_tolerance)
      throw invariant_violation("negative radical while building value constants at node " +
                                std::to_string(i));
    rad = std::max(rad, 0.0);
    double const jump = (lead - std::sqrt(rad)) / (beta * (2 * delta + eta + rho));
    vc.c[i] = jump - af;
    vc.b[i] = (qx - delta * ad - jump * jump / (2 * q)) / (eta + delta);
  }
  return vc;
}

/// Residuals of the per-node coefficient equations a valid V must satisfy.
struct HjbResiduals
{
  std::vector<double> susceptible_d;  // -eta d_i + beta (b_i + A_i d)
  std::vector<double> susceptible_f;  // d_i + (beta/gamma) f_i (f_i if gamma = 0)
  std::vector<double> infected_df;    // eta |d_i| + eta |f_i|
  std::vector<double> infected_c;     // H X coefficient
  std::vector<double> infected_b;     // X coefficient
  std::vector<double> jump_n;         // c_i + A_i f
  double max_residual = 0;
};

inline HjbResiduals hjb_residuals(ValueConstants const &vc, Network const &net,
                                  std::span<std::uint8_t const> x, ModelParams const &mp,
                                  ControlParams const &cp)
{
  auto const nn = net.node_count();
  auto const [beta, gamma, delta, rho] = mp;
  double const eta = cp.eta;
  HjbResiduals r;
  for (auto *v : {&r.susceptible_d, &r.susceptible_f, &r.infected_df, &r.infected_c,
                  &r.infected_b, &r.jump_n})
    v->assign(nn, 0.0);

  for (node_t i = 0; i < nn; ++i)
  {
    double ad = 0, af = 0;
    for (node_t j : net.neighbors(i))
    {
      ad += vc.d[j];
      af += vc.f[j];
    }
    double const jump = vc.c[i] + af;
    r.jump_n[i] = jump;
    if (!x[i])
    {
      r.susceptible_d[i] = std::abs(-eta * vc.d[i] + beta * (vc.b[i] + ad));
      r.susceptible_f[i] = gamma > 0 ? std::abs(vc.d[i] + (beta / gamma) * vc.f[i])
                                     : std::abs(vc.f[i]);
    }
    else
    {
      double const qinv = 1.0 / cp.q_lambda[i];
      r.infected_df[i] = eta * (std::abs(vc.d[i]) + std::abs(vc.f[i]));
      r.infected_c[i] = std::abs(-eta * vc.c[i] - (delta + rho) * jump -
                                 (delta + rho) * (vc.b[i] + ad) +
                                 0.5 * qinv * jump * jump);
      r.infected_b[i] = std::abs(-eta * vc.b[i] - delta * (vc.b[i] + ad) -
                                 0.5 * qinv * jump * jump + cp.q_x[i]);
    }
  }
  for (auto const *v : {&r.susceptible_d, &r.susceptible_f, &r.infected_df, &r.infected_c,
                        &r.infected_b})
    for (double e : *v)
      r.max_residual = std::max(r.max_residual, e);
  return r;
}

/// -Q^{-1} diag(1 - H) Delta^N X, read off the value constants.
inline std::vector<double> intensity_from_value(ValueConstants const &vc,
                                                EpidemicState const &s,
                                                Network const &net,
                                                ControlParams const &cp)
{
  std::vector<double> lam(net.node_count(), 0.0);
  for (node_t i = 0; i < net.node_count(); ++i)
  {
    double af = 0;
    for (node_t j : net.neighbors(i))
      af += vc.f[j];
    lam[i] = -(1.0 / cp.q_lambda[i]) * (1 - s.h[i]) * (vc.c[i] + af) * s.x[i];
  }
  return lam;
}

/// Online controller: keeps d in sync with X and re-solves the LP only when
/// the infected set changes.
class SocController
{
public:
  SocController(Network const &net, ModelParams const &mp, ControlParams const &cp)
      : net_(&net), cp_(&cp), pc_(compute_constants(mp, cp))
  {
    mp.validate();
    cp.validate(net.node_count());
  }

  std::vector<double> const &intensity(EpidemicState const &s)
  {
    if (!solved_ || s.x != x_)
    {
      lp_ = solve_policy_lp(*net_, s.x, pc_);
      x_ = s.x;
      solved_ = true;
      ++solves_;
    }
    lam_ = optimal_intensity(s, *net_, pc_, *cp_, lp_.d);
    return lam_;
  }

  std::size_t lp_solves() const noexcept { return solves_; }
  PolicyConstants const &constants() const noexcept { return pc_; }
  PolicyLpResult const &last_lp() const noexcept { return lp_; }

private:
  Network const *net_;
  ControlParams const *cp_;
  PolicyConstants pc_;
  PolicyLpResult lp_;
  std::vector<std::uint8_t> x_;
  std::vector<double> lam_;
  bool solved_ = false;
  std::size_t solves_ = 0;
};

} // namespace episoc
