#pragma once

// Independent reference implementations used only by the tests. None of
// them share code with the library beyond plain data types.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace oracle
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix adjacency(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> const &edges)
{
  Matrix a = Matrix::Zero(n, n);
  for (auto [u, v] : edges)
  {
    a(u, v) = 1;
    a(v, u) = 1;
  }
  return a;
}

// Largest eigenvalue by dense symmetric eigendecomposition.
inline double lambda_max(Matrix const &a)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvalues().maxCoeff();
}

inline double lambda_max_without(Matrix a, std::size_t i)
{
  a.row(i).setZero();
  a.col(i).setZero();
  return lambda_max(a);
}

// ---- linear programming by enumeration --------------------------------

enum class LpOutcome
{
  Optimal,
  Unbounded,
  Infeasible
};

struct LpAnswer
{
  LpOutcome outcome = LpOutcome::Infeasible;
  double value = 0;
  Vector x;
};

namespace detail
{

inline void for_each_subset(std::size_t n, std::size_t k,
                            std::function<void(std::vector<std::size_t> const &)> const &fn)
{
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i)
    idx[i] = i;
  if (k > n)
    return;
  for (;;)
  {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1)
      --i;
    if (i == 0)
      return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j)
      idx[j] = idx[j - 1] + 1;
  }
}

} // namespace detail

/// min c'x s.t. G x >= h, x free, by enumerating the vertices of the
/// feasible set intersected with the row space of G, and its extreme rays.
/// Exponential; meant for a handful of variables and rows.
inline LpAnswer solve_lp(Matrix const &g, Vector const &h, Vector const &c, double eps = 1e-9)
{
  auto const m = static_cast<std::size_t>(g.rows());
  auto const n = static_cast<std::size_t>(g.cols());
  LpAnswer ans;

  Eigen::FullPivLU<Matrix> lu(g);
  lu.setThreshold(1e-10);
  auto const rank = static_cast<std::size_t>(lu.rank());

  // Orthonormal basis of the row space of G.
  Matrix rowspace(n, 0);
  if (rank > 0)
  {
    Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullV);
    rowspace = svd.matrixV().leftCols(static_cast<Eigen::Index>(rank));
  }
  auto feasible = [&](Vector const &x) {
    return ((g * x - h).array() >= -eps * (1 + h.cwiseAbs().maxCoeff())).all();
  };

  // Vertices of P restricted to the row space: rank-many independent tight rows.
  double best = std::numeric_limits<double>::infinity();
  if (rank == 0)
  {
    Vector x = Vector::Zero(static_cast<Eigen::Index>(n));
    if (feasible(x))
    {
      best = 0;
      ans.x = x;
    }
  }
  else
  {
    detail::for_each_subset(m, rank, [&](std::vector<std::size_t> const &rows) {
      Matrix gs(rank, n);
      Vector hs(rank);
      for (std::size_t k = 0; k < rank; ++k)
      {
        gs.row(k) = g.row(rows[k]);
        hs(k) = h(rows[k]);
      }
      // coordinates in the row-space basis
      Matrix sys = gs * rowspace;
      Eigen::FullPivLU<Matrix> slu(sys);
      if (static_cast<std::size_t>(slu.rank()) < rank)
        return;
      Vector x = rowspace * slu.solve(hs);
      if (!feasible(x))
        return;
      double v = c.dot(x);
      if (v < best)
      {
        best = v;
        ans.x = x;
      }
    });
  }
  if (!std::isfinite(best))
  {
    ans.outcome = LpOutcome::Infeasible;
    return ans;
  }

  // Unbounded directions: either c leaves the row space, or an extreme ray
  // of {r in rowspace : G r >= 0} descends.
  Vector c_null = c - rowspace * (rowspace.transpose() * c);
  if (c_null.norm() > 1e-9 * (1 + c.norm()))
  {
    ans.outcome = LpOutcome::Unbounded;
    return ans;
  }
  bool unbounded = false;
  if (rank >= 1)
  {
    detail::for_each_subset(m, rank - 1, [&](std::vector<std::size_t> const &rows) {
      if (unbounded)
        return;
      Matrix gs(rank - 1, n);
      for (std::size_t k = 0; k + 1 < rank; ++k)
        gs.row(k) = g.row(rows[k]);
      Matrix sys = gs * rowspace;
      Vector dir;
      if (rank == 1)
        dir = Vector::Ones(1);
      else
      {
        Eigen::FullPivLU<Matrix> slu(sys);
        if (static_cast<std::size_t>(slu.rank()) < rank - 1)
          return;
        Matrix ker = slu.kernel();
        if (ker.cols() != 1)
          return;
        dir = ker.col(0);
      }
      for (double sign : {1.0, -1.0})
      {
        Vector r = sign * (rowspace * dir);
        r /= r.norm();
        if ((g * r).minCoeff() >= -1e-9 && c.dot(r) < -1e-9)
          unbounded = true;
      }
    });
  }
  if (unbounded)
  {
    ans.outcome = LpOutcome::Unbounded;
    return ans;
  }
  ans.outcome = LpOutcome::Optimal;
  ans.value = best;
  return ans;
}

// ---- goodness of fit ----------------------------------------------------

// Upper-tail p-value of Pearson's statistic.
inline double chi_square_p(std::vector<long> const &observed, std::vector<double> const &prob)
{
  double total = 0;
  for (long o : observed)
    total += static_cast<double>(o);
  double stat = 0;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < observed.size(); ++k)
  {
    if (prob[k] <= 0)
      continue;
    double e = total * prob[k];
    stat += (observed[k] - e) * (observed[k] - e) / e;
    ++cells;
  }
  boost::math::chi_squared dist(static_cast<double>(cells - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// One-sample Kolmogorov-Smirnov p-value against a continuous CDF, using
// the asymptotic Kolmogorov distribution with the Stephens correction.
inline double ks_p(std::vector<double> sample, std::function<double(double)> const &cdf)
{
  std::sort(sample.begin(), sample.end());
  auto const n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i)
  {
    double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  double const sn = std::sqrt(n);
  double const lam = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k)
  {
    double term = std::exp(-2.0 * k * k * lam * lam);
    p += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16)
      break;
  }
  return std::clamp(p, 0.0, 1.0);
}

// ---- random inputs -------------------------------------------------------

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

// Erdos-Renyi graph with at least one edge.
inline EdgeList random_graph(std::mt19937_64 &rng, std::size_t n, double p)
{
  std::bernoulli_distribution coin(p);
  EdgeList e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng))
        e.emplace_back(i, j);
  if (e.empty())
    e.emplace_back(0, 1);
  return e;
}

} // namespace oracle
