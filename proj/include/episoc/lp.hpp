#pragma once

#include "episoc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace episoc::lp
{

/// minimize c'x subject to G x >= h, x free.
///
/// G is stored row-major with n_vars columns.
struct LinearProgram
{
  std::size_t n_vars = 0;
  std::vector<double> objective;
  std::vector<double> g;
  std::vector<double> h;

  explicit LinearProgram(std::size_t n = 0) : n_vars(n), objective(n, 0.0) {}

  std::size_t n_constraints() const noexcept { return h.size(); }

  void add_constraint(std::span<double const> row, double rhs)
  {
    if (row.size() != n_vars)
      throw std::invalid_argument("constraint row has " + std::to_string(row.size()) +
                                  " coefficients, expected " + std::to_string(n_vars));
    g.insert(g.end(), row.begin(), row.end());
    h.push_back(rhs);
  }

  double coef(std::size_t row, std::size_t col) const { return g[row * n_vars + col]; }
};

enum class Status
{
  Optimal,
  Unbounded,
  Infeasible
};

inline char const *status_name(Status s)
{
  switch (s)
  {
  case Status::Optimal: return "Optimal";
  case Status::Unbounded: return "Unbounded";
  case Status::Infeasible: return "Infeasible";
  }
  return "?";
}

struct LpSolution
{
  std::vector<double> x;
  double objective_value = 0;
  Status status = Status::Infeasible;
  std::size_t pivots = 0;
};

inline constexpr double default_tolerance = 1e-9;

namespace detail
{

// Dense simplex tableau. Row 0..m-1 are constraints, row m is the cost row
// holding reduced costs; the last column is the right-hand side.
class Tableau
{
public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0)
  {}

  double &at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
  double &rhs(std::size_t r) { return at(r, cols_); }
  double &cost(std::size_t c) { return at(rows_, c); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::vector<std::size_t> &basis() noexcept { return basis_; }

  void pivot(std::size_t pr, std::size_t pc)
  {
    double const inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c)
      at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r)
    {
      if (r == pr)
        continue;
      double const f = at(r, pc);
      if (f == 0.0)
        continue;
      double *dst = &a_[r * (cols_ + 1)];
      double const *src = &a_[pr * (cols_ + 1)];
      for (std::size_t c = 0; c <= cols_; ++c)
        dst[c] -= f * src[c];
      dst[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  // Make the cost row consistent with the current basis.
  void price_out(std::vector<double> const &c)
  {
    for (std::size_t j = 0; j <= cols_; ++j)
      cost(j) = j < cols_ ? c[j] : 0.0;
    for (std::size_t r = 0; r < rows_; ++r)
    {
      double const cb = c[basis_[r]];
      if (cb == 0.0)
        continue;
      for (std::size_t j = 0; j <= cols_; ++j)
        cost(j) -= cb * at(r, j);
    }
  }

  enum class Outcome
  {
    Optimal,
    Unbounded
  };

  // Minimise over columns [0, active_cols). Dantzig pricing, switching to
  // Bland's rule after a run of degenerate pivots.
  Outcome optimize(std::size_t active_cols, double tol, std::size_t &pivots)
  {
    std::size_t const cap = 50 * (rows_ + cols_ + 10);
    std::size_t degenerate_run = 0;
    for (std::size_t iter = 0;; ++iter)
    {
      if (iter > cap)
        throw numerical_error("simplex cycling guard exceeded after " +
                              std::to_string(cap) + " pivots");
      bool const bland = degenerate_run > 2 * (rows_ + 1);
      std::size_t enter = cols_;
      double best = -tol;
      for (std::size_t j = 0; j < active_cols; ++j)
      {
        double const rc = cost(j);
        if (rc < best)
        {
          enter = j;
          if (bland)
            break;
          best = rc;
        }
      }
      if (enter == cols_)
        return Outcome::Optimal;

      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r)
        if (double const a = at(r, enter); a > tol)
          best_ratio = std::min(best_ratio, rhs(r) / a);
      if (best_ratio == std::numeric_limits<double>::infinity())
        return Outcome::Unbounded;
      // ties: lowest basic index leaves
      std::size_t leave = rows_;
      for (std::size_t r = 0; r < rows_; ++r)
        if (double const a = at(r, enter); a > tol && rhs(r) / a <= best_ratio + tol)
          if (leave == rows_ || basis_[r] < basis_[leave])
            leave = r;
      degenerate_run = (best_ratio <= tol) ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++pivots;
    }
  }

private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
  std::vector<std::size_t> basis_;
};

} // namespace detail

/// Two-phase dense simplex for small LPs with free variables.
///
/// Each free variable is split as x = u - v (u, v >= 0) and each row gets a
/// surplus variable. Rows with h <= 0 start with their surplus basic, so the
/// policy LPs (whose right-hand sides are all non-positive) skip phase one.
inline LpSolution solve(LinearProgram const &lp, double tol = default_tolerance)
{
  auto const n = lp.n_vars;
  auto const m = lp.n_constraints();
  if (lp.objective.size() != n || lp.g.size() != n * m)
    throw std::invalid_argument("linear program dimensions are inconsistent");
  if (!(tol > 0))
    throw std::invalid_argument("tolerance must be positive");

  LpSolution sol;
  sol.x.assign(n, 0.0);

  std::vector<std::size_t> art_rows;
  for (std::size_t r = 0; r < m; ++r)
    if (lp.h[r] > 0)
      art_rows.push_back(r);

  // Columns: u[0..n), v[n..2n), s[2n..2n+m), artificials after.
  std::size_t const base_cols = 2 * n + m;
  std::size_t const cols = base_cols + art_rows.size();
  detail::Tableau tab(m, cols);
  {
    std::size_t k = 0;
    for (std::size_t r = 0; r < m; ++r)
    {
      double const sign = lp.h[r] > 0 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < n; ++j)
      {
        tab.at(r, j) = sign * lp.coef(r, j);
        tab.at(r, n + j) = -sign * lp.coef(r, j);
      }
      tab.at(r, 2 * n + r) = -sign;
      tab.rhs(r) = sign * lp.h[r];
      if (lp.h[r] > 0)
      {
        tab.at(r, base_cols + k) = 1.0;
        tab.basis()[r] = base_cols + k;
        ++k;
      }
      else
      {
        tab.basis()[r] = 2 * n + r;
      }
    }
  }

  if (!art_rows.empty())
  {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t k = 0; k < art_rows.size(); ++k)
      phase1[base_cols + k] = 1.0;
    tab.price_out(phase1);
    tab.optimize(cols, tol, sol.pivots);
    double infeas = 0;
    for (std::size_t r = 0; r < m; ++r)
      if (tab.basis()[r] >= base_cols)
        infeas += tab.rhs(r);
    double scale = 1.0;
    for (double v : lp.h)
      scale = std::max(scale, std::abs(v));
    if (infeas > tol * scale * static_cast<double>(m))
    {
      sol.status = Status::Infeasible;
      return sol;
    }
    // Drive remaining (zero-level) artificials out of the basis.
    for (std::size_t r = 0; r < m; ++r)
    {
      if (tab.basis()[r] < base_cols)
        continue;
      std::size_t pc = base_cols;
      double best = tol;
      for (std::size_t j = 0; j < base_cols; ++j)
        if (std::abs(tab.at(r, j)) > best)
        {
          best = std::abs(tab.at(r, j));
          pc = j;
        }
      if (pc < base_cols)
        tab.pivot(r, pc);
      // otherwise the row is redundant; the artificial stays basic at zero and
      // is never priced in phase two.
    }
  }

  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j)
  {
    phase2[j] = lp.objective[j];
    phase2[n + j] = -lp.objective[j];
  }
  tab.price_out(phase2);
  if (tab.optimize(base_cols, tol, sol.pivots) == detail::Tableau::Outcome::Unbounded)
  {
    sol.status = Status::Unbounded;
    return sol;
  }

  for (std::size_t r = 0; r < m; ++r)
  {
    auto const b = tab.basis()[r];
    if (b < n)
      sol.x[b] += tab.rhs(r);
    else if (b < 2 * n)
      sol.x[b - n] -= tab.rhs(r);
  }
  sol.objective_value = 0;
  for (std::size_t j = 0; j < n; ++j)
    sol.objective_value += lp.objective[j] * sol.x[j];
  sol.status = Status::Optimal;
  return sol;
}

/// Largest violation max(h - Gx, 0) over all rows.
inline double max_violation(LinearProgram const &lp, std::span<double const> x)
{
  double worst = 0;
  for (std::size_t r = 0; r < lp.n_constraints(); ++r)
  {
    double gx = 0;
    for (std::size_t j = 0; j < lp.n_vars; ++j)
      gx += lp.coef(r, j) * x[j];
    worst = std::max(worst, lp.h[r] - gx);
  }
  return worst;
}

/// Plain-text LP: `n m`, then the n objective coefficients, then m rows of
/// n coefficients followed by the right-hand side (row means G_r x >= h_r).
/// `#` starts a comment.
inline LinearProgram parse_lp_text(std::string const &text)
{
  std::stringstream clean;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);)
    clean << line.substr(0, line.find('#')) << '\n';

  auto read = [&](char const *what) {
    double v;
    if (!(clean >> v))
      throw parse_error(std::string("expected ") + what, 0);
    return v;
  };
  double n = read("variable count"), m = read("constraint count");
  if (n < 0 || m < 0 || n != std::floor(n) || m != std::floor(m))
    throw parse_error("dimensions must be non-negative integers", 0);
  LinearProgram lp(static_cast<std::size_t>(n));
  for (auto &c : lp.objective)
    c = read("objective coefficient");
  std::vector<double> row(lp.n_vars);
  for (std::size_t r = 0; r < static_cast<std::size_t>(m); ++r)
  {
    for (auto &g : row)
      g = read("constraint coefficient");
    lp.add_constraint(row, read("right-hand side"));
  }
  std::string extra;
  if (clean >> extra)
    throw parse_error("trailing data '" + extra + "'", 0);
  return lp;
}

} // namespace episoc::lp
