#pragma once

#include "episoc/dynamics.hpp"
#include "episoc/errors.hpp"
#include "episoc/graph.hpp"
#include "episoc/soc_policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace episoc
{

enum class PolicyKind
{
  SOC,
  T,
  T_FL,
  MN,
  MN_FL,
  LN,
  LN_FL,
  LRSR
};

inline constexpr std::array<PolicyKind, 8> all_policies = {
    PolicyKind::SOC, PolicyKind::T,     PolicyKind::T_FL,  PolicyKind::MN,
    PolicyKind::MN_FL, PolicyKind::LN, PolicyKind::LN_FL, PolicyKind::LRSR};

inline std::string_view policy_name(PolicyKind k)
{
  switch (k)
  {
  case PolicyKind::SOC: return "SOC";
  case PolicyKind::T: return "T";
  case PolicyKind::T_FL: return "T-FL";
  case PolicyKind::MN: return "MN";
  case PolicyKind::MN_FL: return "MN-FL";
  case PolicyKind::LN: return "LN";
  case PolicyKind::LN_FL: return "LN-FL";
  case PolicyKind::LRSR: return "LRSR";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name)
{
  for (auto k : all_policies)
  {
    auto n = policy_name(k);
    if (n == name)
      return k;
    // accept T_FL for T-FL
    std::string alt(n);
    std::replace(alt.begin(), alt.end(), '-', '_');
    if (alt == name)
      return k;
  }
  return std::nullopt;
}

// Stable position in all_policies; used for seed blocks.
inline std::size_t policy_index(PolicyKind k)
{
  return static_cast<std::size_t>(k);
}

inline bool is_front_loaded(PolicyKind k)
{
  return k == PolicyKind::T_FL || k == PolicyKind::MN_FL || k == PolicyKind::LN_FL;
}

struct PolicySpec
{
  PolicyKind kind = PolicyKind::SOC;
  double scale = 1.0;
  // Treatment budget for front-loaded variants.
  double budget = 0.0;

  bool soc_shadow() const noexcept { return is_front_loaded(kind); }

  void validate() const
  {
    if (!(scale >= 0) || !std::isfinite(scale))
      throw parameter_error("policy scale must be a finite non-negative number");
    if (!(budget >= 0))
      throw parameter_error("policy budget must be non-negative");
  }
};

/// Per-node weight before scaling; zero off the eligible set is applied by
/// the caller.
inline double shape_weight(PolicyKind k, Network const &net, node_t i,
                           std::span<double const> drop_scores)
{
  switch (k)
  {
  case PolicyKind::T:
  case PolicyKind::T_FL: return 1.0;
  case PolicyKind::MN:
  case PolicyKind::MN_FL: return static_cast<double>(net.degree(i));
  case PolicyKind::LN:
  case PolicyKind::LN_FL:
    return static_cast<double>(net.max_degree() - net.degree(i) + 1);
  case PolicyKind::LRSR:
    if (drop_scores.size() != net.node_count())
      throw config_error("LRSR needs spectral drop scores for every node");
    return drop_scores[i];
  case PolicyKind::SOC: break;
  }
  throw config_error("SOC has no baseline shape");
}

/// Treatment intensities of a comparison policy. Only infected, untreated
/// nodes get a non-zero rate. Front-loaded variants multiply the shape by
/// the sup-norm of the optimal intensity evaluated on the current state and
/// switch off once total treatments exceed the budget.
inline std::vector<double> baseline_intensity(PolicySpec const &spec, EpidemicState const &s,
                                              Network const &net,
                                              std::span<double const> drop_scores,
                                              SocController *soc_ctx = nullptr)
{
  auto const nn = net.node_count();
  std::vector<double> lam(nn, 0.0);
  double factor = spec.scale;
  if (spec.soc_shadow())
  {
    if (!soc_ctx)
      throw config_error(std::string(policy_name(spec.kind)) +
                         " requires an optimal-control context");
    if (static_cast<double>(s.total_treatments()) > spec.budget)
      return lam;
    double sup = 0;
    for (double v : soc_ctx->intensity(s))
      sup = std::max(sup, v);
    factor *= sup;
  }
  if (factor == 0.0)
    return lam;
  for (node_t i = 0; i < nn; ++i)
    if (s.x[i] && !s.h[i])
      lam[i] = factor * shape_weight(spec.kind, net, i, drop_scores);
  return lam;
}

/// Anything that turns a state into treatment rates: the optimal policy or
/// one of the baselines.
class PolicyEngine
{
public:
  PolicyEngine(PolicySpec spec, Network const &net, ModelParams const &mp,
               ControlParams const &cp, std::span<double const> drop_scores = {})
      : spec_(spec), net_(&net), drop_(drop_scores.begin(), drop_scores.end())
  {
    spec_.validate();
    if (spec_.kind == PolicyKind::SOC || spec_.soc_shadow())
      soc_.emplace(net, mp, cp);
    if (spec_.kind == PolicyKind::LRSR && drop_.empty())
      drop_ = spectral_drop_scores(net);
  }

  std::vector<double> treat_rates(EpidemicState const &s)
  {
    if (spec_.kind == PolicyKind::SOC)
      return soc_->intensity(s);
    return baseline_intensity(spec_, s, *net_, drop_, soc_ ? &*soc_ : nullptr);
  }

  std::size_t lp_solves() const noexcept { return soc_ ? soc_->lp_solves() : 0; }
  PolicySpec const &spec() const noexcept { return spec_; }

private:
  PolicySpec spec_;
  Network const *net_;
  std::vector<double> drop_;
  std::optional<SocController> soc_;
};

struct CalibrationResult
{
  PolicySpec spec;
  double target = 0;
  double achieved = 0;
  std::size_t evaluations = 0;
};

inline constexpr double default_calibration_tolerance = 0.05;
inline constexpr std::size_t calibration_max_iterations = 40;
inline constexpr std::size_t calibration_bracket_cap = 30;

/// Rescale a baseline until its batch-mean treatment count is within
/// tol_frac of target.
///
/// `batch_mean(spec)` must run a fixed batch (same seeds every call) and
/// return the mean total treatments. The search brackets the target by
/// doubling/halving the scale from 1 and then bisects geometrically.
template <typename BatchMean>
CalibrationResult calibrate_scale(PolicySpec spec, double target, BatchMean &&batch_mean,
                                  double tol_frac = default_calibration_tolerance)
{
  if (is_front_loaded(spec.kind) || spec.kind == PolicyKind::SOC)
    throw config_error(std::string(policy_name(spec.kind)) + " is not scale-calibrated");
  if (!(target > 0))
    throw calibration_error("calibration target must be positive, got " +
                            std::to_string(target));

  CalibrationResult res;
  res.target = target;
  double lo_seen = std::numeric_limits<double>::infinity(), hi_seen = 0;
  double best_scale = 1.0, best_v = std::numeric_limits<double>::quiet_NaN();
  auto eval = [&](double scale) {
    spec.scale = scale;
    double v = batch_mean(spec);
    ++res.evaluations;
    lo_seen = std::min(lo_seen, v);
    hi_seen = std::max(hi_seen, v);
    if (std::isnan(best_v) || std::abs(v - target) < std::abs(best_v - target))
    {
      best_v = v;
      best_scale = scale;
    }
    return v;
  };
  auto accept = [&](double scale, double v) {
    res.spec = spec;
    res.spec.scale = scale;
    res.achieved = v;
    return res;
  };
  auto within = [&](double v) { return std::abs(v - target) <= tol_frac * target; };
  auto fail = [&](std::string const &why) {
    return calibration_error(std::string(policy_name(spec.kind)) + ": " + why +
                                 " (target " + std::to_string(target) +
                                 ", achieved range [" + std::to_string(lo_seen) + ", " +
                                 std::to_string(hi_seen) + "])",
                             best_scale, best_v);
  };

  double lo = 1.0, hi = 1.0;
  double v = eval(1.0);
  if (within(v))
    return accept(1.0, v);
  if (v < target)
  {
    // Treatment counts are not monotone in the scale: very strong treatment
    // ends the epidemic early. Stop once the count has fallen repeatedly.
    bool found = false;
    std::size_t falling = 0;
    double prev = v;
    for (std::size_t k = 0; k < calibration_bracket_cap && falling < 3; ++k)
    {
      lo = hi;
      hi *= 2.0;
      v = eval(hi);
      if (within(v))
        return accept(hi, v);
      if (v > target)
      {
        found = true;
        break;
      }
      falling = v < prev ? falling + 1 : 0;
      prev = v;
    }
    if (!found)
      throw fail("target not reachable by increasing the scale");
  }
  else
  {
    bool found = false;
    for (std::size_t k = 0; k < calibration_bracket_cap; ++k)
    {
      hi = lo;
      lo /= 2.0;
      v = eval(lo);
      if (within(v))
        return accept(lo, v);
      if (v < target)
      {
        found = true;
        break;
      }
    }
    if (!found)
      throw fail("target not reachable by decreasing the scale");
  }

  for (std::size_t it = 0; it < calibration_max_iterations; ++it)
  {
    double const mid = std::sqrt(lo * hi);
    v = eval(mid);
    if (within(v))
      return accept(mid, v);
    (v < target ? lo : hi) = mid;
  }
  throw fail("bisection did not reach tolerance");
}

} // namespace episoc
