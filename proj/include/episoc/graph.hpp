#pragma once

#include "episoc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace episoc
{

using node_t = std::size_t;

/// Undirected, unweighted contact network. Immutable once built.
///
/// Neighbour lists are kept sorted so that iteration order (and therefore
/// every floating point sum over neighbours) is deterministic.
class Network
{
public:
  using edge_t = std::pair<node_t, node_t>;

  Network(std::size_t node_count, std::vector<edge_t> const &edges,
          std::vector<std::string> labels = {})
      : adj_(node_count), labels_(std::move(labels))
  {
    if (node_count == 0)
      throw validation_error("network has no nodes");
    if (!labels_.empty() && labels_.size() != node_count)
      throw validation_error("label count does not match node count");
    if (labels_.empty())
      for (node_t i = 0; i < node_count; ++i)
        labels_.push_back(std::to_string(i));

    for (auto [u, v] : edges)
    {
      if (u >= node_count || v >= node_count)
        throw validation_error("edge (" + std::to_string(u) + ", " +
                               std::to_string(v) + ") out of range");
      if (u == v)
        throw validation_error("self-loop on node " + labels_[u]);
      adj_[u].push_back(v);
      adj_[v].push_back(u);
    }
    for (auto &nb : adj_)
    {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    for (node_t u = 0; u < node_count; ++u)
      for (node_t v : adj_[u])
        if (u < v)
          edges_.emplace_back(u, v);
    if (edges_.empty())
      throw validation_error("network has no edges");
  }

  std::size_t node_count() const noexcept { return adj_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  std::vector<edge_t> const &edges() const noexcept { return edges_; }
  std::vector<std::string> const &labels() const noexcept { return labels_; }
  std::string const &label(node_t i) const { return labels_.at(i); }

  std::vector<node_t> const &neighbors(node_t i) const
  {
    check_index(i);
    return adj_[i];
  }

  std::size_t degree(node_t i) const { return neighbors(i).size(); }

  std::size_t max_degree() const noexcept
  {
    std::size_t best = 0;
    for (auto const &nb : adj_)
      best = std::max(best, nb.size());
    return best;
  }

  bool adjacent(node_t i, node_t j) const
  {
    auto const &nb = neighbors(i);
    check_index(j);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  // 0/1 entry of the adjacency matrix.
  int a(node_t i, node_t j) const { return adjacent(i, j) ? 1 : 0; }

  std::optional<node_t> find_label(std::string_view name) const
  {
    for (node_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == name)
        return i;
    return std::nullopt;
  }

  void check_index(node_t i) const
  {
    if (i >= adj_.size())
      throw std::out_of_range("node index " + std::to_string(i) +
                              " out of range (node count " +
                              std::to_string(adj_.size()) + ")");
  }

private:
  std::vector<std::vector<node_t>> adj_;
  std::vector<edge_t> edges_;
  std::vector<std::string> labels_;
};

namespace detail
{

inline std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size())
  {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::size_t> as_index(std::string_view tok)
{
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    return std::nullopt;
  return v;
}

} // namespace detail

/// Parse a whitespace separated edge list. `#` starts a comment.
///
/// If every endpoint token is a non-negative integer the tokens are taken as
/// 0-based node indices; otherwise they are labels, numbered densely in order
/// of first appearance. Duplicate edges collapse.
inline Network load_edge_list(std::string_view text)
{
  std::vector<std::pair<std::string, std::string>> raw;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size())
  {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos)
      nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    auto toks = detail::split_ws(line);
    if (toks.empty())
      continue;
    if (toks.size() != 2)
      throw parse_error("expected two endpoints, got " +
                            std::to_string(toks.size()) + " tokens",
                        lineno);
    if (toks[0] == toks[1])
      throw validation_error("line " + std::to_string(lineno) +
                             ": self-loop on " + std::string(toks[0]));
    raw.emplace_back(std::string(toks[0]), std::string(toks[1]));
  }
  if (raw.empty())
    throw validation_error("edge list is empty");

  bool numeric = std::all_of(raw.begin(), raw.end(), [](auto const &e) {
    return detail::as_index(e.first) && detail::as_index(e.second);
  });

  std::vector<Network::edge_t> edges;
  if (numeric)
  {
    std::size_t n = 0;
    for (auto const &[u, v] : raw)
    {
      auto a = *detail::as_index(u), b = *detail::as_index(v);
      if (a == b)
        throw validation_error("self-loop on node " + u);
      n = std::max({n, a + 1, b + 1});
      edges.emplace_back(a, b);
    }
    return Network(n, edges);
  }

  std::unordered_map<std::string, node_t> ids;
  std::vector<std::string> labels;
  auto id_of = [&](std::string const &name) {
    auto [it, fresh] = ids.try_emplace(name, labels.size());
    if (fresh)
      labels.push_back(name);
    return it->second;
  };
  for (auto const &[u, v] : raw)
  {
    auto a = id_of(u);
    auto b = id_of(v);
    edges.emplace_back(a, b);
  }
  auto const n = labels.size();
  return Network(n, edges, std::move(labels));
}

inline Network load_edge_list_file(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
    throw validation_error("cannot open graph file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_edge_list(ss.str());
}

inline std::size_t degree(Network const &net, node_t i) { return net.degree(i); }

inline constexpr double spectral_tolerance = 1e-10;
inline constexpr std::size_t spectral_iteration_cap = 10000;

namespace detail
{

// Largest eigenvalue of A (optionally with one node's row and column zeroed).
// Iterates on A + I: the shift makes the Perron root strictly dominant in
// magnitude even for bipartite graphs, where A itself has -rho in its
// spectrum.
inline double spectral_radius_masked(Network const &net, double tol,
                                     std::optional<node_t> removed)
{
  if (!(tol > 0))
    throw parameter_error("spectral tolerance must be positive");
  auto const n = net.node_count();
  std::vector<double> x(n, 1.0), y(n);
  if (removed)
    x[*removed] = 0.0;

  auto normalize = [](std::vector<double> &v) {
    double s = 0;
    for (double e : v)
      s += e * e;
    s = std::sqrt(s);
    if (s > 0)
      for (double &e : v)
        e /= s;
    return s;
  };
  if (normalize(x) == 0.0)
    return 0.0;

  double prev = -1.0;
  for (std::size_t it = 0; it < spectral_iteration_cap; ++it)
  {
    double rq = 0;
    for (node_t i = 0; i < n; ++i)
    {
      double acc = 0;
      if (!removed || *removed != i)
        for (node_t j : net.neighbors(i))
          if (!removed || *removed != j)
            acc += x[j];
      y[i] = acc;
      rq += x[i] * acc;
    }
    if (std::abs(rq - prev) < tol)
      return std::max(rq, 0.0);
    prev = rq;
    for (node_t i = 0; i < n; ++i)
      y[i] += x[i];
    if (normalize(y) == 0.0)
      return 0.0;
    std::swap(x, y);
  }
  throw numerical_error("power iteration did not converge within " +
                        std::to_string(spectral_iteration_cap) + " iterations");
}

} // namespace detail

/// Largest eigenvalue of the adjacency matrix.
inline double spectral_radius(Network const &net, double tol = spectral_tolerance)
{
  return detail::spectral_radius_masked(net, tol, std::nullopt);
}

/// Entry i: decrease of the spectral radius when node i is removed.
inline std::vector<double> spectral_drop_scores(Network const &net,
                                                double tol = spectral_tolerance)
{
  double const full = spectral_radius(net, tol);
  std::vector<double> scores(net.node_count());
  for (node_t i = 0; i < net.node_count(); ++i)
    scores[i] = std::max(0.0, full - detail::spectral_radius_masked(net, tol, i));
  return scores;
}

} // namespace episoc
