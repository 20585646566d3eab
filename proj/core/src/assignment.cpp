#include "wbt/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wbt {

Assignment solve_assignment(const CostMatrix& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment: cost matrix must be square");
  const std::size_t n = cost.rows();
  Assignment out;
  out.column_of_row.assign(n, 0);
  if (n == 0) return out;

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row matched to column j, column 0 is virtual.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= n; ++j) out.column_of_row[p[j] - 1] = j - 1;
  // Recompute the cost from the matching rather than from the duals to avoid
  // accumulated rounding in -v[0].
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += cost(r, out.column_of_row[r]);
  out.total_cost = total;
  return out;
}

TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              const CostMatrix& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (cost.rows() != m || cost.cols() != n) throw std::invalid_argument("transport: cost shape mismatch");
  if (m == 0 || n == 0) throw std::invalid_argument("transport: empty marginal");
  for (double s : supply)
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("transport: supplies must be finite and nonnegative");
  for (double d : demand)
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("transport: demands must be finite and nonnegative");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!(cost(i, j) >= 0.0)) throw std::invalid_argument("transport: costs must be nonnegative");

  const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_d = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (total_s <= 0.0) throw std::invalid_argument("transport: zero total mass");
  if (std::abs(total_s - total_d) > 1e-9 * total_s) throw std::invalid_argument("transport: unbalanced marginals");

  std::vector<double> rs(supply.begin(), supply.end());
  std::vector<double> rd(n);
  for (std::size_t j = 0; j < n; ++j) rd[j] = demand[j] * (total_s / total_d);
  const double tol = 1e-14 * total_s;
  for (double& x : rs)
    if (x <= tol) x = 0.0;
  for (double& x : rd)
    if (x <= tol) x = 0.0;

  CostMatrix flow(m, n);
  const std::size_t nodes = m + n;
  std::vector<double> pot(nodes, 0.0), dist(nodes);
  std::vector<std::size_t> prev(nodes);
  std::vector<char> done(nodes);
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

  const std::size_t max_rounds = 64 * (nodes + 1) * (nodes + 1);
  std::size_t rounds = 0;
  auto remaining = [&] {
    double r = 0.0;
    for (double x : rs) r += x;
    return r;
  };

  while (remaining() > tol) {
    if (++rounds > max_rounds) throw std::runtime_error("transport: no convergence");
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), none);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < m; ++i)
      if (rs[i] > 0.0) dist[i] = 0.0;

    for (std::size_t step = 0; step < nodes; ++step) {
      std::size_t u = none;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < inf && (u == none || dist[v] < dist[u])) u = v;
      if (u == none) break;
      done[u] = 1;
      if (u < m) {
        for (std::size_t j = 0; j < n; ++j) {
          const double w = std::max(0.0, cost(u, j) + pot[u] - pot[m + j]);
          if (dist[u] + w < dist[m + j]) {
            dist[m + j] = dist[u] + w;
            prev[m + j] = u;
          }
        }
      } else {
        const std::size_t j = u - m;
        for (std::size_t i = 0; i < m; ++i) {
          if (flow(i, j) <= 0.0) continue;
          const double w = std::max(0.0, -cost(i, j) + pot[u] - pot[i]);
          if (dist[u] + w < dist[i]) {
            dist[i] = dist[u] + w;
            prev[i] = u;
          }
        }
      }
    }

    std::size_t target = none;
    for (std::size_t j = 0; j < n; ++j)
      if (rd[j] > 0.0 && dist[m + j] < inf && (target == none || dist[m + j] < dist[m + target])) target = j;
    if (target == none) throw std::runtime_error("transport: no augmenting path");

    const double dt = dist[m + target];
    for (std::size_t v = 0; v < nodes; ++v) pot[v] += std::min(dist[v], dt);

    // Walk back: sink <- source (forward arc) <- sink (reverse arc) <- ... <- source.
    double delta = rd[target];
    std::size_t v = m + target;
    while (prev[v] != none) {
      const std::size_t p = prev[v];
      if (v < m) delta = std::min(delta, flow(v, p - m));  // reverse arc p(sink) -> v(source)
      v = p;
    }
    const std::size_t start = v;
    delta = std::min(delta, rs[start]);

    v = m + target;
    while (prev[v] != none) {
      const std::size_t p = prev[v];
      if (v >= m) {
        flow(p, v - m) += delta;
      } else {
        double& f = flow(v, p - m);
        f -= delta;
        if (f <= tol) f = 0.0;
      }
      v = p;
    }
    rs[start] -= delta;
    if (rs[start] <= tol) rs[start] = 0.0;
    rd[target] -= delta;
    if (rd[target] <= tol) rd[target] = 0.0;
  }

  TransportPlan plan;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (flow(i, j) > 0.0) {
        plan.flows.push_back({i, j, flow(i, j)});
        plan.total_cost += flow(i, j) * cost(i, j);
      }
  return plan;
}

}  // namespace wbt
