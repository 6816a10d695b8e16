#pragma once

// Grid-based spatial allocation: terrain and runoff forest, the five
// criterion mixed-binary model, the explicit sampling baseline and the
// projection of sampled points onto the frontier.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "refpoint/lp_model.hpp"
#include "refpoint/parallel.hpp"
#include "refpoint/random.hpp"
#include "refpoint/scalarize.hpp"

namespace refpoint {

inline constexpr std::size_t kSpecies = 3;
inline constexpr std::size_t kGridCriteria = 2 + kSpecies;
inline constexpr std::size_t kNoCell = static_cast<std::size_t>(-1);

struct Range {
  double lo = 1.0;
  double hi = 10.0;
};

struct ParameterRanges {
  Range t, d, c, n, cost;
};

/// Cells are indexed row-major, cell = i * cols + j.
struct GridInstance {
  std::size_t rows = 0, cols = 0;
  std::vector<double> elevation;
  /// Runoff antecedent (highest neighbour), kNoCell for peaks.
  std::vector<std::size_t> antecedent;
  std::vector<double> t, d, c, cost;
  std::array<std::vector<double>, kSpecies> n;
  double budget = 0.0;
  std::optional<std::size_t> k;

  std::size_t cells() const { return rows * cols; }
  bool operator==(const GridInstance&) const = default;
};

/// Managed cells as a row-major 0/1 mask.
struct AllocationDecision {
  std::vector<std::uint8_t> managed;

  std::size_t count() const { return static_cast<std::size_t>(std::count(managed.begin(), managed.end(), 1)); }
  bool operator==(const AllocationDecision&) const = default;
};

inline std::string cell_suffix(const GridInstance& g, std::size_t cell) {
  return std::to_string(cell / g.cols) + "." + std::to_string(cell % g.cols);
}
inline std::string manage_name(const GridInstance& g, std::size_t cell) { return "x." + cell_suffix(g, cell); }
inline std::string time_name(const GridInstance& g, std::size_t cell) { return "T." + cell_suffix(g, cell); }

inline const std::vector<std::string>& grid_criterion_names() {
  static const std::vector<std::string> names{"WTT", "CS", "N_1", "N_2", "N_3"};
  return names;
}

/// Moore neighbourhood of a cell.
inline std::vector<std::size_t> neighbours(const GridInstance& g, std::size_t cell) {
  std::vector<std::size_t> out;
  const auto i = static_cast<long>(cell / g.cols), j = static_cast<long>(cell % g.cols);
  for (long di = -1; di <= 1; ++di)
    for (long dj = -1; dj <= 1; ++dj) {
      if (di == 0 && dj == 0) continue;
      const long a = i + di, b = j + dj;
      if (a < 0 || b < 0 || a >= static_cast<long>(g.rows) || b >= static_cast<long>(g.cols)) continue;
      out.push_back(static_cast<std::size_t>(a) * g.cols + static_cast<std::size_t>(b));
    }
  return out;
}

/// Highest strictly higher neighbour of every cell, ties broken by `rng`.
inline std::vector<std::size_t> runoff_antecedents(const GridInstance& g, Rng& rng) {
  std::vector<std::size_t> out(g.cells(), kNoCell);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    double top = g.elevation[cell];
    std::vector<std::size_t> best;
    for (std::size_t nb : neighbours(g, cell)) {
      const double e = g.elevation[nb];
      if (e > top) {
        top = e;
        best = {nb};
      } else if (e == top && !best.empty()) {
        best.push_back(nb);
      }
    }
    if (!best.empty()) out[cell] = best.size() == 1 ? best[0] : best[rng.below(best.size())];
  }
  return out;
}

/// Cells ordered so that every antecedent precedes its dependants.
inline std::vector<std::size_t> topological_order(const GridInstance& g) {
  const std::size_t N = g.cells();
  std::vector<std::vector<std::size_t>> children(N);
  std::vector<std::size_t> order;
  order.reserve(N);
  for (std::size_t cell = 0; cell < N; ++cell) {
    if (g.antecedent[cell] == kNoCell) order.push_back(cell);
    else children[g.antecedent[cell]].push_back(cell);
  }
  for (std::size_t head = 0; head < order.size(); ++head)
    for (std::size_t ch : children[order[head]]) order.push_back(ch);
  if (order.size() != N) throw std::invalid_argument("runoff antecedents contain a cycle");
  return order;
}

/// Number of cells whose runoff path passes through each cell.
inline std::vector<std::size_t> descendants(const GridInstance& g) {
  const auto order = topological_order(g);
  std::vector<std::size_t> out(g.cells(), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (g.antecedent[*it] != kNoCell) out[g.antecedent[*it]] += out[*it] + 1;
  return out;
}

inline std::vector<std::string> validate(const GridInstance& g) {
  std::vector<std::string> out;
  const std::size_t N = g.cells();
  if (N == 0) {
    out.push_back("grid has no cells");
    return out;
  }
  auto sized = [&](const std::vector<double>& v, const char* what, bool positive) {
    if (v.size() != N) {
      out.push_back(std::string(what) + " table has wrong size");
      return;
    }
    for (double x : v)
      if (!std::isfinite(x) || (positive && x <= 0.0)) {
        out.push_back(std::string(what) + " table has an invalid entry");
        return;
      }
  };
  sized(g.elevation, "elevation", false);
  sized(g.t, "t", true);
  sized(g.d, "d", true);
  sized(g.c, "c", true);
  sized(g.cost, "cost", true);
  for (std::size_t s = 0; s < kSpecies; ++s) sized(g.n[s], ("n_" + std::to_string(s + 1)).c_str(), true);
  if (!(g.budget > 0.0) || !std::isfinite(g.budget)) out.push_back("budget must be positive");
  if (g.k && *g.k > N) out.push_back("cardinality exceeds the number of cells");
  if (g.antecedent.size() != N) {
    out.push_back("antecedent table has wrong size");
    return out;
  }
  if (!out.empty()) return out;
  for (std::size_t cell = 0; cell < N; ++cell) {
    const auto nb = neighbours(g, cell);
    double top = g.elevation[cell];
    for (std::size_t q : nb) top = std::max(top, g.elevation[q]);
    const std::size_t a = g.antecedent[cell];
    if (a == kNoCell) {
      if (top > g.elevation[cell]) out.push_back("cell " + cell_suffix(g, cell) + " has a higher neighbour but no antecedent");
    } else if (std::find(nb.begin(), nb.end(), a) == nb.end() || g.elevation[a] != top || top <= g.elevation[cell]) {
      out.push_back("antecedent of cell " + cell_suffix(g, cell) + " is not its highest neighbour");
    }
  }
  return out;
}

/// Seeded instance: elevation is a sum of radial bumps, parameters are
/// uniform over `ranges`. Without an explicit budget, B = 0.9 * K * median
/// cost when K is set and 0.1 * total cost otherwise.
inline GridInstance generate_instance(std::uint64_t seed, std::size_t rows, std::size_t cols,
                                      const ParameterRanges& ranges = {}, std::optional<std::size_t> k = std::nullopt,
                                      std::optional<double> budget = std::nullopt) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("grid needs at least 2 rows and 2 columns");
  Rng rng(seed);
  GridInstance g;
  g.rows = rows;
  g.cols = cols;
  g.k = k;
  const std::size_t N = g.cells();
  const double span = static_cast<double>(std::max(rows, cols));
  const std::size_t bumps = 2 + N / 60;
  g.elevation.assign(N, 0.0);
  for (std::size_t b = 0; b < bumps; ++b) {
    const double ci = rng.uniform(0.0, static_cast<double>(rows - 1));
    const double cj = rng.uniform(0.0, static_cast<double>(cols - 1));
    const double h = rng.uniform(0.5, 1.5);
    const double r = rng.uniform(0.15, 0.4) * span;
    for (std::size_t cell = 0; cell < N; ++cell) {
      const double di = static_cast<double>(cell / cols) - ci, dj = static_cast<double>(cell % cols) - cj;
      g.elevation[cell] += h * std::exp(-(di * di + dj * dj) / (2.0 * r * r));
    }
  }
  auto draw = [&](const Range& r) {
    std::vector<double> v(N);
    for (double& x : v) x = rng.uniform(r.lo, r.hi);
    return v;
  };
  g.t = draw(ranges.t);
  g.d = draw(ranges.d);
  g.c = draw(ranges.c);
  for (auto& table : g.n) table = draw(ranges.n);
  g.cost = draw(ranges.cost);
  g.antecedent = runoff_antecedents(g, rng);
  if (budget) {
    g.budget = *budget;
  } else if (k) {
    std::vector<double> sorted = g.cost;
    std::sort(sorted.begin(), sorted.end());
    const double median = N % 2 ? sorted[N / 2] : 0.5 * (sorted[N / 2 - 1] + sorted[N / 2]);
    g.budget = 0.9 * static_cast<double>(*k) * median;
  } else {
    g.budget = 0.1 * std::accumulate(g.cost.begin(), g.cost.end(), 0.0);
  }
  return g;
}

inline bool feasible(const GridInstance& g, const AllocationDecision& x, double tol = 1e-9) {
  if (x.managed.size() != g.cells()) return false;
  double spent = 0.0;
  for (std::size_t cell = 0; cell < g.cells(); ++cell)
    if (x.managed[cell]) spent += g.cost[cell];
  if (spent > g.budget + tol * std::max(1.0, g.budget)) return false;
  return !g.k || x.count() == *g.k;
}

/// T(cell) = T(antecedent) + t + x d; returns the per-cell times.
inline std::vector<double> travel_times(const GridInstance& g, const AllocationDecision& x) {
  std::vector<double> T(g.cells(), 0.0);
  for (std::size_t cell : topological_order(g)) {
    const std::size_t a = g.antecedent[cell];
    T[cell] = (a == kNoCell ? 0.0 : T[a]) + g.t[cell] + (x.managed[cell] ? g.d[cell] : 0.0);
  }
  return T;
}

inline double water_travel_time(const GridInstance& g, const AllocationDecision& x) {
  const auto T = travel_times(g, x);
  return std::accumulate(T.begin(), T.end(), 0.0);
}

/// (WTT, CS, N_1, N_2, N_3) of a decision; rejects infeasible decisions.
inline CriterionVector evaluate_decision(const GridInstance& g, const AllocationDecision& x) {
  if (!feasible(g, x)) throw std::invalid_argument("decision violates the budget or cardinality constraint");
  std::vector<double> z(kGridCriteria, 0.0);
  z[0] = water_travel_time(g, x);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    if (!x.managed[cell]) continue;
    z[1] += g.c[cell];
    for (std::size_t s = 0; s < kSpecies; ++s) z[2 + s] += g.n[s][cell];
  }
  return CriterionVector(std::move(z));
}

/// Variables x.i.j (binary) then T.i.j; one travel-time row per cell,
/// the budget row and, when K is set, the cardinality row.
inline MoLpModel build_grid_model(const GridInstance& g) {
  if (auto v = validate(g); !v.empty()) throw ValidationError(std::move(v));
  const std::size_t N = g.cells();
  MoLpModel m;
  for (std::size_t cell = 0; cell < N; ++cell) m.variables.push_back({manage_name(g, cell), 0.0, 1.0, VarKind::Binary});
  for (std::size_t cell = 0; cell < N; ++cell) m.variables.push_back({time_name(g, cell), 0.0, kInfinity});
  for (std::size_t cell = 0; cell < N; ++cell) {
    // T(c) - T(A(c)) - d(c) x(c) = t(c)
    Constraint row;
    row.expr.add(time_name(g, cell), 1.0);
    if (g.antecedent[cell] != kNoCell) row.expr.add(time_name(g, g.antecedent[cell]), -1.0);
    row.expr.add(manage_name(g, cell), -g.d[cell]);
    row.sense = Sense::Equal;
    row.rhs = g.t[cell];
    m.constraints.push_back(std::move(row));
  }
  Constraint budget;
  for (std::size_t cell = 0; cell < N; ++cell) budget.expr.add(manage_name(g, cell), g.cost[cell]);
  budget.rhs = g.budget;
  m.constraints.push_back(std::move(budget));
  if (g.k) {
    Constraint card;
    for (std::size_t cell = 0; cell < N; ++cell) card.expr.add(manage_name(g, cell), 1.0);
    card.sense = Sense::Equal;
    card.rhs = static_cast<double>(*g.k);
    m.constraints.push_back(std::move(card));
  }
  LinearExpr wtt, cs;
  std::array<LinearExpr, kSpecies> ns;
  for (std::size_t cell = 0; cell < N; ++cell) {
    wtt.add(time_name(g, cell), 1.0);
    cs.add(manage_name(g, cell), g.c[cell]);
    for (std::size_t s = 0; s < kSpecies; ++s) ns[s].add(manage_name(g, cell), g.n[s][cell]);
  }
  const auto& names = grid_criterion_names();
  m.add_objective(names[0], std::move(wtt));
  m.add_objective(names[1], std::move(cs));
  for (std::size_t s = 0; s < kSpecies; ++s) m.add_objective(names[2 + s], std::move(ns[s]));
  m.meta = {{"generator", "grid"}, {"rows", g.rows}, {"cols", g.cols}};
  return m;
}

/// Equivalent model over the x.i.j variables alone: the travel-time rows are
/// solved in closed form, WTT = sum_c (1 + desc(c)) (t(c) + d(c) x(c)).
/// Same feasible decisions and criterion values, a much smaller LP.
inline MoLpModel build_condensed_grid_model(const GridInstance& g) {
  if (auto v = validate(g); !v.empty()) throw ValidationError(std::move(v));
  const std::size_t N = g.cells();
  const auto desc = descendants(g);
  MoLpModel m;
  for (std::size_t cell = 0; cell < N; ++cell) m.variables.push_back({manage_name(g, cell), 0.0, 1.0, VarKind::Binary});
  Constraint budget;
  for (std::size_t cell = 0; cell < N; ++cell) budget.expr.add(manage_name(g, cell), g.cost[cell]);
  budget.rhs = g.budget;
  m.constraints.push_back(std::move(budget));
  if (g.k) {
    Constraint card;
    for (std::size_t cell = 0; cell < N; ++cell) card.expr.add(manage_name(g, cell), 1.0);
    card.sense = Sense::Equal;
    card.rhs = static_cast<double>(*g.k);
    m.constraints.push_back(std::move(card));
  }
  LinearExpr wtt, cs;
  std::array<LinearExpr, kSpecies> ns;
  for (std::size_t cell = 0; cell < N; ++cell) {
    const double reach = 1.0 + static_cast<double>(desc[cell]);
    wtt.constant += reach * g.t[cell];
    wtt.add(manage_name(g, cell), reach * g.d[cell]);
    cs.add(manage_name(g, cell), g.c[cell]);
    for (std::size_t s = 0; s < kSpecies; ++s) ns[s].add(manage_name(g, cell), g.n[s][cell]);
  }
  const auto& names = grid_criterion_names();
  m.add_objective(names[0], std::move(wtt));
  m.add_objective(names[1], std::move(cs));
  for (std::size_t s = 0; s < kSpecies; ++s) m.add_objective(names[2 + s], std::move(ns[s]));
  m.meta = {{"generator", "grid"}, {"rows", g.rows}, {"cols", g.cols}, {"form", "condensed"}};
  return m;
}

/// Reads the managed mask from a solution of either grid model.
inline AllocationDecision decision_from_values(const GridInstance& g, const std::vector<double>& values) {
  if (values.size() < g.cells()) throw std::invalid_argument("decision vector is too short for this grid");
  AllocationDecision x;
  x.managed.resize(g.cells());
  for (std::size_t cell = 0; cell < g.cells(); ++cell) x.managed[cell] = values[cell] > 0.5 ? 1 : 0;
  return x;
}

/// Full variable assignment of build_grid_model for a decision.
inline std::vector<double> model_values(const GridInstance& g, const AllocationDecision& x) {
  std::vector<double> v(2 * g.cells());
  const auto T = travel_times(g, x);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    v[cell] = x.managed[cell];
    v[g.cells() + cell] = T[cell];
  }
  return v;
}

struct ExplicitPoint {
  AllocationDecision decision;
  CriterionVector criteria;
};

/// Draws `samples` feasible decisions (uniform K-subsets with rejection, or
/// a random greedy fill under the budget when K is unset), keeps the
/// mutually non-dominated ones in first-seen order and truncates to `keep`.
inline std::vector<ExplicitPoint> explicit_baseline(const GridInstance& g, std::size_t samples, std::size_t keep,
                                                    std::uint64_t seed) {
  if (samples < keep) throw std::invalid_argument("samples must be at least keep");
  constexpr std::size_t kProbeDraws = 100'000;
  constexpr double kMinRate = 1e-3;
  const std::size_t N = g.cells();
  Rng rng(seed);
  std::vector<ExplicitPoint> drawn;
  drawn.reserve(samples);
  std::vector<std::size_t> perm(N);
  std::size_t draws = 0;
  while (drawn.size() < samples) {
    if (draws == kProbeDraws && static_cast<double>(drawn.size()) < kMinRate * static_cast<double>(draws))
      throw std::runtime_error("explicit sampler aborted: feasibility rate below 0.1% over the first 100000 draws");
    ++draws;
    std::iota(perm.begin(), perm.end(), 0);
    AllocationDecision x;
    x.managed.assign(N, 0);
    if (g.k) {
      for (std::size_t i = 0; i < *g.k; ++i) {
        std::swap(perm[i], perm[i + rng.below(N - i)]);
        x.managed[perm[i]] = 1;
      }
      if (!feasible(g, x)) continue;
    } else {
      double spent = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        std::swap(perm[i], perm[i + rng.below(N - i)]);
        if (spent + g.cost[perm[i]] <= g.budget) {
          spent += g.cost[perm[i]];
          x.managed[perm[i]] = 1;
        }
      }
    }
    auto z = evaluate_decision(g, x);
    drawn.push_back({std::move(x), std::move(z)});
  }
  std::vector<CriterionVector> pts;
  pts.reserve(drawn.size());
  for (const auto& e : drawn) pts.push_back(e.criteria);
  std::vector<ExplicitPoint> out;
  for (std::size_t i : nondominated_filter(pts)) {
    if (out.size() == keep) break;
    out.push_back(std::move(drawn[i]));
  }
  return out;
}

/// min_j (projected_j - explicit_j) / explicit_j.
inline double relative_gap(const CriterionVector& explicit_point, const CriterionVector& projected) {
  if (explicit_point.size() != projected.size()) throw std::invalid_argument("relative_gap: length mismatch");
  double gap = kInfinity;
  for (std::size_t j = 0; j < explicit_point.size(); ++j) {
    if (!(explicit_point[j] > 0.0)) throw std::invalid_argument("relative_gap: explicit criteria must be positive");
    gap = std::min(gap, (projected[j] - explicit_point[j]) / explicit_point[j]);
  }
  return gap;
}

struct ProjectionPair {
  CriterionVector explicit_point;
  CriterionVector projected;
  AllocationDecision decision;
  SolveStatus status = SolveStatus::Infeasible;
  double gap = 0.0;
  double seconds = 0.0;
};

struct ProjectionReport {
  std::vector<ProjectionPair> pairs;
  double mean_gap = 0.0;
};

/// Uses every explicit point as a reference point of the (condensed) grid
/// model.
inline ProjectionReport project_and_gap(const GridInstance& g, const std::vector<ExplicitPoint>& points,
                                        const CriterionBounds& bounds, const SolverOptions& options = {},
                                        unsigned threads = 1) {
  const auto model = build_condensed_grid_model(g);
  ProjectionReport rep;
  rep.pairs.resize(points.size());
  parallel_for(points.size(), threads, [&](std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    const auto res = solve_reference_point(model, as_reference(points[k].criteria), bounds, options);
    auto& pair = rep.pairs[k];
    pair.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    pair.explicit_point = points[k].criteria;
    pair.status = res.outcome.status;
    if (res.outcome.criteria.values.empty()) throw std::runtime_error(std::string("projection failed: ") + to_string(res.outcome.status));
    pair.decision = decision_from_values(g, res.outcome.decision);
    pair.projected = evaluate_decision(g, pair.decision);
    pair.gap = relative_gap(pair.explicit_point, pair.projected);
  });
  double total = 0.0;
  for (const auto& p : rep.pairs) total += p.gap;
  rep.mean_gap = rep.pairs.empty() ? 0.0 : total / static_cast<double>(rep.pairs.size());
  return rep;
}

inline ProjectionReport project_and_gap(const GridInstance& g, const std::vector<ExplicitPoint>& points,
                                        const SolverOptions& options = {}, unsigned threads = 1) {
  return project_and_gap(g, points, criterion_bounds(build_condensed_grid_model(g), options), options, threads);
}

/// Row-major 0/1 text grid, one line per row.
inline std::string mask_text(const GridInstance& g, const AllocationDecision& x) {
  std::string out;
  out.reserve(g.cells() + g.rows);
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = 0; j < g.cols; ++j) out += x.managed[i * g.cols + j] ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline json grid_to_json(const GridInstance& g) {
  auto table = [&](const std::vector<double>& v) {
    json rows = json::array();
    for (std::size_t i = 0; i < g.rows; ++i)
      rows.push_back(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(i * g.cols),
                                         v.begin() + static_cast<std::ptrdiff_t>((i + 1) * g.cols)));
    return rows;
  };
  json ante = json::array();
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const std::size_t a = g.antecedent[cell];
    ante.push_back(a == kNoCell ? json(nullptr) : json::array({a / g.cols, a % g.cols}));
  }
  json n = json::array();
  for (const auto& s : g.n) n.push_back(table(s));
  json j = {{"rows", g.rows}, {"cols", g.cols}, {"elevation", table(g.elevation)},
            {"antecedent", ante}, {"t", table(g.t)}, {"d", table(g.d)}, {"c", table(g.c)},
            {"n", n}, {"cost", table(g.cost)}, {"budget", g.budget}};
  j["k"] = g.k ? json(*g.k) : json(nullptr);
  return j;
}

inline GridInstance grid_from_json(const json& j) {
  try {
    GridInstance g;
    g.rows = j.at("rows").get<std::size_t>();
    g.cols = j.at("cols").get<std::size_t>();
    auto table = [&](const json& rows) {
      std::vector<double> v;
      for (const auto& r : rows)
        for (const auto& x : r) v.push_back(x.get<double>());
      return v;
    };
    g.elevation = table(j.at("elevation"));
    for (const auto& a : j.at("antecedent"))
      g.antecedent.push_back(a.is_null() ? kNoCell : a.at(0).get<std::size_t>() * g.cols + a.at(1).get<std::size_t>());
    g.t = table(j.at("t"));
    g.d = table(j.at("d"));
    g.c = table(j.at("c"));
    const auto& n = j.at("n");
    if (n.size() != kSpecies) throw ValidationError({"grid needs exactly 3 species tables"});
    for (std::size_t s = 0; s < kSpecies; ++s) g.n[s] = table(n.at(s));
    g.cost = table(j.at("cost"));
    g.budget = j.at("budget").get<double>();
    if (j.contains("k") && !j.at("k").is_null()) g.k = j.at("k").get<std::size_t>();
    if (auto v = validate(g); !v.empty()) throw ValidationError(std::move(v));
    return g;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed grid section: ") + e.what()});
  }
}

}  // namespace refpoint
