#pragma once

// Pareto dominance, criterion ranges, the augmented achievement
// scalarization for reference points, the weighted-sum baseline, and the
// reference-point / weight sweeps built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "refpoint/lp_model.hpp"
#include "refpoint/parallel.hpp"
#include "refpoint/simplex.hpp"

namespace refpoint {

/// A point of the criteria space, aligned with MoLpModel::objectives and
/// expressed in maximization form.
template <class Tag>
struct Point {
  std::vector<double> values;

  Point() = default;
  explicit Point(std::vector<double> v) : values(std::move(v)) {}
  Point(std::initializer_list<double> v) : values(v) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t j) const { return values[j]; }
  double& operator[](std::size_t j) { return values[j]; }
  bool operator==(const Point&) const = default;
};

struct CriterionTag {};
struct ReferenceTag {};
using CriterionVector = Point<CriterionTag>;
using ReferencePoint = Point<ReferenceTag>;

inline ReferencePoint as_reference(const CriterionVector& c) { return ReferencePoint(c.values); }

/// Raised when criterion ranges cannot be established.
class BoundsError : public std::runtime_error {
 public:
  BoundsError(const std::string& what, std::string criterion = {})
      : std::runtime_error(what), criterion_(std::move(criterion)) {}
  const std::string& criterion() const noexcept { return criterion_; }

 private:
  std::string criterion_;
};

/// a dominates b: a_j >= b_j for every j and a_k > b_k for some k. A
/// positive `tol` requires the strict improvement to exceed it and forgives
/// shortfalls below it.
template <class T1, class T2>
bool dominates(const Point<T1>& a, const Point<T2>& b, double tol = 0.0) {
  if (a.size() != b.size()) throw std::invalid_argument("dominates: criterion vectors differ in length");
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] < b[j] - tol) return false;
    if (a[j] > b[j] + tol) strict = true;
  }
  return strict;
}

/// Indices of the mutually non-dominated points, in input order. Identical
/// points are all kept.
inline std::vector<std::size_t> nondominated_filter(const std::vector<CriterionVector>& points, double tol = 0.0) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  // A dominating point is lexicographically greater, so it is visited first.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].values > points[b].values; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool dominated = false;
    for (std::size_t k : kept)
      if (dominates(points[k], points[i], tol)) {
        dominated = true;
        break;
      }
    if (!dominated) kept.push_back(i);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Per-criterion range [z_min, z_max] over the feasible set.
struct CriterionBounds {
  std::vector<double> z_min;
  std::vector<double> z_max;

  std::size_t size() const { return z_min.size(); }
  double range(std::size_t j) const { return z_max[j] - z_min[j]; }

  bool degenerate(std::size_t j) const {
    return range(j) <= 1e-12 * std::max({1.0, std::abs(z_max[j]), std::abs(z_min[j])});
  }

  /// Normalizing factor 1/(z_max - z_min); 1 for a constant criterion.
  double lambda(std::size_t j) const { return degenerate(j) ? 1.0 : 1.0 / range(j); }

  std::vector<double> lambdas() const {
    std::vector<double> out(size());
    for (std::size_t j = 0; j < size(); ++j) out[j] = lambda(j);
    return out;
  }

  CriterionVector ideal() const { return CriterionVector(z_max); }
};

/// 2p single-objective solves: maximize and minimize every criterion.
inline CriterionBounds criterion_bounds(const MoLpModel& model, const SolverOptions& options = {}) {
  CriterionBounds b;
  for (const auto& obj : model.objectives) {
    const auto hi = solve(model, obj.expr, options);
    const auto lo = solve(model, obj.expr.scaled(-1.0), options);
    for (const auto* s : {&hi, &lo}) {
      if (s->status == SolveStatus::Infeasible) throw BoundsError("empty feasible set");
      if (s->status == SolveStatus::Unbounded) throw BoundsError("unbounded objective " + obj.name, obj.name);
      if (s->status == SolveStatus::IterationLimit)
        throw BoundsError("iteration limit while bounding objective " + obj.name, obj.name);
    }
    b.z_max.push_back(hi.objective_value);
    b.z_min.push_back(-lo.objective_value);
  }
  return b;
}

/// Upper limit on the augmentation coefficient: min_j lambda_j divided by
/// the sum of the criterion ranges. Throws on a constant criterion.
inline double rho_bound(const CriterionBounds& bounds) {
  if (bounds.size() == 0) throw std::invalid_argument("rho_bound: no criteria");
  double min_lambda = kInfinity, total = 0.0;
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    if (bounds.degenerate(j)) throw std::domain_error("rho_bound: criterion " + std::to_string(j) + " is constant");
    min_lambda = std::min(min_lambda, bounds.lambda(j));
    total += bounds.range(j);
  }
  return min_lambda / total;
}

/// Coefficient actually used: half the bound, computed over the
/// non-constant criteria only.
inline double augmentation_rho(const CriterionBounds& bounds) {
  CriterionBounds live;
  for (std::size_t j = 0; j < bounds.size(); ++j)
    if (!bounds.degenerate(j)) {
      live.z_min.push_back(bounds.z_min[j]);
      live.z_max.push_back(bounds.z_max[j]);
    }
  if (live.size() == 0) return 0.5;
  return 0.5 * rho_bound(live);
}

struct SolveOutcome {
  SolveStatus status = SolveStatus::Infeasible;
  /// Aligned with the original model's variables.
  std::vector<double> decision;
  CriterionVector criteria;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

struct ScalarizationResult {
  SolveOutcome outcome;
  /// Optimal value of min_j lambda_j (f_j(x) - ref_j).
  double achievement = 0.0;
  double rho_used = 0.0;
};

namespace detail {

inline std::string fresh_name(const MoLpModel& model, std::string base) {
  const auto index = model.variable_index();
  while (index.count(base)) base += "_";
  return base;
}

inline SolveOutcome make_outcome(const MoLpModel& model, const LpSolution& sol) {
  SolveOutcome out;
  out.status = sol.status;
  out.decision.assign(sol.values.begin(), sol.values.begin() + static_cast<std::ptrdiff_t>(model.variables.size()));
  if ((sol.status == SolveStatus::Optimal || sol.status == SolveStatus::IterationLimit) &&
      std::isfinite(sol.objective_value))
    out.criteria = CriterionVector(evaluate_criteria(model, out.decision));
  return out;
}

}  // namespace detail

/// Builds the augmented achievement program for `ref` (an auxiliary free
/// variable bounded above by every normalized deviation) without solving.
inline MoLpModel achievement_model(const MoLpModel& model, const ReferencePoint& ref, const CriterionBounds& bounds,
                                   double rho, std::string* aux_name = nullptr) {
  const std::size_t p = model.criteria();
  if (ref.size() != p) throw std::invalid_argument("reference point has " + std::to_string(ref.size()) +
                                                   " values, model has " + std::to_string(p) + " criteria");
  if (bounds.size() != p) throw std::invalid_argument("criterion bounds do not match the model");
  for (double v : ref.values)
    if (!std::isfinite(v)) throw std::invalid_argument("reference point values must be finite");
  MoLpModel aug;
  aug.variables = model.variables;
  aug.constraints = model.constraints;
  const std::string z = detail::fresh_name(model, "_achievement");
  aug.variables.push_back({z, -kInfinity, kInfinity, VarKind::Continuous});
  LinearExpr objective;
  objective.add(z, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double lam = bounds.lambda(j);
    const auto& f = model.objectives[j].expr;
    // z - lam * f_j(x) <= -lam * ref_j
    Constraint row;
    row.expr = f.scaled(-lam);
    row.expr.add(z, 1.0);
    row.sense = Sense::LessEqual;
    row.rhs = -lam * ref[j];
    aug.constraints.push_back(std::move(row));
    for (const auto& [v, c] : f.terms) objective.add(v, rho * lam * c);
    objective.constant += rho * lam * (f.constant - ref[j]);
  }
  aug.add_objective("achievement", objective);
  if (aux_name) *aux_name = z;
  return aug;
}

/// Projects `ref` onto the non-dominated set by maximizing the augmented
/// achievement function.
inline ScalarizationResult solve_reference_point(const MoLpModel& model, const ReferencePoint& ref,
                                                 const CriterionBounds& bounds, const SolverOptions& options = {}) {
  const double rho = augmentation_rho(bounds);
  std::string z;
  const auto aug = achievement_model(model, ref, bounds, rho, &z);
  const auto sol = solve(aug, aug.objectives[0].expr, options);
  ScalarizationResult res;
  res.rho_used = rho;
  res.outcome = detail::make_outcome(model, sol);
  if (!res.outcome.criteria.values.empty()) res.achievement = sol.value(aug, z);
  return res;
}

/// Maximizes sum_j w_j lambda_j f_j(x). Ties among optima are broken by
/// the zero-weight criteria (sum of lambda_j f_j over them), so the result
/// is non-dominated even at the ends of a weight sweep. The tie-broken
/// solution replaces the first only when it dominates it by more than 1e-7.
inline SolveOutcome solve_weighted_sum(const MoLpModel& model, const std::vector<double>& weights,
                                       const CriterionBounds& bounds, const SolverOptions& options = {}) {
  if (weights.size() != model.criteria()) throw std::invalid_argument("weight vector length differs from criteria count");
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and non-negative");
    any = any || w > 0.0;
  }
  if (!any) throw std::invalid_argument("weights must not all be zero");
  LinearExpr objective;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double k = weights[j] * bounds.lambda(j);
    for (const auto& [v, c] : model.objectives[j].expr.terms) objective.add(v, k * c);
    objective.constant += k * model.objectives[j].expr.constant;
  }
  const auto first = solve(model, objective, options);
  LinearExpr rest;
  for (std::size_t j = 0; j < weights.size(); ++j)
    if (weights[j] == 0.0)
      for (const auto& [v, c] : model.objectives[j].expr.terms) rest.add(v, bounds.lambda(j) * c);
  if (first.status != SolveStatus::Optimal || rest.terms.empty()) return detail::make_outcome(model, first);
  MoLpModel held = model;
  Constraint keep;
  keep.expr.terms = objective.terms;
  keep.sense = Sense::GreaterEqual;
  keep.rhs = first.objective_value - objective.constant - 1e-12 * std::max(1.0, std::abs(first.objective_value));
  held.constraints.push_back(std::move(keep));
  const auto second = solve(held, rest, options);
  auto base = detail::make_outcome(model, first);
  if (second.status != SolveStatus::Optimal) return base;
  auto better = detail::make_outcome(model, second);
  return dominates(better.criteria, base.criteria, 1e-7) ? better : base;
}

/// Maximizes `first`, then `second` with `first` held at its optimum.
inline SolveOutcome lexicographic_max(const MoLpModel& model, std::size_t first, std::size_t second,
                                      const SolverOptions& options = {}) {
  const auto& f = model.objectives.at(first).expr;
  const auto top = solve(model, f, options);
  if (top.status != SolveStatus::Optimal) return detail::make_outcome(model, top);
  MoLpModel held = model;
  Constraint keep;
  keep.expr = f;
  keep.sense = Sense::GreaterEqual;
  keep.rhs = top.objective_value - 1e-12 * std::max(1.0, std::abs(top.objective_value));
  held.constraints.push_back(std::move(keep));
  return detail::make_outcome(model, solve(held, model.objectives.at(second).expr, options));
}

/// Evenly spaced reference points. For two criteria they lie on the segment
/// between the lexicographic extremes A (criterion 0 first) and B; for more
/// criteria they are Halton points inside the criterion box, starting at
/// sequence index `seed + 1`.
inline std::vector<ReferencePoint> sweep_reference_set(const MoLpModel& model, std::size_t n,
                                                       const CriterionBounds& bounds,
                                                       const SolverOptions& options = {}, std::uint64_t seed = 0) {
  std::vector<ReferencePoint> refs;
  const std::size_t p = model.criteria();
  if (p == 2) {
    const auto a = lexicographic_max(model, 0, 1, options);
    const auto b = lexicographic_max(model, 1, 0, options);
    if (!a.optimal() || !b.optimal()) throw BoundsError("extreme points of the frontier are not available");
    for (std::size_t k = 0; k < n; ++k) {
      const double t = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
      refs.emplace_back(std::vector<double>{a.criteria[0] + t * (b.criteria[0] - a.criteria[0]),
                                            a.criteria[1] + t * (b.criteria[1] - a.criteria[1])});
    }
    return refs;
  }
  static constexpr std::uint32_t kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                              43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};
  if (p > std::size(kPrimes)) throw std::invalid_argument("too many criteria for the Halton sweep");
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> z(p);
    for (std::size_t j = 0; j < p; ++j) {
      // Radical inverse of the sequence index in base prime_j.
      std::uint64_t i = seed + k + 1;
      const double base = kPrimes[j];
      double f = 1.0, u = 0.0;
      while (i > 0) {
        f /= base;
        u += f * static_cast<double>(i % kPrimes[j]);
        i /= kPrimes[j];
      }
      z[j] = bounds.z_min[j] + u * bounds.range(j);
    }
    refs.emplace_back(std::move(z));
  }
  return refs;
}

inline std::vector<ScalarizationResult> sweep_reference_points(const MoLpModel& model, std::size_t n,
                                                               const CriterionBounds& bounds,
                                                               const SolverOptions& options = {},
                                                               std::uint64_t seed = 0, unsigned threads = 1) {
  const auto refs = sweep_reference_set(model, n, bounds, options, seed);
  std::vector<ScalarizationResult> out(refs.size());
  parallel_for(refs.size(), threads,
               [&](std::size_t k) { out[k] = solve_reference_point(model, refs[k], bounds, options); });
  return out;
}

/// Weighted-sum solves for w_k = (k/(n-1), 1 - k/(n-1)), k = 0..n-1.
inline std::vector<SolveOutcome> sweep_weights(const MoLpModel& model, std::size_t n, const CriterionBounds& bounds,
                                               const SolverOptions& options = {}, unsigned threads = 1) {
  if (model.criteria() != 2) throw std::invalid_argument("weight sweep needs exactly two criteria");
  std::vector<SolveOutcome> out(n);
  parallel_for(n, threads, [&](std::size_t k) {
    const double t = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
    out[k] = solve_weighted_sum(model, {t, 1.0 - t}, bounds, options);
  });
  return out;
}

/// Number of distinct criterion vectors, two vectors being equal when every
/// component agrees within `tol` (relative to magnitude, floor 1).
inline std::size_t count_distinct(const std::vector<CriterionVector>& pts, double tol = 1e-7) {
  std::vector<const CriterionVector*> seen;
  for (const auto& p : pts) {
    bool dup = false;
    for (const auto* q : seen) {
      bool same = p.size() == q->size();
      for (std::size_t j = 0; same && j < p.size(); ++j)
        same = std::abs(p[j] - (*q)[j]) <= tol * std::max(1.0, std::abs(p[j]));
      if (same) {
        dup = true;
        break;
      }
    }
    if (!dup) seen.push_back(&p);
  }
  return seen.size();
}

}  // namespace refpoint
