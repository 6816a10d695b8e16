#pragma once

// Bounded-variable simplex (primal two-phase + dual reoptimization) over a
// dense tableau, and depth-first branch-and-bound for binary variables.
//
// This is the only place in the library that does numerical linear algebra.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refpoint/lp_model.hpp"

namespace refpoint {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

struct Tolerances {
  double feasibility = 1e-9;
  double integrality = 1e-6;
  double relative_optimality = 1e-9;
  double reduced_cost = 1e-9;
  double pivot = 1e-9;
};

struct SolverOptions {
  Tolerances tol;
  std::size_t iteration_limit = 5'000'000;
  std::size_t node_limit = 2'000'000;
  /// Consecutive degenerate pivots before basic bounds are perturbed; a
  /// second stall while perturbed switches to Bland's rule.
  std::size_t stall_threshold = 50;
  /// Diagnostic trace; one line per phase / branch-and-bound event.
  std::ostream* trace = nullptr;
};

struct LpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  /// Aligned with MoLpModel::variables.
  std::vector<double> values;
  double objective_value = 0.0;
  /// Best proven upper bound (equals objective_value for a finished solve).
  double best_bound = 0.0;
  std::size_t iterations = 0;
  std::size_t nodes = 0;
  /// Incumbent objective values in the order they were found.
  std::vector<double> incumbent_trace;

  bool optimal() const { return status == SolveStatus::Optimal; }

  double gap() const {
    if (status != SolveStatus::Optimal && status != SolveStatus::IterationLimit) return kInfinity;
    return (best_bound - objective_value) / std::max(1.0, std::abs(objective_value));
  }

  double value(const MoLpModel& model, const std::string& name) const {
    for (std::size_t i = 0; i < model.variables.size(); ++i)
      if (model.variables[i].name == name) return values.at(i);
    throw std::out_of_range("no variable named " + name);
  }
};

namespace detail {

/// Row-wise dense copy of a model with one objective, constants folded.
struct CompiledLp {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> a;  // m x n
  std::vector<double> rhs;
  std::vector<Sense> sense;
  std::vector<double> lower, upper, cost;
  double cost_constant = 0.0;
  std::vector<std::size_t> binaries;
};

inline CompiledLp compile(const MoLpModel& model, const LinearExpr& objective) {
  if (auto violations = validate(model); !violations.empty()) throw ValidationError(std::move(violations));
  CompiledLp lp;
  lp.n = model.variables.size();
  lp.m = model.constraints.size();
  const auto index = model.variable_index();
  lp.a.assign(lp.m * lp.n, 0.0);
  for (std::size_t i = 0; i < lp.m; ++i) {
    const auto& c = model.constraints[i];
    for (const auto& [v, coef] : c.expr.terms) lp.a[i * lp.n + index.at(v)] += coef;
    lp.rhs.push_back(c.rhs - c.expr.constant);
    lp.sense.push_back(c.sense);
  }
  lp.cost.assign(lp.n, 0.0);
  for (const auto& [v, coef] : objective.terms) {
    auto it = index.find(v);
    if (it == index.end()) throw ValidationError({"unknown variable " + v + " in objective"});
    lp.cost[it->second] += coef;
  }
  lp.cost_constant = objective.constant;
  for (std::size_t j = 0; j < lp.n; ++j) {
    const auto& v = model.variables[j];
    lp.lower.push_back(v.lower);
    lp.upper.push_back(v.upper);
    if (v.kind == VarKind::Binary) {
      lp.lower.back() = std::max(0.0, v.lower);
      lp.upper.back() = std::min(1.0, v.upper);
      lp.binaries.push_back(j);
    }
  }
  return lp;
}

enum class ColState : std::uint8_t { Basic, Lower, Upper, Zero };

enum class Outcome { Optimal, Infeasible, Unbounded, Limit, Cutoff };

/// Dense bounded-variable simplex tableau (maximization).
///
/// Columns: n structurals, m row slacks (a_i x + s_i = b_i), then one
/// artificial per row whose starting slack falls outside its bounds.
class Tableau {
 public:
  Tableau(const CompiledLp& lp, const SolverOptions& opt) : opt_(opt), m_(lp.m), n_(lp.n) {
    // Starting point: every structural at a finite bound (or 0 when free).
    std::vector<double> x0(n_, 0.0);
    std::vector<ColState> st0(n_, ColState::Zero);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lp.lower[j])) {
        x0[j] = lp.lower[j];
        st0[j] = ColState::Lower;
      } else if (std::isfinite(lp.upper[j])) {
        x0[j] = lp.upper[j];
        st0[j] = ColState::Upper;
      }
    }
    std::vector<double> slack_lo(m_), slack_hi(m_), slack_val(m_), art_sign(m_, 0.0), art_val(m_, 0.0);
    std::vector<ColState> slack_state(m_, ColState::Basic);
    std::size_t n_art = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      switch (lp.sense[i]) {
        case Sense::LessEqual: slack_lo[i] = 0.0; slack_hi[i] = kInfinity; break;
        case Sense::GreaterEqual: slack_lo[i] = -kInfinity; slack_hi[i] = 0.0; break;
        case Sense::Equal: slack_lo[i] = 0.0; slack_hi[i] = 0.0; break;
      }
      double activity = 0.0;
      for (std::size_t j = 0; j < n_; ++j) activity += lp.a[i * n_ + j] * x0[j];
      const double s = lp.rhs[i] - activity;
      const double tol = opt_.tol.feasibility * std::max(1.0, std::abs(lp.rhs[i]));
      if (s >= slack_lo[i] - tol && s <= slack_hi[i] + tol) {
        slack_val[i] = s;
      } else {
        const bool below = s < slack_lo[i];
        slack_val[i] = below ? slack_lo[i] : slack_hi[i];
        slack_state[i] = below ? ColState::Lower : ColState::Upper;
        const double resid = s - slack_val[i];
        art_sign[i] = resid > 0 ? 1.0 : -1.0;
        art_val[i] = std::abs(resid);
        ++n_art;
      }
    }

    cols_ = n_ + m_ + n_art;
    a_.assign(m_ * cols_, 0.0);
    t_.assign(m_ * cols_, 0.0);
    b_ = lp.rhs;
    lb_.assign(cols_, 0.0);
    ub_.assign(cols_, 0.0);
    x_.assign(cols_, 0.0);
    state_.assign(cols_, ColState::Lower);
    cost_.assign(cols_, 0.0);
    d_.assign(cols_, 0.0);
    basis_.assign(m_, 0);
    first_art_ = n_ + m_;

    for (std::size_t j = 0; j < n_; ++j) {
      lb_[j] = lp.lower[j];
      ub_[j] = lp.upper[j];
      x_[j] = x0[j];
      state_[j] = st0[j];
      cost_[j] = lp.cost[j];
    }
    std::size_t art = first_art_;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) a_[i * cols_ + j] = lp.a[i * n_ + j];
      const std::size_t s = n_ + i;
      a_[i * cols_ + s] = 1.0;
      lb_[s] = slack_lo[i];
      ub_[s] = slack_hi[i];
      x_[s] = slack_val[i];
      double diag = 1.0;
      if (art_sign[i] != 0.0) {
        state_[s] = slack_state[i];
        a_[i * cols_ + art] = art_sign[i];
        lb_[art] = 0.0;
        ub_[art] = kInfinity;
        x_[art] = art_val[i];
        set_basic(i, art);
        diag = art_sign[i];
        ++art;
      } else {
        set_basic(i, s);
      }
      for (std::size_t k = 0; k < cols_; ++k) t_[i * cols_ + k] = a_[i * cols_ + k] / diag;
    }
  }

  std::size_t iterations() const { return iterations_; }
  std::size_t structurals() const { return n_; }
  double value(std::size_t j) const { return x_[j]; }
  double reduced_cost(std::size_t j) const { return d_[j]; }
  bool basic(std::size_t j) const { return state_[j] == ColState::Basic; }

  /// Objective c·x (without the model constant).
  double objective() const {
    double v = 0.0;
    for (std::size_t j = 0; j < n_; ++j) v += cost_[j] * x_[j];
    return v;
  }

  /// Two-phase primal simplex from the starting basis.
  Outcome solve() {
    if (first_art_ < cols_) {
      std::vector<double> phase1(cols_, 0.0);
      for (std::size_t k = first_art_; k < cols_; ++k) phase1[k] = -1.0;
      install_costs(phase1);
      trace("phase1 start");
      const Outcome o = primal();
      if (o == Outcome::Limit || o == Outcome::Infeasible) return o;
      double infeas = 0.0;
      double scale = 1.0;
      for (double v : b_) scale = std::max(scale, std::abs(v));
      for (std::size_t k = first_art_; k < cols_; ++k) infeas += x_[k];
      trace("phase1 end infeasibility=" + std::to_string(infeas));
      if (infeas > 1e-7 * scale) return Outcome::Infeasible;
      for (std::size_t k = first_art_; k < cols_; ++k) ub_[k] = 0.0;
      drive_out_artificials();
      recompute_primal();
    }
    std::vector<double> phase2(cols_, 0.0);
    std::copy(cost_.begin(), cost_.begin() + static_cast<std::ptrdiff_t>(n_), phase2.begin());
    install_costs(phase2);
    trace("phase2 start");
    return polish(primal());
  }

  /// Changes the bounds of a nonbasic or basic column, keeping basic values
  /// consistent. Nonbasic columns are parked on the bound that preserves
  /// dual feasibility.
  void set_bounds(std::size_t j, double lo, double hi) {
    lb_[j] = lo;
    ub_[j] = hi;
    if (state_[j] == ColState::Basic) return;
    double target;
    ColState st;
    const double rc = opt_.tol.reduced_cost;
    if (lo == hi) {
      target = lo;
      st = ColState::Lower;
    } else if (d_[j] > rc && std::isfinite(hi)) {
      target = hi;
      st = ColState::Upper;
    } else if (std::isfinite(lo)) {
      target = lo;
      st = ColState::Lower;
    } else if (std::isfinite(hi)) {
      target = hi;
      st = ColState::Upper;
    } else {
      target = 0.0;
      st = ColState::Zero;
    }
    shift_nonbasic(j, target);
    state_[j] = st;
  }

  /// Dual simplex after bound changes; stops early once the objective
  /// cannot exceed `cutoff`.
  Outcome reoptimize(double cutoff = -kInfinity) {
    Outcome o = dual(cutoff);
    if (o != Outcome::Optimal) return o;
    return polish(primal());
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  double ftol(std::size_t, double bound) const {
    return opt_.tol.feasibility * std::max(1.0, std::abs(bound));
  }
  bool fixed(std::size_t k) const { return lb_[k] == ub_[k]; }
  double& t(std::size_t i, std::size_t k) { return t_[i * cols_ + k]; }
  double t(std::size_t i, std::size_t k) const { return t_[i * cols_ + k]; }

  void set_basic(std::size_t row, std::size_t col) {
    basis_[row] = col;
    state_[col] = ColState::Basic;
  }

  void trace(const std::string& line) const {
    if (opt_.trace) *opt_.trace << "simplex it=" << iterations_ << ' ' << line << '\n';
  }

  void install_costs(const std::vector<double>& c) {
    phase_cost_ = c;
    recompute_duals();
  }

  void recompute_duals() {
    d_ = phase_cost_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = phase_cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &t_[i * cols_];
      for (std::size_t k = 0; k < cols_; ++k) d_[k] -= cb * row[k];
    }
    for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  /// x_B = B^{-1}(b - N x_N); B^{-1} sits in the slack columns of the tableau.
  void recompute_primal() {
    std::vector<double> y(b_);
    for (std::size_t i = 0; i < m_; ++i) {
      const double* row = &a_[i * cols_];
      double acc = 0.0;
      for (std::size_t k = 0; k < cols_; ++k)
        if (row[k] != 0.0 && state_[k] != ColState::Basic) acc += row[k] * x_[k];
      y[i] -= acc;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      const double* row = &t_[r * cols_ + n_];
      double acc = 0.0;
      for (std::size_t i = 0; i < m_; ++i) acc += row[i] * y[i];
      x_[basis_[r]] = acc;
    }
  }

  /// Rebuilds the tableau from the original columns and the current basis.
  bool refactor() {
    std::vector<double> bmat(m_ * m_), inv(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t r = 0; r < m_; ++r) bmat[i * m_ + r] = a_[i * cols_ + basis_[r]];
      inv[i * m_ + i] = 1.0;
    }
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t p = c;
      for (std::size_t i = c + 1; i < m_; ++i)
        if (std::abs(bmat[i * m_ + c]) > std::abs(bmat[p * m_ + c])) p = i;
      if (std::abs(bmat[p * m_ + c]) < 1e-13) return false;
      if (p != c)
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(bmat[p * m_ + k], bmat[c * m_ + k]);
          std::swap(inv[p * m_ + k], inv[c * m_ + k]);
        }
      const double piv = 1.0 / bmat[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) {
        bmat[c * m_ + k] *= piv;
        inv[c * m_ + k] *= piv;
      }
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == c) continue;
        const double f = bmat[i * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          bmat[i * m_ + k] -= f * bmat[c * m_ + k];
          inv[i * m_ + k] -= f * inv[c * m_ + k];
        }
      }
    }
    std::fill(t_.begin(), t_.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const double aik = a_[i * cols_ + k];
        if (aik == 0.0) continue;
        for (std::size_t r = 0; r < m_; ++r) t_[r * cols_ + k] += inv[r * m_ + i] * aik;
      }
    for (std::size_t r = 0; r < m_; ++r)
      for (std::size_t k = 0; k < cols_; ++k)
        if (std::abs(t_[r * cols_ + k]) < 1e-14) t_[r * cols_ + k] = 0.0;
    for (std::size_t r = 0; r < m_; ++r) t_[r * cols_ + basis_[r]] = 1.0;
    recompute_primal();
    recompute_duals();
    return true;
  }

  void shift_nonbasic(std::size_t j, double target) {
    const double delta = target - x_[j];
    x_[j] = target;
    if (delta == 0.0) return;
    for (std::size_t i = 0; i < m_; ++i) {
      const double a = t(i, j);
      if (a != 0.0) x_[basis_[i]] -= a * delta;
    }
  }

  void pivot(std::size_t r, std::size_t q) {
    double* rowr = &t_[r * cols_];
    const double inv = 1.0 / rowr[q];
    nz_.clear();
    for (std::size_t k = 0; k < cols_; ++k) {
      if (rowr[k] == 0.0) continue;
      rowr[k] *= inv;
      nz_.push_back(k);
    }
    rowr[q] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &t_[i * cols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (std::size_t k : nz_) {
        const double v = row[k] - f * rowr[k];
        row[k] = std::abs(v) < 1e-14 ? 0.0 : v;
      }
      row[q] = 0.0;
    }
    const double dq = d_[q];
    if (dq != 0.0)
      for (std::size_t k : nz_) d_[k] -= dq * rowr[k];
    d_[q] = 0.0;
    set_basic(r, q);
    ++iterations_;
    ++since_refresh_;
  }

  /// Periodic cleanup of accumulated rounding; only between iterations.
  void maybe_refresh() {
    if (since_refresh_ < kRefreshPeriod) return;
    since_refresh_ = 0;
    if (++refreshes_ % kRefactorEvery == 0 && refactor()) return;
    recompute_primal();
    recompute_duals();
  }

  /// Primal simplex with the installed phase costs. Stalling passes run on
  /// randomly widened bounds, followed by a dual cleanup on the true ones.
  Outcome primal() {
    for (int round = 0;; ++round) {
      Outcome o = primal_pass(round < kPerturbRounds);
      if (!perturbed_) return o;
      unperturb();
      if (o != Outcome::Optimal) return o;
      recompute_duals();
      o = dual(-kInfinity);
      if (o != Outcome::Optimal) return o;
    }
  }

  void perturb() {
    saved_lb_ = lb_;
    saved_ub_ = ub_;
    perturbed_ = true;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t k = basis_[i];
      if (std::isfinite(lb_[k])) lb_[k] -= kPerturbation * (1.0 + std::abs(lb_[k])) * (1.0 + next_unit());
      if (std::isfinite(ub_[k])) ub_[k] += kPerturbation * (1.0 + std::abs(ub_[k])) * (1.0 + next_unit());
    }
    trace("perturbed bounds");
  }

  void unperturb() {
    lb_ = saved_lb_;
    ub_ = saved_ub_;
    perturbed_ = false;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (state_[j] == ColState::Lower) x_[j] = lb_[j];
      else if (state_[j] == ColState::Upper) x_[j] = ub_[j];
    }
    recompute_primal();
  }

  double next_unit() {
    lcg_ = lcg_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(lcg_ >> 11) * 0x1.0p-53;
  }

  Outcome primal_pass(bool may_perturb) {
    std::size_t stall = 0;
    const double rc = opt_.tol.reduced_cost;
    const double piv_tol = opt_.tol.pivot;
    while (true) {
      if (iterations_ >= opt_.iteration_limit) return Outcome::Limit;
      maybe_refresh();
      if (stall > opt_.stall_threshold && may_perturb && !perturbed_) {
        perturb();
        stall = 0;
      }
      const bool bland = stall > opt_.stall_threshold;
      if (opt_.trace && iterations_ % 200 == 0) {
        double obj = 0.0;
        for (std::size_t k = 0; k < cols_; ++k) obj += phase_cost_[k] * x_[k];
        trace("primal obj=" + std::to_string(obj) + " stall=" + std::to_string(stall));
      }
      std::size_t q = kNone;
      double dir = 0.0, best = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        const ColState s = state_[j];
        if (s == ColState::Basic || fixed(j)) continue;
        const double dj = d_[j];
        double score = 0.0, dj_dir = 0.0;
        if ((s == ColState::Lower || s == ColState::Zero) && dj > rc) {
          score = dj;
          dj_dir = 1.0;
        } else if ((s == ColState::Upper || s == ColState::Zero) && dj < -rc) {
          score = -dj;
          dj_dir = -1.0;
        } else {
          continue;
        }
        if (bland) {
          q = j;
          dir = dj_dir;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
          dir = dj_dir;
        }
      }
      if (q == kNone) return Outcome::Optimal;

      // Harris two-pass ratio test.
      double theta = kInfinity;
      if (std::isfinite(lb_[q]) && std::isfinite(ub_[q])) theta = ub_[q] - lb_[q];
      double relaxed = theta;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = t(i, q) * dir;
        const std::size_t k = basis_[i];
        if (a > piv_tol && std::isfinite(lb_[k]))
          relaxed = std::min(relaxed, (x_[k] - lb_[k] + ftol(k, lb_[k])) / a);
        else if (a < -piv_tol && std::isfinite(ub_[k]))
          relaxed = std::min(relaxed, (ub_[k] - x_[k] + ftol(k, ub_[k])) / (-a));
      }
      if (!std::isfinite(relaxed)) return Outcome::Unbounded;
      std::size_t leave = kNone;
      bool to_lower = false;
      double best_a = 0.0, best_lim = kInfinity;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = t(i, q) * dir;
        const std::size_t k = basis_[i];
        double lim;
        bool lower_hit;
        if (a > piv_tol && std::isfinite(lb_[k])) {
          lim = (x_[k] - lb_[k]) / a;
          lower_hit = true;
        } else if (a < -piv_tol && std::isfinite(ub_[k])) {
          lim = (ub_[k] - x_[k]) / (-a);
          lower_hit = false;
        } else {
          continue;
        }
        if (lim > relaxed) continue;
        lim = std::max(lim, 0.0);
        bool take;
        if (bland)
          take = leave == kNone || lim < best_lim - 1e-12 ||
                 (lim <= best_lim + 1e-12 && k < basis_[leave]);
        else
          take = std::abs(a) > best_a;
        if (take) {
          leave = i;
          to_lower = lower_hit;
          best_a = std::abs(a);
          best_lim = lim;
        }
      }
      if (leave != kNone && best_lim < theta) theta = best_lim;
      else leave = kNone;
      if (leave == kNone && !std::isfinite(theta)) return Outcome::Unbounded;

      const double step = dir * theta;
      if (step != 0.0) {
        x_[q] += step;
        for (std::size_t i = 0; i < m_; ++i) {
          const double a = t(i, q);
          if (a != 0.0) x_[basis_[i]] -= a * step;
        }
      }
      stall = theta * std::abs(d_[q]) < 1e-12 ? stall + 1 : 0;
      if (leave == kNone) {
        // Bound flip.
        if (dir > 0) {
          x_[q] = ub_[q];
          state_[q] = ColState::Upper;
        } else {
          x_[q] = lb_[q];
          state_[q] = ColState::Lower;
        }
        ++iterations_;
        continue;
      }
      const std::size_t k = basis_[leave];
      pivot(leave, q);
      x_[k] = to_lower ? lb_[k] : ub_[k];
      state_[k] = to_lower ? ColState::Lower : ColState::Upper;
    }
  }

  /// Dual simplex; requires a dual-feasible basis.
  Outcome dual(double cutoff) {
    std::size_t stall = 0;
    const double piv_tol = opt_.tol.pivot;
    const double rc = opt_.tol.reduced_cost;
    while (true) {
      if (iterations_ >= opt_.iteration_limit) return Outcome::Limit;
      maybe_refresh();
      const bool bland = stall > opt_.stall_threshold;
      std::size_t r = kNone;
      double worst = 0.0, delta = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t k = basis_[i];
        double viol = 0.0, want = 0.0;
        if (x_[k] < lb_[k] - ftol(k, lb_[k])) {
          viol = lb_[k] - x_[k];
          want = viol;
        } else if (x_[k] > ub_[k] + ftol(k, ub_[k])) {
          viol = x_[k] - ub_[k];
          want = -viol;
        } else {
          continue;
        }
        if (bland) {
          if (r == kNone || k < basis_[r]) {
            r = i;
            delta = want;
          }
        } else if (viol > worst) {
          worst = viol;
          r = i;
          delta = want;
        }
      }
      if (r == kNone) return Outcome::Optimal;
      if (std::isfinite(cutoff) && objective() <= cutoff) return Outcome::Cutoff;

      // Entering candidates move x_r toward its violated bound.
      auto eligible = [&](std::size_t j, double a, double& ratio) {
        const ColState s = state_[j];
        if (s == ColState::Basic || fixed(j) || std::abs(a) <= piv_tol) return false;
        // x_r changes by -a * dx_j.
        const bool inc = (s == ColState::Lower || s == ColState::Zero) && ((delta > 0) == (a < 0));
        const bool dec = (s == ColState::Upper || s == ColState::Zero) && ((delta > 0) == (a > 0));
        if (!inc && !dec) return false;
        const double dj = inc ? std::max(0.0, -d_[j]) : std::max(0.0, d_[j]);
        ratio = dj / std::abs(a);
        return true;
      };
      double relaxed = kInfinity;
      for (std::size_t j = 0; j < cols_; ++j) {
        double ratio;
        if (!eligible(j, t(r, j), ratio)) continue;
        relaxed = std::min(relaxed, ratio + rc / std::abs(t(r, j)));
      }
      if (!std::isfinite(relaxed)) return Outcome::Infeasible;
      std::size_t q = kNone;
      double best_a = 0.0, best_ratio = kInfinity;
      for (std::size_t j = 0; j < cols_; ++j) {
        double ratio;
        const double a = t(r, j);
        if (!eligible(j, a, ratio) || ratio > relaxed) continue;
        bool take;
        if (bland)
          take = q == kNone || ratio < best_ratio - 1e-12;
        else
          take = std::abs(a) > best_a;
        if (take) {
          q = j;
          best_a = std::abs(a);
          best_ratio = ratio;
        }
      }
      const double a = t(r, q);
      const double dx = -delta / a;
      const std::size_t k = basis_[r];
      x_[q] += dx;
      for (std::size_t i = 0; i < m_; ++i) {
        const double ai = t(i, q);
        if (ai != 0.0) x_[basis_[i]] -= ai * dx;
      }
      stall = std::abs(d_[q] * dx) < 1e-12 ? stall + 1 : 0;
      pivot(r, q);
      const bool to_lower = delta > 0;
      x_[k] = to_lower ? lb_[k] : ub_[k];
      state_[k] = to_lower ? ColState::Lower : ColState::Upper;
    }
  }

  /// Recomputes basic values from scratch and repairs residual
  /// infeasibility left by rounding.
  Outcome polish(Outcome o) {
    for (int round = 0; round < 3 && o == Outcome::Optimal; ++round) {
      recompute_primal();
      bool clean = true;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t k = basis_[i];
        if (x_[k] < lb_[k] - ftol(k, lb_[k]) || x_[k] > ub_[k] + ftol(k, ub_[k])) clean = false;
      }
      if (clean) break;
      recompute_duals();
      o = dual(-kInfinity);
      if (o == Outcome::Optimal) o = primal();
    }
    return o;
  }

  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < first_art_) continue;
      std::size_t q = kNone;
      double best = 1e-7;
      for (std::size_t j = 0; j < first_art_; ++j) {
        if (state_[j] == ColState::Basic) continue;
        if (std::abs(t(r, j)) > best) {
          best = std::abs(t(r, j));
          q = j;
        }
      }
      if (q == kNone) continue;  // redundant row
      const std::size_t k = basis_[r];
      pivot(r, q);
      x_[k] = 0.0;
      state_[k] = ColState::Lower;
    }
  }

  static constexpr double kPerturbation = 1e-7;
  static constexpr int kPerturbRounds = 3;
  static constexpr std::size_t kRefreshPeriod = 100;
  static constexpr std::size_t kRefactorEvery = 20;

  const SolverOptions& opt_;
  std::size_t m_, n_, cols_ = 0, first_art_ = 0;
  std::vector<double> a_, t_, b_, lb_, ub_, x_, cost_, phase_cost_, d_;
  std::vector<double> saved_lb_, saved_ub_;
  bool perturbed_ = false;
  std::uint64_t lcg_ = 0x9e3779b97f4a7c15ULL;
  std::vector<ColState> state_;
  std::vector<std::size_t> basis_, nz_;
  std::size_t iterations_ = 0, since_refresh_ = 0, refreshes_ = 0;
};

inline SolveStatus to_status(Outcome o) {
  switch (o) {
    case Outcome::Optimal: return SolveStatus::Optimal;
    case Outcome::Unbounded: return SolveStatus::Unbounded;
    case Outcome::Limit: return SolveStatus::IterationLimit;
    default: return SolveStatus::Infeasible;
  }
}

inline double check_objective(const CompiledLp& lp, const std::vector<double>& x) {
  double v = lp.cost_constant;
  for (std::size_t j = 0; j < lp.n; ++j) v += lp.cost[j] * x[j];
  return v;
}

}  // namespace detail

/// Maximizes `objective` over the continuous relaxation of `model`.
inline LpSolution solve_lp(const MoLpModel& model, const LinearExpr& objective, const SolverOptions& options = {}) {
  const auto lp = detail::compile(model, objective);
  detail::Tableau tab(lp, options);
  const auto outcome = tab.solve();
  LpSolution sol;
  sol.status = detail::to_status(outcome);
  sol.iterations = tab.iterations();
  sol.values.resize(lp.n);
  for (std::size_t j = 0; j < lp.n; ++j) sol.values[j] = tab.value(j);
  sol.objective_value = detail::check_objective(lp, sol.values);
  sol.best_bound = sol.status == SolveStatus::Unbounded ? kInfinity : sol.objective_value;
  return sol;
}

/// Maximizes `objective` over `model` with binary variables enforced by
/// depth-first branch-and-bound (most-fractional branching, best-bound
/// re-sort of the open list every 1000 nodes).
inline LpSolution solve_milp(const MoLpModel& model, const LinearExpr& objective, const SolverOptions& options = {}) {
  const auto lp = detail::compile(model, objective);
  detail::Tableau tab(lp, options);
  LpSolution sol;
  sol.values.assign(lp.n, 0.0);
  const auto root = tab.solve();
  sol.iterations = tab.iterations();
  if (root != detail::Outcome::Optimal) {
    sol.status = detail::to_status(root);
    for (std::size_t j = 0; j < lp.n; ++j) sol.values[j] = tab.value(j);
    sol.objective_value = detail::check_objective(lp, sol.values);
    sol.best_bound = sol.status == SolveStatus::Unbounded ? kInfinity : sol.objective_value;
    return sol;
  }

  const auto& bins = lp.binaries;
  const std::size_t nb = bins.size();
  const Tolerances& tol = options.tol;
  struct Node {
    std::vector<std::pair<std::uint32_t, std::uint8_t>> fixes;  // (binary slot, value)
    double bound;
  };
  std::vector<Node> open;
  open.push_back({{}, tab.objective()});
  std::vector<int> current(nb, -1);  // -1 free, else fixed value
  std::vector<int> wanted(nb, -1);
  double incumbent = -kInfinity;
  std::vector<double> best_x;
  bool limit_hit = false;
  std::size_t processed = 0;

  auto gap_tol = [&](double inc) { return tol.relative_optimality * std::max(1.0, std::abs(inc)); };
  auto apply = [&](const Node& node) {
    std::fill(wanted.begin(), wanted.end(), -1);
    for (const auto& [slot, v] : node.fixes) wanted[slot] = v;
    for (std::size_t s = 0; s < nb; ++s) {
      if (wanted[s] == current[s]) continue;
      const std::size_t j = bins[s];
      if (wanted[s] < 0)
        tab.set_bounds(j, lp.lower[j], lp.upper[j]);
      else
        tab.set_bounds(j, wanted[s], wanted[s]);
      current[s] = wanted[s];
    }
  };

  bool first = true;
  while (!open.empty()) {
    if (processed >= options.node_limit || tab.iterations() >= options.iteration_limit) {
      limit_hit = true;
      break;
    }
    if (processed > 0 && processed % 1000 == 0)
      std::stable_sort(open.begin(), open.end(), [](const Node& a, const Node& b) { return a.bound < b.bound; });
    Node node = std::move(open.back());
    open.pop_back();
    if (node.bound + lp.cost_constant <= incumbent + gap_tol(incumbent)) continue;

    detail::Outcome o;
    if (first) {
      o = detail::Outcome::Optimal;
      first = false;
    } else {
      apply(node);
      const double cutoff = std::isfinite(incumbent) ? incumbent + gap_tol(incumbent) - lp.cost_constant : -kInfinity;
      o = tab.reoptimize(cutoff);
    }
    ++processed;
    if (o == detail::Outcome::Limit) {
      limit_hit = true;
      open.push_back(std::move(node));
      break;
    }
    if (o != detail::Outcome::Optimal) continue;
    const double obj = tab.objective() + lp.cost_constant;
    if (obj <= incumbent + gap_tol(incumbent)) continue;

    std::size_t branch = nb;
    double most = tol.integrality;
    for (std::size_t s = 0; s < nb; ++s) {
      const double v = tab.value(bins[s]);
      const double frac = std::abs(v - std::round(v));
      if (frac > most) {
        most = frac;
        branch = s;
      }
    }
    if (branch == nb) {
      incumbent = obj;
      best_x.resize(lp.n);
      for (std::size_t j = 0; j < lp.n; ++j) best_x[j] = tab.value(j);
      sol.incumbent_trace.push_back(incumbent);
      if (options.trace)
        *options.trace << "bb node=" << processed << " incumbent=" << incumbent << " open=" << open.size() << '\n';
      continue;
    }
    // Reduced-cost fixing: flipping a nonbasic binary costs at least |d_j|.
    if (std::isfinite(incumbent)) {
      for (std::size_t s = 0; s < nb; ++s) {
        const std::size_t j = bins[s];
        if (current[s] >= 0 || tab.basic(j)) continue;
        if (obj - std::abs(tab.reduced_cost(j)) < incumbent)
          node.fixes.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint8_t>(std::round(tab.value(j))));
      }
    }
    const double v = tab.value(bins[branch]);
    Node down{node.fixes, obj - lp.cost_constant};
    down.fixes.emplace_back(static_cast<std::uint32_t>(branch), 0);
    Node up{std::move(node.fixes), obj - lp.cost_constant};
    up.fixes.emplace_back(static_cast<std::uint32_t>(branch), 1);
    if (v >= 0.5) {
      open.push_back(std::move(down));
      open.push_back(std::move(up));
    } else {
      open.push_back(std::move(up));
      open.push_back(std::move(down));
    }
  }

  sol.nodes = processed;
  double open_bound = -kInfinity;
  for (const auto& node : open) open_bound = std::max(open_bound, node.bound + lp.cost_constant);

  if (best_x.empty()) {
    sol.status = limit_hit ? SolveStatus::IterationLimit : SolveStatus::Infeasible;
    sol.iterations = tab.iterations();
    sol.best_bound = limit_hit ? open_bound : -kInfinity;
    sol.objective_value = -kInfinity;
    return sol;
  }

  // Re-solve with the incumbent's binaries held at their rounded values so
  // the continuous part is consistent with exact 0/1 values.
  for (std::size_t s = 0; s < nb; ++s) {
    const std::size_t j = bins[s];
    const double r = std::round(best_x[j]);
    tab.set_bounds(j, r, r);
  }
  if (tab.reoptimize() == detail::Outcome::Optimal)
    for (std::size_t j = 0; j < lp.n; ++j) best_x[j] = tab.value(j);
  for (std::size_t j : bins) best_x[j] = std::round(best_x[j]);

  sol.values = std::move(best_x);
  sol.objective_value = detail::check_objective(lp, sol.values);
  sol.iterations = tab.iterations();
  sol.status = limit_hit ? SolveStatus::IterationLimit : SolveStatus::Optimal;
  sol.best_bound = limit_hit ? std::max(open_bound, sol.objective_value) : sol.objective_value;
  if (options.trace)
    *options.trace << "bb done nodes=" << processed << " status=" << to_string(sol.status)
                   << " objective=" << sol.objective_value << '\n';
  return sol;
}

/// Dispatches to solve_milp when the model declares binaries.
inline LpSolution solve(const MoLpModel& model, const LinearExpr& objective, const SolverOptions& options = {}) {
  return model.has_binaries() ? solve_milp(model, objective, options) : solve_lp(model, objective, options);
}

}  // namespace refpoint
