#pragma once

// Finite-horizon multi-objective MDPs and their occupancy-measure LP.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "refpoint/lp_model.hpp"
#include "refpoint/random.hpp"
#include "refpoint/scalarize.hpp"

namespace refpoint {

/// Tabular MDP with one reward table per objective. Epochs are 0..horizon-1.
struct MoMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t horizon = 1;
  std::vector<std::string> objective_names;
  /// rewards[j][s * actions + a]
  std::vector<std::vector<double>> rewards;
  /// transition[(s * actions + a) * states + s2]
  std::vector<double> transition;
  /// Initial state distribution; empty means uniform.
  std::vector<double> initial;

  std::size_t objectives() const { return rewards.size(); }
  double reward(std::size_t j, std::size_t s, std::size_t a) const { return rewards[j][s * actions + a]; }
  double tr(std::size_t s, std::size_t a, std::size_t s2) const { return transition[(s * actions + a) * states + s2]; }

  double alpha(std::size_t s) const {
    return initial.empty() ? 1.0 / static_cast<double>(states) : initial[s];
  }

  bool operator==(const MoMdp&) const = default;
};

inline std::vector<std::string> validate(const MoMdp& mdp) {
  std::vector<std::string> out;
  const std::size_t S = mdp.states, A = mdp.actions;
  if (S == 0 || A == 0) out.push_back("mdp needs at least one state and one action");
  if (mdp.horizon < 1) out.push_back("mdp horizon must be at least 1");
  if (mdp.rewards.empty()) out.push_back("mdp needs at least one reward table");
  if (!mdp.objective_names.empty() && mdp.objective_names.size() != mdp.rewards.size())
    out.push_back("mdp objective names do not match reward tables");
  for (std::size_t j = 0; j < mdp.rewards.size(); ++j) {
    if (mdp.rewards[j].size() != S * A) out.push_back("reward table " + std::to_string(j) + " has wrong size");
    for (double r : mdp.rewards[j])
      if (!std::isfinite(r)) {
        out.push_back("reward table " + std::to_string(j) + " has a non-finite entry");
        break;
      }
  }
  if (mdp.transition.size() != S * A * S) {
    out.push_back("transition table has wrong size");
  } else {
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double total = 0.0;
        bool range_ok = true;
        for (std::size_t s2 = 0; s2 < S; ++s2) {
          const double p = mdp.tr(s, a, s2);
          range_ok = range_ok && p >= 0.0 && p <= 1.0;
          total += p;
        }
        if (!range_ok || std::abs(total - 1.0) > 1e-12)
          out.push_back("transition row (" + std::to_string(s) + "," + std::to_string(a) + ") is not a distribution");
      }
  }
  if (!mdp.initial.empty()) {
    double total = 0.0;
    bool range_ok = mdp.initial.size() == S;
    for (double p : mdp.initial) {
      range_ok = range_ok && p >= 0.0 && p <= 1.0;
      total += p;
    }
    if (!range_ok || std::abs(total - 1.0) > 1e-12) out.push_back("initial distribution is not a distribution");
  }
  return out;
}

/// Expected state-action visitation mass x(t, s, a).
struct OccupancyMeasure {
  std::size_t horizon = 0, states = 0, actions = 0;
  std::vector<double> x;

  double at(std::size_t t, std::size_t s, std::size_t a) const { return x[(t * states + s) * actions + a]; }
};

/// pi(t, s) is a distribution over actions.
struct StochasticPolicy {
  std::size_t horizon = 0, states = 0, actions = 0;
  std::vector<double> pi;

  double at(std::size_t t, std::size_t s, std::size_t a) const { return pi[(t * states + s) * actions + a]; }
};

inline std::string occupancy_name(std::size_t t, std::size_t s, std::size_t a) {
  return "x." + std::to_string(t) + "." + std::to_string(s) + "." + std::to_string(a);
}

inline std::string mdp_objective_name(const MoMdp& mdp, std::size_t j) {
  return mdp.objective_names.empty() ? "C_" + std::to_string(j + 1) : mdp.objective_names[j];
}

/// Occupancy-measure LP of a finite-horizon MDP, one criterion per reward
/// table. Flow rows:
///   sum_a x(0,s,a) = alpha(s)
///   sum_a x(t,s,a) = sum_{s',a'} Tr(s',a',s) x(t-1,s',a')   for t >= 1
/// Variables are ordered by (t, s, a).
inline MoLpModel build_mdp_model(const MoMdp& mdp) {
  if (auto v = validate(mdp); !v.empty()) throw ValidationError(std::move(v));
  const std::size_t S = mdp.states, A = mdp.actions, T = mdp.horizon;
  MoLpModel m;
  m.variables.reserve(T * S * A);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) m.variables.push_back({occupancy_name(t, s, a), 0.0, kInfinity});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      Constraint row;
      row.sense = Sense::Equal;
      for (std::size_t a = 0; a < A; ++a) row.expr.add(occupancy_name(t, s, a), 1.0);
      if (t == 0) {
        row.rhs = mdp.alpha(s);
      } else {
        for (std::size_t s0 = 0; s0 < S; ++s0)
          for (std::size_t a = 0; a < A; ++a) {
            const double p = mdp.tr(s0, a, s);
            if (p != 0.0) row.expr.add(occupancy_name(t - 1, s0, a), -p);
          }
        row.rhs = 0.0;
      }
      m.constraints.push_back(std::move(row));
    }
  for (std::size_t j = 0; j < mdp.objectives(); ++j) {
    LinearExpr f;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
          const double r = mdp.reward(j, s, a);
          if (r != 0.0) f.add(occupancy_name(t, s, a), r);
        }
    m.add_objective(mdp_objective_name(mdp, j), std::move(f));
  }
  m.meta = {{"generator", "mdp"}, {"states", S}, {"actions", A}, {"horizon", T}};
  return m;
}

/// Reads x(t,s,a) back from a decision vector of build_mdp_model.
inline OccupancyMeasure occupancy_from_decision(const MoMdp& mdp, const std::vector<double>& decision) {
  OccupancyMeasure occ{mdp.horizon, mdp.states, mdp.actions, {}};
  const std::size_t n = mdp.horizon * mdp.states * mdp.actions;
  if (decision.size() < n) throw std::invalid_argument("decision vector is too short for this mdp");
  occ.x.assign(decision.begin(), decision.begin() + static_cast<std::ptrdiff_t>(n));
  for (double& v : occ.x) v = std::max(0.0, v);
  return occ;
}

/// pi(t,s)(a) = x(t,s,a) / sum_a x(t,s,a); uniform where the state carries
/// no mass (denominator <= 1e-12).
inline StochasticPolicy extract_policy(const OccupancyMeasure& occ) {
  StochasticPolicy pol{occ.horizon, occ.states, occ.actions, std::vector<double>(occ.x.size())};
  const double uniform = 1.0 / static_cast<double>(occ.actions);
  for (std::size_t t = 0; t < occ.horizon; ++t)
    for (std::size_t s = 0; s < occ.states; ++s) {
      double mass = 0.0;
      for (std::size_t a = 0; a < occ.actions; ++a) mass += occ.at(t, s, a);
      for (std::size_t a = 0; a < occ.actions; ++a)
        pol.pi[(t * occ.states + s) * occ.actions + a] = mass > 1e-12 ? occ.at(t, s, a) / mass : uniform;
    }
  return pol;
}

/// Exact expected cumulative (undiscounted) reward per objective, by forward
/// propagation of the state distribution.
inline CriterionVector evaluate_policy(const MoMdp& mdp, const StochasticPolicy& pol) {
  const std::size_t S = mdp.states, A = mdp.actions;
  if (pol.states != S || pol.actions != A || pol.horizon != mdp.horizon)
    throw std::invalid_argument("policy shape does not match the mdp");
  std::vector<double> mu(S), next(S);
  for (std::size_t s = 0; s < S; ++s) mu[s] = mdp.alpha(s);
  std::vector<double> total(mdp.objectives(), 0.0);
  for (std::size_t t = 0; t < mdp.horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      if (mu[s] == 0.0) continue;
      for (std::size_t a = 0; a < A; ++a) {
        const double w = mu[s] * pol.at(t, s, a);
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += w * mdp.reward(j, s, a);
        for (std::size_t s2 = 0; s2 < S; ++s2) next[s2] += w * mdp.tr(s, a, s2);
      }
    }
    mu.swap(next);
  }
  return CriterionVector(std::move(total));
}

/// Synthetic two-species management MDP. State s encodes the predator
/// share s/(S-1) of a predator-prey system; actions are
///   0 introduce predators, 1 protect prey, 2 control predators,
///   3 half protect / half control.
/// Objective 1 rewards prey density, objective 2 predator abundance; each
/// table is divided by its maximum.
inline MoMdp generate_predator_prey(std::uint64_t seed, std::size_t states = 10, std::size_t actions = 4,
                                    std::size_t horizon = 20) {
  if (states < 2) throw std::invalid_argument("predator-prey mdp needs at least 2 states");
  if (actions != 4) throw std::invalid_argument("predator-prey mdp has exactly 4 actions");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  Rng rng(seed);
  MoMdp mdp;
  mdp.states = states;
  mdp.actions = actions;
  mdp.horizon = horizon;
  mdp.objective_names = {"C_1", "C_2"};
  mdp.rewards.assign(2, std::vector<double>(states * actions));
  mdp.transition.assign(states * actions * states, 0.0);

  // Drift of the predator share and reward multipliers per action.
  const double drift[4] = {1.0, 0.25, -1.0, -0.4};
  const double prey_gain[4] = {0.85, 1.3, 1.05, 1.2};
  const double predator_gain[4] = {1.25, 0.9, 0.7, 0.8};
  for (std::size_t s = 0; s < states; ++s) {
    const double share = static_cast<double>(s) / static_cast<double>(states - 1);
    for (std::size_t a = 0; a < actions; ++a) {
      const double prey = (1.0 - share) * (1.0 - 0.3 * share) * prey_gain[a];
      const double predator = share * (0.7 + 0.3 * share) * predator_gain[a];
      mdp.rewards[0][s * actions + a] = prey * rng.uniform(0.9, 1.1) + 0.02;
      mdp.rewards[1][s * actions + a] = predator * rng.uniform(0.9, 1.1) + 0.02;

      const double mean = static_cast<double>(s) + drift[a] + rng.uniform(-0.3, 0.3);
      const double spread = rng.uniform(0.5, 1.1);
      double total = 0.0;
      for (std::size_t s2 = 0; s2 < states; ++s2) {
        const double z = (static_cast<double>(s2) - mean) / spread;
        const double w = std::exp(-0.5 * z * z) * rng.uniform(0.8, 1.2) + 1e-3;
        mdp.transition[(s * actions + a) * states + s2] = w;
        total += w;
      }
      for (std::size_t s2 = 0; s2 < states; ++s2) mdp.transition[(s * actions + a) * states + s2] /= total;
    }
  }
  for (auto& table : mdp.rewards) {
    double top = 0.0;
    for (double r : table) top = std::max(top, r);
    for (double& r : table) r /= top;
  }
  // Renormalize rows so every row sums to one to the last bit we can get.
  for (std::size_t row = 0; row < states * actions; ++row) {
    double total = 0.0;
    for (std::size_t s2 = 0; s2 < states; ++s2) total += mdp.transition[row * states + s2];
    mdp.transition[row * states + states - 1] += 1.0 - total;
  }
  return mdp;
}

inline json mdp_to_json(const MoMdp& mdp) {
  const std::size_t S = mdp.states, A = mdp.actions;
  json rewards = json::array();
  for (std::size_t j = 0; j < mdp.objectives(); ++j) {
    json table = json::array();
    for (std::size_t s = 0; s < S; ++s) {
      json row = json::array();
      for (std::size_t a = 0; a < A; ++a) row.push_back(mdp.reward(j, s, a));
      table.push_back(std::move(row));
    }
    rewards.push_back(std::move(table));
  }
  json tr = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < A; ++a) {
      json row = json::array();
      for (std::size_t s2 = 0; s2 < S; ++s2) row.push_back(mdp.tr(s, a, s2));
      per_action.push_back(std::move(row));
    }
    tr.push_back(std::move(per_action));
  }
  json j = {{"states", S},    {"actions", A},     {"horizon", mdp.horizon}, {"objectives", mdp.objective_names},
            {"rewards", rewards}, {"transition", tr}};
  if (!mdp.initial.empty()) j["initial"] = mdp.initial;
  return j;
}

inline MoMdp mdp_from_json(const json& j) {
  try {
    MoMdp mdp;
    mdp.states = j.at("states").get<std::size_t>();
    mdp.actions = j.at("actions").get<std::size_t>();
    mdp.horizon = j.at("horizon").get<std::size_t>();
    if (j.contains("objectives")) mdp.objective_names = j.at("objectives").get<std::vector<std::string>>();
    for (const auto& table : j.at("rewards")) {
      std::vector<double> flat;
      for (const auto& row : table)
        for (const auto& v : row) flat.push_back(v.get<double>());
      mdp.rewards.push_back(std::move(flat));
    }
    for (const auto& per_action : j.at("transition"))
      for (const auto& row : per_action)
        for (const auto& v : row) mdp.transition.push_back(v.get<double>());
    if (j.contains("initial")) mdp.initial = j.at("initial").get<std::vector<double>>();
    if (auto v = validate(mdp); !v.empty()) throw ValidationError(std::move(v));
    return mdp;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed mdp section: ") + e.what()});
  }
}

}  // namespace refpoint
