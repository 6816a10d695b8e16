// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "refpoint/document.hpp"

using namespace refpoint;

namespace {

constexpr double kLpTol = 1e-6;
constexpr double kParetoTol = 1e-7;
constexpr double kAchieveTol = 1e-9;
constexpr double kMassTol = 1e-8;
constexpr double kDpTol = 1e-6;
constexpr double kConsistencyTol = 1e-6;
constexpr double kGapTol = 1e-9;
constexpr double kDeltaRelTol = 1e-12;
constexpr double kTablePairGap = 0.574;
constexpr double kTablePairGapTol = 5e-4;
constexpr double kProjectionSeconds = 10.0;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail << "first failure: " << why << "; ";
    pass = pass && ok;
  }
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void solver_equivalence(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::size_t lp_ok = 0, bp_ok = 0;
  for (int k = 0; k < 50; ++k) {
    const auto lp = oracle::random_lp(rng);
    const auto expected = oracle::vertex_enumeration(lp);
    const auto m = lp.to_model();
    const auto sol = solve_lp(m, m.objectives[0].expr);
    const bool ok = expected ? sol.status == SolveStatus::Optimal && std::abs(sol.objective_value - *expected) <= kLpTol
                             : sol.status == SolveStatus::Infeasible;
    lp_ok += ok;
    v.require(ok, "lp " + std::to_string(k));
  }
  for (int k = 0; k < 50; ++k) {
    const auto bp = oracle::random_binary(rng);
    const auto expected = bp.enumerate();
    const auto m = bp.to_model();
    const auto sol = solve_milp(m, m.objectives[0].expr);
    const bool ok = expected ? sol.status == SolveStatus::Optimal && sol.objective_value == *expected
                             : sol.status == SolveStatus::Infeasible;
    bp_ok += ok;
    v.require(ok, "binary program " + std::to_string(k));
  }
  const double secs = since(t0);
  v.require(secs < 5.0, "runtime");
  v.detail << "lp " << lp_ok << "/50, binary " << bp_ok << "/50, " << secs << " s";
}

void non_domination(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t hits = 0;
  {
    const auto g = generate_instance(1, 4, 4, {}, 2, 1e9);
    const auto all = oracle::enumerate_grid(g, 2);
    std::vector<std::vector<double>> front;
    for (std::size_t i : oracle::pareto_indices(all.criteria)) front.push_back(all.criteria[i]);
    const auto model = build_condensed_grid_model(g);
    const auto b = criterion_bounds(model);
    Rng rng(2);
    for (int k = 0; k < 25; ++k) {
      ReferencePoint ref;
      for (std::size_t j = 0; j < b.size(); ++j) ref.values.push_back(b.z_min[j] + rng.uniform(-0.2, 1.2) * b.range(j));
      const auto r = solve_reference_point(model, ref, b);
      const bool ok = r.outcome.optimal() && oracle::in_pareto_set(r.outcome.criteria.values, front, kParetoTol);
      hits += ok;
      v.require(ok, "grid reference " + std::to_string(k));
    }
    v.detail << "grid " << all.masks.size() << " feasible decisions, ";
  }
  {
    const auto mdp = oracle::random_mdp(3, 3, 2, 3, 2);
    const auto values = oracle::deterministic_policy_values(mdp);
    const auto chain = oracle::convex_pareto_chain(values);
    const auto model = build_mdp_model(mdp);
    const auto b = criterion_bounds(model);
    Rng rng(4);
    for (int k = 0; k < 25; ++k) {
      ReferencePoint ref;
      for (std::size_t j = 0; j < 2; ++j) ref.values.push_back(b.z_min[j] + rng.uniform(-0.2, 1.2) * b.range(j));
      const auto r = solve_reference_point(model, ref, b);
      bool ok = r.outcome.optimal() && oracle::on_chain(chain, r.outcome.criteria.values, kParetoTol);
      for (const auto& p : values) ok = ok && !oracle::dominates(p, r.outcome.criteria.values, kParetoTol);
      hits += ok;
      v.require(ok, "mdp reference " + std::to_string(k));
    }
    v.detail << "mdp " << values.size() << " deterministic policies, ";
  }
  const double secs = since(t0);
  v.require(secs < 30.0, "runtime");
  v.detail << hits << "/50 in the Pareto set, " << secs << " s";
}

std::vector<AllocationDecision> sample_grid_decisions(const GridInstance& g, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AllocationDecision> out;
  std::vector<std::size_t> perm(g.cells());
  while (out.size() < n) {
    std::iota(perm.begin(), perm.end(), 0);
    AllocationDecision x{std::vector<std::uint8_t>(g.cells(), 0)};
    for (std::size_t i = 0; i < *g.k; ++i) {
      std::swap(perm[i], perm[i + rng.below(g.cells() - i)]);
      x.managed[perm[i]] = 1;
    }
    if (feasible(g, x)) out.push_back(std::move(x));
  }
  return out;
}

void achievability(Verdict& v) {
  double worst = kInfinity;
  std::size_t cases = 0;
  {
    const auto mdp = generate_predator_prey(1);
    const auto model = build_mdp_model(mdp);
    const auto b = criterion_bounds(model);
    for (std::uint64_t k = 0; k < 50; ++k, ++cases) {
      const auto z = evaluate_policy(mdp, oracle::random_policy(100 + k, mdp));
      const auto r = solve_reference_point(model, as_reference(z), b);
      double m = kInfinity;
      for (std::size_t j = 0; j < 2; ++j) m = std::min(m, r.outcome.criteria[j] - z[j]);
      worst = std::min(worst, m);
      v.require(r.outcome.optimal() && m >= -kAchieveTol, "mdp case " + std::to_string(k));
    }
  }
  {
    const auto g = generate_instance(1, 20, 20, {}, 12);
    const auto model = build_condensed_grid_model(g);
    const auto b = criterion_bounds(model);
    const auto xs = sample_grid_decisions(g, 50, 5);
    for (std::size_t k = 0; k < xs.size(); ++k, ++cases) {
      const auto z = evaluate_decision(g, xs[k]);
      const auto r = solve_reference_point(model, as_reference(z), b);
      v.require(r.outcome.optimal(), "grid case status " + std::to_string(k));
      if (!r.outcome.optimal()) continue;
      const auto p = evaluate_decision(g, decision_from_values(g, r.outcome.decision));
      double m = kInfinity;
      for (std::size_t j = 0; j < kGridCriteria; ++j) m = std::min(m, p[j] - z[j]);
      worst = std::min(worst, m);
      v.require(m >= -kAchieveTol, "grid case " + std::to_string(k));
    }
  }
  v.detail << cases << " cases, worst min_j(f_j - ref_j) = " << worst;
}

void sweep_property(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t weights_total = 0, ref_total = 0, seeds = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = build_mdp_model(generate_predator_prey(seed, 10, 4, 20));
    const auto b = criterion_bounds(model);
    std::vector<CriterionVector> w, r;
    for (const auto& o : sweep_weights(model, 20, b)) w.push_back(o.criteria);
    for (const auto& o : sweep_reference_points(model, 20, b)) r.push_back(o.outcome.criteria);
    const auto dw = count_distinct(w, kParetoTol), dr = count_distinct(r, kParetoTol);
    v.require(dr >= dw, "seed " + std::to_string(seed) + " count");
    if (seed == 1) {
      v.require(dr > dw, "default seed strictly more");
      v.detail << "default seed: refpoint " << dr << " vs weights " << dw << "; ";
    }
    v.require(nondominated_filter(w, kParetoTol).size() == w.size(), "weights mutually non-dominated");
    v.require(nondominated_filter(r, kParetoTol).size() == r.size(), "refpoints mutually non-dominated");
    weights_total += dw;
    ref_total += dr;
    ++seeds;
  }
  const double secs = since(t0);
  v.require(secs < 60.0, "runtime");
  v.detail << seeds << " seeds total " << ref_total << " vs " << weights_total << ", " << secs << " s";
}

void mdp_correctness(Verdict& v) {
  double worst_mass = 0.0, worst_dp = 0.0, worst_eval = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto mdp = oracle::random_mdp(200 + k, 2 + k % 9, 1 + k % 4, 1 + (3 * k) % 20);
    const auto model = build_mdp_model(mdp);
    const auto sol = solve(model, model.objectives[0].expr);
    v.require(sol.status == SolveStatus::Optimal, "instance " + std::to_string(k));
    worst_dp = std::max(worst_dp, std::abs(sol.objective_value - oracle::backward_induction(mdp)));
  }
  const auto mdp = generate_predator_prey(1);
  const auto model = build_mdp_model(mdp);
  const auto b = criterion_bounds(model);
  for (const auto& r : sweep_reference_points(model, 20, b)) {
    const auto occ = occupancy_from_decision(mdp, r.outcome.decision);
    for (std::size_t t = 0; t < mdp.horizon; ++t) {
      double mass = 0.0;
      for (std::size_t s = 0; s < mdp.states; ++s)
        for (std::size_t a = 0; a < mdp.actions; ++a) mass += occ.at(t, s, a);
      worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    }
    const auto c = evaluate_policy(mdp, extract_policy(occ));
    for (std::size_t j = 0; j < 2; ++j) worst_eval = std::max(worst_eval, std::abs(c[j] - r.outcome.criteria[j]));
  }
  v.require(worst_mass <= kMassTol, "per-epoch mass");
  v.require(worst_dp <= kDpTol, "backward induction");
  v.require(worst_eval <= kConsistencyTol, "extract/evaluate consistency");
  v.detail << "mass err " << worst_mass << ", dp err " << worst_dp << ", eval err " << worst_eval;
}

ProjectionReport table_run;

void table_property(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = generate_instance(1, 20, 20, {}, 12);
  const auto pts = explicit_baseline(g, 2000, 100, 1);
  table_run = project_and_gap(g, pts);
  double worst = kInfinity;
  for (const auto& p : table_run.pairs) {
    worst = std::min(worst, p.gap);
    v.require(p.status == SolveStatus::Optimal, "projection status");
    for (std::size_t j = 0; j < kGridCriteria; ++j)
      v.require(p.projected[j] >= p.explicit_point[j] - kGapTol * std::max(1.0, p.explicit_point[j]), "dominance");
  }
  v.require(worst >= -kGapTol, "gap sign");
  v.require(table_run.mean_gap > 0.0, "mean gap positive");
  const double pair = relative_gap(CriterionVector{1637, 512, 564, 551, 580}, CriterionVector{2719, 847, 897, 884, 913});
  v.require(std::abs(pair - kTablePairGap) <= kTablePairGapTol, "pair-1 arithmetic");
  const double secs = since(t0);
  v.require(secs < 600.0, "runtime");
  v.detail << table_run.pairs.size() << " pairs (" << pts.size() << " kept), mean gap " << table_run.mean_gap
           << ", min gap " << worst << ", pair-1 gap " << pair << ", " << secs << " s";
}

void delta_law(Verdict& v) {
  std::size_t checks = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto g = generate_instance(500 + s, 6, 6);
    const auto desc = descendants(g);
    AllocationDecision x{std::vector<std::uint8_t>(g.cells(), 0)};
    Rng rng(s);
    for (int i = 0; i < 4; ++i) x.managed[rng.below(g.cells())] = 1;
    auto integral = g;
    for (std::size_t c = 0; c < g.cells(); ++c) {
      integral.t[c] = std::round(g.t[c]);
      integral.d[c] = std::round(g.d[c]);
    }
    const double base = water_travel_time(g, x), ibase = water_travel_time(integral, x);
    for (std::size_t q = 0; q < g.cells(); ++q) {
      if (x.managed[q]) continue;
      auto y = x;
      y.managed[q] = 1;
      const double law = g.d[q] * (1.0 + static_cast<double>(desc[q]));
      const double err = std::abs(water_travel_time(g, y) - base - law) / base;
      worst = std::max(worst, err);
      v.require(err <= kDeltaRelTol, "real-valued instance " + std::to_string(s));
      const double ilaw = integral.d[q] * (1.0 + static_cast<double>(desc[q]));
      v.require(water_travel_time(integral, y) - ibase == ilaw, "integer instance " + std::to_string(s));
      ++checks;
    }
  }
  v.detail << checks << " cell additions, worst relative error " << worst << ", integer tables exact";
}

void throughput(Verdict& v) {
  double worst = 0.0, total = 0.0;
  for (const auto& p : table_run.pairs) {
    worst = std::max(worst, p.seconds);
    total += p.seconds;
  }
  v.require(!table_run.pairs.empty(), "projections available");
  v.require(worst <= kProjectionSeconds, "slowest projection");
  v.detail << "20x20 K=12: mean " << (table_run.pairs.empty() ? 0.0 : total / static_cast<double>(table_run.pairs.size()))
           << " s, max " << worst << " s per projection";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria = {
      {"solver oracle equivalence", solver_equivalence},
      {"non-domination", non_domination},
      {"achievability", achievability},
      {"sweep distinct points", sweep_property},
      {"mdp correctness", mdp_correctness},
      {"explicit vs projected gaps", table_property},
      {"wtt delta law", delta_law},
      {"projection throughput", throughput},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    all = all && v.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.str().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
