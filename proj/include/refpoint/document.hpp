#pragma once

// The JSON container: a model plus the optional generator section it came
// from (`mdp` or `grid`), and the per-problem decision payloads.

#include <optional>
#include <string>
#include <string_view>

#include "refpoint/grid.hpp"
#include "refpoint/lp_model.hpp"
#include "refpoint/mdp.hpp"

namespace refpoint {

struct ModelDocument {
  MoLpModel model;
  std::optional<MoMdp> mdp;
  std::optional<GridInstance> grid;

  /// Model the solvers work on. Grid documents use the condensed form,
  /// which has the same decisions and criterion values.
  MoLpModel working_model() const { return grid ? build_condensed_grid_model(*grid) : model; }
};

inline ModelDocument make_document(MoMdp mdp) {
  ModelDocument doc;
  doc.model = build_mdp_model(mdp);
  doc.mdp = std::move(mdp);
  return doc;
}

inline ModelDocument make_document(GridInstance grid) {
  ModelDocument doc;
  doc.model = build_grid_model(grid);
  doc.grid = std::move(grid);
  return doc;
}

inline json document_to_tree(const ModelDocument& doc) {
  if (auto v = validate(doc.model); !v.empty()) throw ValidationError(std::move(v));
  json j = detail::model_to_tree(doc.model);
  if (doc.mdp) j["mdp"] = mdp_to_json(*doc.mdp);
  if (doc.grid) j["grid"] = grid_to_json(*doc.grid);
  return j;
}

inline std::string document_to_json(const ModelDocument& doc, int indent = -1) {
  return document_to_tree(doc).dump(indent);
}

inline ModelDocument document_from_tree(const json& j) {
  ModelDocument doc;
  doc.model = detail::model_from_tree(j);
  if (j.contains("mdp")) doc.mdp = mdp_from_json(j.at("mdp"));
  if (j.contains("grid")) doc.grid = grid_from_json(j.at("grid"));
  if (doc.mdp && doc.grid) throw ValidationError({"document has both an mdp and a grid section"});
  return doc;
}

inline ModelDocument document_from_json(std::string_view bytes) {
  return document_from_tree(detail::parse_document(bytes));
}

/// Problem-specific view of a decision: the stochastic policy for MDP
/// documents, the managed-cell mask for grid documents, named variable
/// values otherwise.
inline json decision_payload(const ModelDocument& doc, const MoLpModel& solved, const std::vector<double>& values) {
  if (doc.mdp) {
    const auto pol = extract_policy(occupancy_from_decision(*doc.mdp, values));
    json pi = json::array();
    for (std::size_t t = 0; t < pol.horizon; ++t) {
      json per_state = json::array();
      for (std::size_t s = 0; s < pol.states; ++s) {
        json dist = json::array();
        for (std::size_t a = 0; a < pol.actions; ++a) dist.push_back(pol.at(t, s, a));
        per_state.push_back(std::move(dist));
      }
      pi.push_back(std::move(per_state));
    }
    return {{"kind", "policy"}, {"policy", std::move(pi)}};
  }
  if (doc.grid) {
    const auto x = decision_from_values(*doc.grid, values);
    json rows = json::array();
    const std::string text = mask_text(*doc.grid, x);
    std::size_t start = 0;
    for (std::size_t i = 0; i < doc.grid->rows; ++i) {
      rows.push_back(text.substr(start, doc.grid->cols));
      start += doc.grid->cols + 1;
    }
    return {{"kind", "mask"}, {"rows", doc.grid->rows}, {"cols", doc.grid->cols}, {"managed", x.count()}, {"mask", rows}};
  }
  json named = json::object();
  for (std::size_t j = 0; j < solved.variables.size() && j < values.size(); ++j) named[solved.variables[j].name] = values[j];
  return {{"kind", "values"}, {"values", std::move(named)}};
}

}  // namespace refpoint
