#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "refpoint/document.hpp"
#include "refpoint/service.hpp"

using namespace refpoint;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
    if (used != item.size() || !std::isfinite(v)) throw UsageError("not a finite number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(12);
  os << (v == 0.0 ? 0.0 : v);
  return os.str();
}

void csv_header(std::ostream& out, std::initializer_list<std::string> lead, const MoLpModel& model) {
  bool first = true;
  for (const auto& h : lead) {
    out << (first ? "" : ",") << h;
    first = false;
  }
  for (const auto& o : model.objectives) out << ',' << o.name;
  out << '\n';
}

void csv_row(std::ostream& out, const std::string& method, std::size_t index, const MoLpModel& model,
             const CriterionVector& canonical) {
  out << method << ',' << index;
  const auto rep = reported_criteria(model, canonical.values);
  for (double v : rep) out << ',' << num(v);
  out << '\n';
}

/// Runs one sweep; returns the criterion vectors of the optimal solves.
std::vector<CriterionVector> run_sweep(const MoLpModel& model, const CriterionBounds& bounds, std::size_t n,
                                       const std::string& method, std::ostream& out, const SolverOptions& opts,
                                       std::uint64_t seed) {
  std::vector<CriterionVector> pts;
  if (method == "refpoint") {
    const auto res = sweep_reference_points(model, n, bounds, opts, seed);
    for (std::size_t k = 0; k < res.size(); ++k) {
      if (res[k].outcome.criteria.values.empty()) throw std::runtime_error("sweep solve failed");
      csv_row(out, method, k, model, res[k].outcome.criteria);
      pts.push_back(res[k].outcome.criteria);
    }
  } else {
    const auto res = sweep_weights(model, n, bounds, opts);
    for (std::size_t k = 0; k < res.size(); ++k) {
      if (res[k].criteria.values.empty()) throw std::runtime_error("sweep solve failed");
      csv_row(out, method, k, model, res[k].criteria);
      pts.push_back(res[k].criteria);
    }
  }
  return pts;
}

void report_projection(std::ostream& out, const ProjectionReport& rep) {
  out << "pair";
  for (const auto& n : grid_criterion_names()) out << ",explicit_" << n;
  for (const auto& n : grid_criterion_names()) out << ",projected_" << n;
  out << ",gap,seconds\n";
  for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
    const auto& p = rep.pairs[k];
    out << k;
    for (double v : p.explicit_point.values) out << ',' << num(v);
    for (double v : p.projected.values) out << ',' << num(v);
    out << ',' << num(p.gap) << ',' << num(p.seconds) << '\n';
  }
  out << "mean";
  for (std::size_t j = 0; j < 2 * kGridCriteria; ++j) out << ',';
  out << ',' << num(rep.mean_gap) << ",\n";
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive reference-point optimization over multi-objective linear programs"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Write the solver trace to stderr");

  auto* solve_cmd = app.add_subcommand("solve", "Project one reference point");
  std::string model_path, ref_text;
  solve_cmd->add_option("--model", model_path, "Model document (JSON)")->required();
  solve_cmd->add_option("--ref", ref_text, "Reference point v1,...,vp")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Reference-point or weighted-sum sweep, CSV on stdout");
  std::size_t n = 20;
  std::string method = "refpoint";
  std::uint64_t seed = 1;
  sweep_cmd->add_option("--model", model_path, "Model document (JSON)")->required();
  sweep_cmd->add_option("--n", n, "Number of points")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--method", method, "refpoint or weights")->check(CLI::IsMember({"refpoint", "weights"}));
  sweep_cmd->add_option("--seed", seed, "Halton offset for more than two criteria");

  auto* demo_cmd = app.add_subcommand("demo", "Generate a demo problem");
  demo_cmd->require_subcommand(1);
  std::string model_out;
  auto* demo_mdp = demo_cmd->add_subcommand("mdp", "Predator-prey MDP: model plus both sweeps as CSV");
  std::size_t states = 10, horizon = 20;
  demo_mdp->add_option("--seed", seed, "Generator seed");
  demo_mdp->add_option("--states", states, "State count")->check(CLI::Range(2, 1000));
  demo_mdp->add_option("--horizon", horizon, "Horizon length")->check(CLI::PositiveNumber);
  demo_mdp->add_option("--n", n, "Sweep size")->check(CLI::PositiveNumber);
  demo_mdp->add_option("--model-out", model_out, "Write the generated model document here");

  auto* demo_grid = demo_cmd->add_subcommand("grid", "Grid allocation: explicit points, projections and gaps as CSV");
  std::size_t rows = 20, cols = 20, demo_samples = 2000, demo_keep = 20, samples = 10000, keep = 300;
  std::optional<std::size_t> k = 12;
  std::optional<double> budget;
  demo_grid->add_option("--seed", seed, "Generator seed");
  demo_grid->add_option("--rows", rows, "Grid rows")->check(CLI::Range(2, 1000));
  demo_grid->add_option("--cols", cols, "Grid columns")->check(CLI::Range(2, 1000));
  demo_grid->add_option("--k", k, "Managed cell count (cardinality constraint)");
  demo_grid->add_option("--budget", budget, "Budget; default calibrated to bind");
  demo_grid->add_option("--samples", demo_samples, "Explicit samples")->check(CLI::PositiveNumber);
  demo_grid->add_option("--keep", demo_keep, "Explicit points kept")->check(CLI::PositiveNumber);
  demo_grid->add_option("--model-out", model_out, "Write the generated model document here");

  auto* cmp_cmd = app.add_subcommand("compare-explicit", "Explicit sampling vs projection, CSV of pairs and mean gap");
  cmp_cmd->add_option("--samples", samples, "Explicit samples")->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--keep", keep, "Explicit points kept")->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--model", model_path, "Grid model document; generated when absent");
  cmp_cmd->add_option("--seed", seed, "Generator and sampler seed");
  cmp_cmd->add_option("--rows", rows, "Grid rows")->check(CLI::Range(2, 1000));
  cmp_cmd->add_option("--cols", cols, "Grid columns")->check(CLI::Range(2, 1000));
  cmp_cmd->add_option("--k", k, "Managed cell count");
  cmp_cmd->add_option("--budget", budget, "Budget");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  int port = 8080;
  std::string host = "127.0.0.1", state_dir;
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--state", state_dir, "Session persistence directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  SolverOptions opts;
  if (verbose) opts.trace = &std::cerr;

  try {
    if (*solve_cmd) {
      const auto doc = document_from_json(read_file(model_path));
      const auto model = doc.working_model();
      const auto ref = parse_list(ref_text);
      if (ref.size() != model.criteria())
        throw UsageError("reference has " + std::to_string(ref.size()) + " values, model has " +
                         std::to_string(model.criteria()) + " criteria");
      const auto bounds = criterion_bounds(model, opts);
      auto entry = solve_entry(doc, model, bounds, ref, opts);
      entry["bounds"] = bounds_to_json(model, bounds);
      std::cout << entry.dump(2) << '\n';
      return entry.contains("criteria") ? 0 : 1;
    }
    if (*sweep_cmd) {
      const auto doc = document_from_json(read_file(model_path));
      const auto model = doc.working_model();
      const auto bounds = criterion_bounds(model, opts);
      csv_header(std::cout, {"method", "index"}, model);
      const auto pts = run_sweep(model, bounds, n, method, std::cout, opts, seed);
      std::cerr << "distinct " << count_distinct(pts) << " of " << pts.size() << '\n';
      return 0;
    }
    if (*demo_mdp) {
      const auto doc = make_document(generate_predator_prey(seed, states, 4, horizon));
      if (!model_out.empty()) write_file(model_out, document_to_json(doc, 2) + "\n");
      const auto bounds = criterion_bounds(doc.model, opts);
      csv_header(std::cout, {"method", "index"}, doc.model);
      const auto w = run_sweep(doc.model, bounds, n, "weights", std::cout, opts, 0);
      const auto r = run_sweep(doc.model, bounds, n, "refpoint", std::cout, opts, 0);
      std::cerr << "distinct weights=" << count_distinct(w) << " refpoint=" << count_distinct(r) << '\n';
      return 0;
    }
    if (*demo_grid || *cmp_cmd) {
      GridInstance g;
      if (!model_path.empty()) {
        auto doc = document_from_json(read_file(model_path));
        if (!doc.grid) throw std::runtime_error(model_path + " has no grid section");
        g = *doc.grid;
      } else {
        g = generate_instance(seed, rows, cols, {}, k, budget);
      }
      const auto doc = make_document(g);
      if (!model_out.empty()) write_file(model_out, document_to_json(doc, 2) + "\n");
      const auto points = *cmp_cmd ? explicit_baseline(g, samples, keep, seed)
                                   : explicit_baseline(g, demo_samples, demo_keep, seed);
      const auto rep = project_and_gap(g, points, opts);
      report_projection(std::cout, rep);
      double worst = 0.0;
      for (const auto& p : rep.pairs) worst = std::max(worst, p.seconds);
      std::cerr << "pairs " << rep.pairs.size() << " mean gap " << rep.mean_gap << " slowest projection " << worst
                << " s\n";
      return 0;
    }
    if (*serve_cmd) {
      ServiceOptions so;
      so.state_dir = state_dir;
      Service service(so);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      if (!server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
      std::cerr << "listening on " << host << ":" << port << '\n';
      server.listen_after_bind();
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << " (byte " << e.position() << ")\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid model\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
