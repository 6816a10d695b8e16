#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "refpoint/scalarize.hpp"

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("refpoint_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const auto out = scratch() / "stdout", err = scratch() / "stderr";
  const std::string cmd = std::string(REFPOINT_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string model(const std::string& name) { return std::string(REFPOINT_MODELS) + "/" + name; }

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t distinct(const std::vector<std::vector<std::string>>& rows) {
  std::vector<refpoint::CriterionVector> pts;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::vector<double> v;
    for (std::size_t c = 2; c < rows[r].size(); ++c) v.push_back(std::stod(rows[r][c]));
    pts.emplace_back(v);
  }
  return refpoint::count_distinct(pts);
}

TEST(Cli, SolveWrongArityExitsWithUsageCode) {
  EXPECT_EQ(cli("solve --model " + model("toy_biobjective.json") + " --ref 1,2,3").code, 2);
  EXPECT_EQ(cli("solve --model " + model("toy_biobjective.json") + " --ref 1,abc").code, 2);
  EXPECT_EQ(cli("solve --model " + model("toy_biobjective.json")).code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, SolvePrintsTheResultEntry) {
  const auto r = cli("solve --model " + model("toy_biobjective.json") + " --ref 15,5");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = refpoint::json::parse(r.out);
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_EQ(j["criteria"].size(), 2u);
  EXPECT_EQ(j["bounds"][1]["sense"], "min");
}

TEST(Cli, ModelErrorsExitNonZero) {
  EXPECT_EQ(cli("solve --model /nonexistent.json --ref 1,2").code, 1);
  std::ofstream(scratch() / "bad.json") << "{\"variables\": [}";
  const auto r = cli("solve --model " + (scratch() / "bad.json").string() + " --ref 1,2");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("byte"), std::string::npos);
}

TEST(Cli, MdpSweepsFavourReferencePoints) {
  const auto doc = (scratch() / "mdp.json").string();
  const auto demo = cli("demo mdp --seed 1 --states 6 --horizon 8 --n 5 --model-out " + doc);
  ASSERT_EQ(demo.code, 0) << demo.err;
  EXPECT_EQ(csv(demo.out).size(), 11u);

  const auto w = cli("sweep --model " + doc + " --n 20 --method weights");
  const auto r = cli("sweep --model " + doc + " --n 20 --method refpoint");
  ASSERT_EQ(w.code, 0) << w.err;
  ASSERT_EQ(r.code, 0) << r.err;
  const auto wr = csv(w.out), rr = csv(r.out);
  EXPECT_EQ(wr[0], (std::vector<std::string>{"method", "index", "C_1", "C_2"}));
  ASSERT_EQ(wr.size(), 21u);
  ASSERT_EQ(rr.size(), 21u);
  EXPECT_EQ(rr[1][0], "refpoint");
  EXPECT_GE(distinct(rr), distinct(wr));
  EXPECT_EQ(r.out, cli("sweep --model " + doc + " --n 20 --method refpoint").out);
}

TEST(Cli, CompareExplicitGapsAreNonNegative) {
  const auto r = cli("compare-explicit --seed 1 --rows 20 --cols 20 --k 12 --samples 1000 --keep 8");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].front(), "pair");
  EXPECT_EQ(rows[0][1], "explicit_WTT");
  EXPECT_EQ(rows[0][6], "projected_WTT");
  EXPECT_EQ(rows[0][11], "gap");
  double total = 0.0;
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    ASSERT_EQ(rows[k].size(), 13u);
    const double gap = std::stod(rows[k][11]);
    EXPECT_GE(gap, -1e-9);
    total += gap;
  }
  EXPECT_EQ(rows.back().front(), "mean");
  EXPECT_NEAR(std::stod(rows.back()[11]), total / 8.0, 1e-9);
}

TEST(Cli, GridDemoUsesCommittedModel) {
  const auto r = cli("compare-explicit --model " + model("grid_8x8.json") + " --samples 100 --keep 3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv(r.out).size(), 5u);
  EXPECT_EQ(cli("compare-explicit --model " + model("toy_biobjective.json")).code, 1);
}

}  // namespace
