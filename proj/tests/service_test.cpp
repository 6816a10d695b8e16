#include <gtest/gtest.h>

#include <filesystem>

#include "refpoint/service.hpp"

namespace refpoint {
namespace {

const char* kToy = R"({"variables":[{"name":"a","lower":0,"upper":10},{"name":"b","lower":0,"upper":5}],
  "constraints":[{"terms":{"a":0.5,"b":1},"sense":"<=","rhs":5}],
  "objectives":[{"name":"f1","sense":"max","terms":{"a":1}},{"name":"cost","sense":"min","terms":{"b":-1},"constant":5}]})";

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("refpoint_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

json solved(Service& svc, const std::string& id, const json& ref) {
  const auto sub = svc.submit_reference(id, ref.dump());
  EXPECT_EQ(sub.status, 202);
  svc.wait_idle(id);
  const auto r = svc.result(id, sub.body.at("token"));
  EXPECT_EQ(r.status, 200);
  return r.body;
}

TEST(Service, CreateSessionReportsBounds) {
  Service svc;
  const auto r = svc.create_session(kToy);
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["kind"], "model");
  const auto& b = r.body["bounds"];
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0]["name"], "f1");
  EXPECT_NEAR(b[0]["min"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(b[0]["max"].get<double>(), 10.0, 1e-12);
  EXPECT_EQ(b[1]["sense"], "min");
  EXPECT_NEAR(b[1]["min"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(b[1]["max"].get<double>(), 5.0, 1e-12);
  EXPECT_EQ(svc.session_info(r.body["id"]).status, 200);
}

TEST(Service, CreateSessionErrors) {
  Service svc;
  const auto bad = svc.create_session("{\"variables\": [");
  EXPECT_EQ(bad.status, 400);
  EXPECT_TRUE(bad.body.contains("position"));
  const auto invalid = svc.create_session(R"({"variables":[],"constraints":[],"objectives":[]})");
  EXPECT_EQ(invalid.status, 400);
  EXPECT_TRUE(invalid.body["violations"].is_array());

  auto infeasible = json::parse(kToy);
  infeasible["constraints"].push_back({{"terms", {{"a", 1}}}, {"sense", ">="}, {"rhs", 20}});
  const auto r = svc.create_session(infeasible.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"], "empty feasible set");

  auto unbounded = json::parse(kToy);
  unbounded["variables"].push_back({{"name", "free"}, {"lower", 0}, {"upper", nullptr}});
  unbounded["objectives"].push_back({{"name", "g"}, {"sense", "max"}, {"terms", {{"free", 1}}}});
  const auto u = svc.create_session(unbounded.dump());
  EXPECT_EQ(u.status, 422);
  EXPECT_EQ(u.body["criterion"], "g");
  EXPECT_TRUE(svc.session_ids().empty());
}

TEST(Service, SubmitAndPoll) {
  Service svc;
  const std::string id = svc.create_session(kToy).body["id"];
  EXPECT_EQ(svc.submit_reference("nope", "[1,2]").status, 404);
  EXPECT_EQ(svc.submit_reference(id, "[1]").status, 400);
  EXPECT_EQ(svc.submit_reference(id, "[1, \"x\"]").status, 400);
  const auto huge = svc.submit_reference(id, "{\"reference\": [1, 1e999]}");
  EXPECT_EQ(huge.status, 400);
  EXPECT_EQ(huge.body["position"], 18);
  EXPECT_EQ(svc.submit_reference(id, "[1,").status, 400);
  EXPECT_EQ(svc.result(id, "r99").status, 404);

  const auto e = solved(svc, id, {{"reference", {10, 0}}});
  EXPECT_EQ(e["status"], "optimal");
  EXPECT_EQ(e["token"], "r1");
  EXPECT_LE(e["achievement"].get<double>(), 1e-12);
  EXPECT_EQ(e["decision"]["kind"], "values");
  EXPECT_EQ(e["criteria"].size(), 2u);
  // The projection of the ideal point is non-dominated: it lies on 0.5 a + b = 5.
  const double f1 = e["criteria"][0], cost = e["criteria"][1];
  EXPECT_NEAR(0.5 * f1 + (5.0 - cost), 5.0, 1e-9);
}

TEST(Service, HistoryIsOrderedAndDeterministic) {
  Service svc;
  const std::string id = svc.create_session(kToy).body["id"];
  EXPECT_EQ(svc.history(id).body, json::array());
  EXPECT_EQ(svc.history("nope").status, 404);
  std::vector<std::string> tokens;
  for (const auto& ref : {json{2, 4}, json{9, 4}, json{2, 4}})
    tokens.push_back(svc.submit_reference(id, ref.dump()).body["token"]);
  svc.wait_idle(id);
  const auto h = svc.history(id).body;
  ASSERT_EQ(h.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(h[k]["token"], tokens[k]);
    EXPECT_EQ(h[k]["index"], k);
  }
  EXPECT_EQ(h[0]["criteria"], h[2]["criteria"]);
  EXPECT_EQ(h[0]["decision"], h[2]["decision"]);
  EXPECT_NE(h[0]["criteria"], h[1]["criteria"]);
}

TEST(Service, ResubmittedResultIsWeaklyDominated) {
  Service svc;
  const std::string id = svc.create_demo("mdp", R"({"seed": 3, "states": 5, "horizon": 6})").body["id"];
  const auto first = solved(svc, id, json{0.1, 0.1});
  ASSERT_EQ(first["status"], "optimal");
  EXPECT_EQ(first["decision"]["kind"], "policy");
  EXPECT_EQ(first["decision"]["policy"].size(), 6u);
  const auto again = solved(svc, id, first["criteria"]);
  for (std::size_t j = 0; j < 2; ++j)
    EXPECT_GE(again["criteria"][j].get<double>(), first["criteria"][j].get<double>() - 1e-9);
}

TEST(Service, DemoKinds) {
  Service svc;
  EXPECT_EQ(svc.create_demo("forest", "").status, 404);
  EXPECT_EQ(svc.create_demo("grid", "[1]").status, 400);
  EXPECT_EQ(svc.create_demo("grid", R"({"rows": 1})").status, 400);
  EXPECT_EQ(svc.create_demo("grid", R"({"rows": "x"})").status, 400);

  const auto mdp = svc.create_demo("mdp", "");
  ASSERT_EQ(mdp.status, 201);
  EXPECT_EQ(mdp.body["kind"], "mdp");
  EXPECT_EQ(mdp.body["bounds"].size(), 2u);
}

TEST(Service, DefaultGridDemoHasNonConstantCriteria) {
  Service svc;
  const auto r = svc.create_demo("grid", "");
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["kind"], "grid");
  ASSERT_EQ(r.body["bounds"].size(), 5u);
  for (const auto& b : r.body["bounds"]) EXPECT_LT(b["min"].get<double>(), b["max"].get<double>()) << b["name"];
}

TEST(Service, GridDecisionIsAMask) {
  Service svc;
  const std::string id = svc.create_demo("grid", R"({"seed": 2, "rows": 5, "cols": 6, "k": 3})").body["id"];
  const auto e = solved(svc, id, json{0, 0, 0, 0, 0});
  ASSERT_EQ(e["status"], "optimal");
  const auto& d = e["decision"];
  EXPECT_EQ(d["kind"], "mask");
  EXPECT_EQ(d["managed"], 3);
  ASSERT_EQ(d["mask"].size(), 5u);
  std::size_t ones = 0;
  for (const auto& row : d["mask"]) {
    const std::string s = row;
    EXPECT_EQ(s.size(), 6u);
    ones += static_cast<std::size_t>(std::count(s.begin(), s.end(), '1'));
  }
  EXPECT_EQ(ones, 3u);
}

TEST(Service, HistorySurvivesRestart) {
  const auto dir = fresh_dir("restart");
  std::string id;
  json before;
  {
    Service svc({dir, {}});
    id = svc.create_demo("mdp", R"({"seed": 2, "states": 4, "horizon": 5})").body["id"];
    for (const auto& ref : {json{0.5, 0.5}, json{1, 0}}) svc.submit_reference(id, ref.dump());
    svc.wait_idle(id);
    before = svc.history(id).body;
  }
  ASSERT_EQ(before.size(), 2u);
  Service svc({dir, {}});
  EXPECT_EQ(svc.session_ids(), std::vector<std::string>{id});
  EXPECT_EQ(svc.history(id).body, before);
  EXPECT_EQ(svc.result(id, "r2").body, before[1]);
  EXPECT_EQ(svc.session_info(id).body["kind"], "mdp");
  // Tokens continue after the restored entries.
  EXPECT_EQ(svc.submit_reference(id, "[0.2, 0.2]").body["token"], "r3");
  svc.wait_idle(id);
  EXPECT_EQ(svc.history(id).body.size(), 3u);
  std::filesystem::remove_all(dir);
}

TEST(Service, HistoryReadsDoNotWaitForTheSolver) {
  Service svc;
  const std::string id = svc.create_demo("mdp", "").body["id"];
  for (int k = 0; k < 4; ++k) svc.submit_reference(id, "[0.3, 0.3]");
  const auto start = std::chrono::steady_clock::now();
  std::size_t seen = 0;
  for (int k = 0; k < 50; ++k) seen = std::max<std::size_t>(seen, svc.history(id).body.size());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 0.5);
  svc.wait_idle(id);
  EXPECT_EQ(svc.history(id).body.size(), 4u);
}

TEST(Service, ConcurrentSessionsAreIndependent) {
  Service svc;
  const std::string a = svc.create_session(kToy).body["id"];
  const std::string b = svc.create_session(kToy).body["id"];
  EXPECT_NE(a, b);
  svc.submit_reference(a, "[1, 1]");
  svc.submit_reference(b, "[9, 9]");
  svc.submit_reference(b, "[3, 3]");
  svc.wait_idle(a);
  svc.wait_idle(b);
  EXPECT_EQ(svc.history(a).body.size(), 1u);
  EXPECT_EQ(svc.history(b).body.size(), 2u);
}

TEST(Http, RoundTrip) {
  Service svc;
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto created = cli.Post("/v1/sessions", kToy, "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["id"];
  EXPECT_EQ(cli.Get("/v1/sessions/" + id)->status, 200);

  auto sub = cli.Post("/v1/sessions/" + id + "/reference", R"({"reference": [4, 2]})", "application/json");
  ASSERT_TRUE(sub);
  EXPECT_EQ(sub->status, 202);
  const std::string token = json::parse(sub->body)["token"];
  svc.wait_idle(id);
  auto res = cli.Get("/v1/sessions/" + id + "/results/" + token);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "optimal");
  auto hist = cli.Get("/v1/sessions/" + id + "/history");
  EXPECT_EQ(json::parse(hist->body).size(), 1u);
  EXPECT_EQ(cli.Get("/v1/sessions/unknown/history")->status, 404);
  EXPECT_EQ(cli.Post("/v1/sessions/" + id + "/reference", "[1,2,3]", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/v1/demos/none", "", "application/json")->status, 404);
  auto demo = cli.Post("/v1/demos/mdp", R"({"states": 3, "horizon": 4})", "application/json");
  EXPECT_EQ(demo->status, 201);
  EXPECT_EQ(demo->get_header_value("Content-Type"), "application/json");

  server.stop();
  t.join();
}

}  // namespace
}  // namespace refpoint
