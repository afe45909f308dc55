#include <gtest/gtest.h>

#include "simarena/arena_server.hpp"
#include "simarena/http.hpp"
#include "temp_dir.hpp"

using namespace simarena;
using nlohmann::json;

namespace {

const std::vector<std::string> kMethods = {"LoRA-only", "RAG+Base", "A-Mem+Base", "RAG+LoRA", "A-Mem+LoRA"};

struct Client {
  std::string base;
  int status = 0;

  json call(const std::string& method, const std::string& path, const json& body = nullptr) {
    const auto r = http_request(method, base + path, body.is_null() ? std::string{} : body.dump());
    status = r.status;
    return json::parse(r.body);
  }
};

json experiment_doc() {
  json prompts = json::array();
  for (int i = 0; i < 3; ++i) {
    prompts.push_back({{"prompt_id", "p" + std::to_string(i)},
                       {"text", "question " + std::to_string(i)},
                       {"ptype", i == 2 ? "opinion" : "daily"}});
  }
  return {{"experiment_id", "exp"}, {"prompts", prompts}, {"method_ids", kMethods},
          {"seed", 3}, {"profile_card", "Lin, 28"}};
}

json pools_doc() {
  json records = json::array();
  json truths = json::object();
  for (int i = 0; i < 3; ++i) {
    const std::string p = "p" + std::to_string(i);
    truths[p] = "truth " + p;
    for (const auto& m : kMethods) {
      GenerationRecord r;
      r.method_id = m;
      r.prompt_id = p;
      r.text = "reply from " + m + " to " + p;
      r.evidence_ids = {"pair-secret"};
      records.push_back(r.to_json());
    }
  }
  return {{"records", records}, {"truths", truths}};
}

struct ServerRig {
  explicit ServerRig(std::optional<std::filesystem::path> log = std::nullopt)
      : svc(std::move(log), [] { return std::int64_t{77}; }), server(svc) {
    server.start();
    client.base = server.base_url();
  }
  ArenaService svc;
  ArenaServer server;
  Client client;
};

// Ranks candidates in served order.
json in_order(const json& item) {
  json r = json::object();
  int rank = 1;
  for (const auto& c : item["candidates"]) r[c["label"].get<std::string>()] = rank++;
  return r;
}

}  // namespace

TEST(ArenaHttp, FullJudgeFlowAndReport) {
  TempDir dir;
  ServerRig rig(dir / "ballots.jsonl");
  auto& c = rig.client;

  auto r = c.call("POST", "/experiments", experiment_doc());
  EXPECT_EQ(c.status, 201);
  EXPECT_EQ(r["experiment_id"], "exp");
  r = c.call("POST", "/experiments/exp/pools", pools_doc());
  EXPECT_EQ(c.status, 201);
  EXPECT_EQ(r["pools"], 3);

  for (const char* cohort : {"acquaintance", "stranger"}) {
    auto s = c.call("POST", "/sessions", {{"judge_id", std::string("j-") + cohort}, {"cohort", cohort}});
    ASSERT_EQ(c.status, 201);
    const std::string sid = s["session_id"];
    for (int i = 0; i < 3; ++i) {
      const auto item = c.call("GET", "/sessions/" + sid + "/next");
      ASSERT_EQ(c.status, 200);
      EXPECT_EQ(item.contains("profile_card"), std::string(cohort) == "stranger");
      ASSERT_EQ(item["candidates"].size(), 6u);
      // Blinding: nothing in the judge payload names a method or evidence.
      const std::string dump = item.dump();
      for (const auto& m : kMethods) {
        for (const auto& cand : item["candidates"]) EXPECT_EQ(cand.size(), 2u);
        EXPECT_EQ(dump.find("\"" + m + "\""), std::string::npos);
      }
      EXPECT_EQ(dump.find("pair-secret"), std::string::npos);
      EXPECT_EQ(dump.find("GROUND_TRUTH"), std::string::npos);
      c.call("POST", "/sessions/" + sid + "/ballots", {{"prompt_id", item["prompt_id"]}, {"ranking", in_order(item)}});
      EXPECT_EQ(c.status, 201);
    }
    EXPECT_TRUE(c.call("GET", "/sessions/" + sid + "/next")["done"].get<bool>());
    EXPECT_EQ(c.call("GET", "/sessions/" + sid)["remaining"], 0);
  }

  const auto report = c.call("GET", "/experiments/exp/report");
  EXPECT_EQ(c.status, 200);
  EXPECT_EQ(report["status"], "ok");
  EXPECT_EQ(report["cohorts"]["acquaintance"]["ballots"], 3);
  EXPECT_EQ(report["cohorts"]["stranger"]["ballots"], 3);
  EXPECT_EQ(report["cohorts"]["stranger"]["test"], "General Turing Test");
  EXPECT_EQ(c.call("GET", "/experiments/exp/ballots").size(), 6u);
  EXPECT_EQ(read_ballot_log(dir / "ballots.jsonl").size(), 6u);
  EXPECT_EQ(read_ballot_log(dir / "ballots.jsonl")[0].submitted_ts, 77);
}

TEST(ArenaHttp, ErrorDocuments) {
  ServerRig rig;
  auto& c = rig.client;
  auto r = c.call("GET", "/experiments/nope");
  EXPECT_EQ(c.status, 404);
  EXPECT_EQ(r["code"], "unknown_experiment");
  EXPECT_TRUE(r.contains("message"));

  r = c.call("POST", "/experiments", json{{"prompts", "bad"}});
  EXPECT_EQ(c.status, 400);
  EXPECT_EQ(r["code"], "invalid_request");

  c.call("POST", "/experiments", experiment_doc());
  r = c.call("POST", "/experiments", experiment_doc());
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(r["code"], "duplicate_experiment");

  const auto s = c.call("POST", "/sessions", {{"judge_id", "s1"}, {"cohort", "stranger"}});
  r = c.call("GET", "/sessions/" + s["session_id"].get<std::string>() + "/next");
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(r["code"], "pools_not_built");

  c.call("POST", "/experiments/exp/pools", pools_doc());
  const std::string sid = s["session_id"];
  r = c.call("POST", "/sessions/" + sid + "/ballots",
             {{"prompt_id", "p0"}, {"ranking", {{"A", 1}, {"B", 2}, {"C", 3}, {"D", 4}, {"E", 5}, {"F", 6}}}});
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(r["code"], "profile_not_shown");

  const auto item = c.call("GET", "/sessions/" + sid + "/next");
  r = c.call("POST", "/sessions/" + sid + "/ballots",
             {{"prompt_id", item["prompt_id"]}, {"ranking", {{"A", 1}, {"B", 1}, {"C", 3}, {"D", 4}, {"E", 5}, {"F", 6}}}});
  EXPECT_EQ(c.status, 400);
  EXPECT_EQ(r["code"], "duplicate_rank");

  c.call("POST", "/sessions/" + sid + "/ballots", {{"prompt_id", item["prompt_id"]}, {"ranking", in_order(item)}});
  EXPECT_EQ(c.status, 201);
  r = c.call("POST", "/sessions/" + sid + "/ballots", {{"prompt_id", item["prompt_id"]}, {"ranking", in_order(item)}});
  EXPECT_EQ(c.status, 409);
  EXPECT_EQ(r["code"], "duplicate_ballot");

  r = c.call("POST", "/sessions", {{"judge_id", "x"}, {"cohort", "alien"}});
  EXPECT_EQ(c.status, 400);
  r = c.call("GET", "/sessions/s-99999/next");
  EXPECT_EQ(c.status, 404);
  EXPECT_EQ(r["code"], "unknown_session");
  r = c.call("GET", "/no/such/route");
  EXPECT_EQ(c.status, 404);
  EXPECT_EQ(r["code"], "not_found");
  const auto raw = http_request("POST", c.base + "/sessions", "not json");
  EXPECT_EQ(raw.status, 400);
}

TEST(ArenaHttp, ReportWithoutBallotsSaysNoData) {
  ServerRig rig;
  auto& c = rig.client;
  c.call("POST", "/experiments", experiment_doc());
  c.call("POST", "/experiments/exp/pools", pools_doc());
  const auto r = c.call("GET", "/experiments/exp/report");
  EXPECT_EQ(c.status, 200);
  EXPECT_EQ(r["status"], "no data");
}

TEST(ArenaHttp, SpecJsonRoundTrip) {
  const auto spec = experiment_spec_from_json(experiment_doc());
  EXPECT_EQ(spec.prompts.size(), 3u);
  EXPECT_EQ(spec.prompts[2].ptype, PromptType::kOpinion);
  const auto again = experiment_spec_from_json(experiment_spec_to_json(spec));
  EXPECT_EQ(again.method_ids, spec.method_ids);
  EXPECT_EQ(again.seed, 3u);
  EXPECT_FALSE(again.cohort.has_value());
}
