#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "solarchain/api.hpp"

using namespace solarchain;
using namespace solarchain::api;
using nlohmann::json;

namespace {

Request get(const std::string& path, std::map<std::string, std::string> query = {}) {
  return {"GET", path, std::move(query), {}, {}};
}

Request post(const std::string& path, const json& body, const std::string& account,
             const std::string& role) {
  Request r{"POST", path, {}, {}, body.dump()};
  if (!account.empty()) r.headers[kAccountHeader] = account;
  if (!role.empty()) r.headers[kRoleHeader] = role;
  return r;
}

Response planner(Service& s, const std::string& path, const json& body) {
  return s.handle(post(path, body, "planner-1", "planner"));
}

class ApiTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {}
  void SetUp() override { service.generate(42); }

  std::vector<json> all_records(std::map<std::string, std::string> filter = {}) {
    std::vector<json> out;
    filter["limit"] = "1000";
    for (;;) {
      auto r = service.handle(get("/api/records", filter));
      EXPECT_EQ(r.status, 200) << r.body.dump();
      for (auto& it : r.body["items"]) out.push_back(it);
      if (r.body["next_cursor"].is_null()) break;
      filter["cursor"] = r.body["next_cursor"];
    }
    return out;
  }

  void apply_all_hours() {
    for (int h = 0; h < 24; ++h) {
      ASSERT_EQ(planner(service, "/api/market/step", {{"hour", h}}).status, 200);
    }
  }

  Service service;
};

}  // namespace

TEST(ApiNoBenchmark, HealthAndNotFound) {
  Service s;
  auto h = s.handle(get("/api/health"));
  EXPECT_EQ(h.status, 200);
  EXPECT_EQ(h.body["benchmark_loaded"], false);
  auto n = s.handle(get("/api/nodes"));
  EXPECT_EQ(n.status, 404);
  EXPECT_EQ(n.body["code"], "NoBenchmark");
  EXPECT_TRUE(n.body.contains("message"));
  EXPECT_TRUE(n.body.contains("details"));
  EXPECT_EQ(s.handle(get("/api/nope")).status, 404);
  EXPECT_EQ(s.handle(post("/api/health", json::object(), "a", "")).status, 405);

  auto g = planner(s, "/api/benchmark", {{"seed", 42}});
  EXPECT_EQ(g.status, 201) << g.body.dump();
  EXPECT_EQ(s.handle(get("/api/benchmark")).body["rejected"], 60);
}

TEST_F(ApiTest, RecordFiltersAndPaging) {
  auto rejected = service.handle(get("/api/records", {{"status", "rejected"}}));
  EXPECT_EQ(rejected.body["total"], 60);
  EXPECT_EQ(rejected.body["count"], 60);
  for (const auto& r : rejected.body["items"]) {
    EXPECT_NE(r["anomaly_class"], "none");
    EXPECT_TRUE(r.contains("residual_W"));
    EXPECT_TRUE(r.contains("P_max_W"));
  }

  auto none = service.handle(get("/api/records", {{"city", "Atlantis"}}));
  EXPECT_EQ(none.status, 200);
  EXPECT_EQ(none.body["count"], 0);
  EXPECT_TRUE(none.body["next_cursor"].is_null());

  int pages = 0;
  std::vector<std::pair<std::string, int>> keys;
  std::map<std::string, std::string> q{{"limit", "100"}};
  for (;;) {
    auto r = service.handle(get("/api/records", q));
    ASSERT_EQ(r.status, 200);
    ++pages;
    for (const auto& it : r.body["items"]) keys.emplace_back(it["node_id"], it["hour"]);
    if (r.body["next_cursor"].is_null()) break;
    q["cursor"] = r.body["next_cursor"];
  }
  EXPECT_EQ(pages, 12);
  ASSERT_EQ(keys.size(), 1200u);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(std::set(keys.begin(), keys.end()).size(), 1200u);

  EXPECT_EQ(service.handle(get("/api/records", {{"hour", "25"}})).status, 400);
  EXPECT_EQ(service.handle(get("/api/records", {{"status", "maybe"}})).status, 400);
  EXPECT_EQ(service.handle(get("/api/records", {{"limit", "0"}})).status, 400);
  EXPECT_EQ(service.handle(get("/api/records", {{"cursor", "junk"}})).status, 400);
  auto one = service.handle(get("/api/records", {{"node_id", "BEI-001"}, {"hour", "12"}}));
  EXPECT_EQ(one.body["count"], 1);
}

TEST_F(ApiTest, PanelGate) {
  const auto rejected = all_records({{"status", "rejected"}});
  const auto verified = all_records({{"status", "verified"}});
  ASSERT_EQ(rejected.size(), 60u);
  ASSERT_EQ(verified.size(), 1140u);

  const json ref{{"node_id", verified[0]["node_id"]}, {"hour", verified[0]["hour"]}};
  auto missing = service.handle(post("/api/panels", ref, "", "planner"));
  EXPECT_EQ(missing.status, 401);
  EXPECT_EQ(missing.body["code"], "MissingAccount");
  EXPECT_EQ(service.handle(post("/api/panels", ref, "x", "pv_owner")).status, 403);
  EXPECT_EQ(service.handle(post("/api/panels", ref, "x", "")).status, 403);

  for (const auto& r : rejected) {
    auto res = planner(service, "/api/panels", {{"node_id", r["node_id"]}, {"hour", r["hour"]}});
    ASSERT_EQ(res.status, 409);
    EXPECT_EQ(res.body["code"], "RecordRejected");
    EXPECT_EQ(res.body["details"]["anomaly_class"], r["anomaly_class"]);
    if (r["anomaly_class"] == "night_time") {
      EXPECT_NE(res.body.dump().find("night_time"), std::string::npos);
    }
  }
  EXPECT_EQ(service.handle(get("/api/events", {{"kind", "PanelCreated"}})).body["count"], 0);

  auto first = planner(service, "/api/panels", ref);
  ASSERT_EQ(first.status, 201) << first.body.dump();
  EXPECT_EQ(first.body["panel_id"], 1);
  auto dup = planner(service, "/api/panels", ref);
  EXPECT_EQ(dup.status, 409);
  EXPECT_EQ(dup.body["code"], "AlreadyRegistered");
  EXPECT_EQ(planner(service, "/api/panels", {{"node_id", "ZZZ-1"}, {"hour", 3}}).status, 404);
  EXPECT_EQ(planner(service, "/api/panels", {{"node_id", "BEI-001"}}).status, 400);

  // Listing reflects the registration.
  auto listed = service.handle(get("/api/records", {{"node_id", ref["node_id"]},
                                                    {"hour", std::to_string(ref["hour"].get<int>())}}));
  EXPECT_EQ(listed.body["items"][0]["panel_id"], 1);
}

TEST_F(ApiTest, MutationSeqMatchesEventLog) {
  auto step = planner(service, "/api/market/step", {{"hour", 9}});
  ASSERT_EQ(step.status, 200);
  const auto seq = step.body["seq"].get<std::uint64_t>();
  auto ev = service.handle(get("/api/events/" + std::to_string(seq)));
  ASSERT_EQ(ev.status, 200);
  EXPECT_EQ(ev.body, step.body["event"]);
  EXPECT_EQ(ev.body["kind"], "MarketStep");
  EXPECT_EQ(service.handle(get("/api/events/999999")).status, 404);

  auto page = service.handle(get("/api/events", {{"after", "0"}, {"limit", "5"}}));
  EXPECT_EQ(page.body["count"], 5);
  EXPECT_EQ(page.body["next_after"], 5);
}

TEST_F(ApiTest, MarketStepsAndSummary) {
  auto early = service.handle(get("/api/analytics/summary"));
  EXPECT_EQ(early.status, 409);
  EXPECT_EQ(early.body["code"], "PipelineIncomplete");

  ASSERT_EQ(planner(service, "/api/market/step", {{"hour", 7}}).status, 200);
  auto again = planner(service, "/api/market/step", {{"hour", 7}});
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body["code"], "HourAlreadyApplied");
  EXPECT_EQ(planner(service, "/api/market/step", {{"hour", 24}}).status, 400);
  EXPECT_EQ(service.handle(post("/api/market/step", {{"hour", 8}}, "f", "factory_owner")).status,
            403);

  for (int h = 0; h < 24; ++h) {
    if (h != 7) ASSERT_EQ(planner(service, "/api/market/step", {{"hour", h}}).status, 200);
  }
  auto hours = service.handle(get("/api/market/hours"));
  EXPECT_EQ(hours.body["count"], 24);
  auto sum = service.handle(get("/api/analytics/summary"));
  ASSERT_EQ(sum.status, 200);
  EXPECT_EQ(sum.body["liquidity"]["hourly"].size(), 24u);
  const double infl = sum.body["energy"]["inflation_prevented_pct"];
  EXPECT_GE(infl, 5.0);
  EXPECT_LE(infl, 9.0);
  EXPECT_TRUE(sum.body["residuals"].contains("mean_ratio"));
}

TEST_F(ApiTest, TradeBurnsOneTokenPerKwh) {
  for (int h = 10; h <= 12; ++h) planner(service, "/api/market/step", {{"hour", h}});
  const json body{{"factory_id", "FAC-SH-01"}, {"energy_units", 100000}, {"hour", 12}, {"minute", 30}};
  auto wrong = service.handle(post("/api/trades", body, "owner-FAC-BJ-01", "factory_owner"));
  EXPECT_EQ(wrong.status, 403);
  EXPECT_EQ(wrong.body["code"], "NotFactoryOwner");
  EXPECT_EQ(service.handle(post("/api/trades", body, "owner-FAC-SH-01", "planner")).status, 403);

  auto ok = service.handle(post("/api/trades", body, "owner-FAC-SH-01", "factory_owner"));
  ASSERT_EQ(ok.status, 201) << ok.body.dump();
  EXPECT_EQ(ok.body["tokens_burned_wei"], "1000000000000000000");
  EXPECT_EQ(ok.body["tokens_burned"], "1.000000000000000000");
  EXPECT_EQ(ok.body["timestamp"], "2026-05-01T12:30:00+08:00");
  EXPECT_EQ(ok.body["event"]["kind"], "EnergyPurchased");

  auto zero = service.handle(post("/api/trades", {{"factory_id", "FAC-SH-01"}, {"energy_units", 0}, {"hour", 12}},
                                  "owner-FAC-SH-01", "factory_owner"));
  EXPECT_EQ(zero.status, 400);
  EXPECT_EQ(zero.body["code"], "InvalidAmount");
  auto huge = service.handle(post("/api/trades",
                                  {{"factory_id", "FAC-SH-01"}, {"energy_units", 1'000'000'000'000}, {"hour", 12}},
                                  "owner-FAC-SH-01", "factory_owner"));
  EXPECT_EQ(huge.status, 409);
  EXPECT_EQ(huge.body["code"], "InsufficientSupply");
  EXPECT_EQ(service.handle(get("/api/trades")).body["count"], 1);
}

TEST_F(ApiTest, RewardCooldown) {
  auto reg = planner(service, "/api/panels", {{"node_id", "CHE-003"}, {"hour", 12}});
  ASSERT_EQ(reg.status, 201);
  const std::string owner = reg.body["owner"];
  auto info = service.handle(get("/api/rewards/" + owner));
  EXPECT_GT(info.body["registered_capacity_W"].get<std::uint64_t>(), 0u);

  auto c1 = service.handle(post("/api/rewards/claim", {{"hour", 9}}, owner, "pv_owner"));
  ASSERT_EQ(c1.status, 200) << c1.body.dump();
  EXPECT_NE(c1.body["amount_wei"], "0");
  auto c2 = service.handle(post("/api/rewards/claim", {{"hour", 9}, {"minute", 30}}, owner, "pv_owner"));
  EXPECT_EQ(c2.status, 429);
  EXPECT_EQ(c2.body["code"], "CooldownActive");
  EXPECT_EQ(c2.headers.at("Retry-After"), "1800");
  EXPECT_EQ(c2.body["details"]["retry_after_s"], 1800);
  EXPECT_EQ(service.handle(get("/api/rewards/" + owner, {{"hour", "9"}, {"minute", "30"}}))
                .body["cooldown_remaining_s"],
            1800);
  EXPECT_EQ(service.handle(post("/api/rewards/claim", {{"hour", 10}}, owner, "pv_owner")).status, 200);
}

TEST_F(ApiTest, ShopHappyPathTransfersOwnership) {
  const auto v = all_records({{"status", "verified"}, {"node_id", "HAN-004"}});
  ASSERT_FALSE(v.empty());
  auto reg = planner(service, "/api/panels", {{"node_id", "HAN-004"}, {"hour", v[0]["hour"]}});
  ASSERT_EQ(reg.status, 201);
  const std::string seller = reg.body["owner"];
  const auto panel = reg.body["panel_id"].get<std::uint64_t>();
  const std::string buyer = "owner-FAC-HZ-01";
  const std::string price = "5000000000000000000";

  auto listing = service.handle(post("/api/shop/listings", {{"panel_id", panel}, {"ask_price_wei", price}},
                                     seller, "pv_owner"));
  ASSERT_EQ(listing.status, 201) << listing.body.dump();
  const auto item = listing.body["item_id"].get<std::uint64_t>();
  EXPECT_EQ(service.handle(post("/api/shop/listings", {{"panel_id", panel}, {"ask_price_wei", price}},
                                "mallory", "pv_owner"))
                .status,
            403);

  auto no_allowance = service.handle(post("/api/shop/offers", {{"item_id", item}, {"amount_wei", price}},
                                          buyer, "factory_owner"));
  EXPECT_EQ(no_allowance.status, 409);
  EXPECT_EQ(no_allowance.body["code"], "InsufficientAllowance");
  ASSERT_EQ(service.handle(post("/api/token/approve", {{"spender", "shop"}, {"amount_wei", price}},
                                buyer, "factory_owner"))
                .status,
            200);
  ASSERT_EQ(service.handle(post("/api/shop/offers", {{"item_id", item}, {"amount_wei", price}}, buyer,
                                "factory_owner"))
                .status,
            201);
  const auto seller_before = service.handle(get("/api/token/balance/" + seller)).body["balance_wei"];
  auto sale = service.handle(post("/api/shop/approve", {{"item_id", item}, {"buyer", buyer}}, seller,
                                  "pv_owner"));
  ASSERT_EQ(sale.status, 200) << sale.body.dump();
  EXPECT_EQ(sale.body["new_owner"], buyer);
  EXPECT_EQ(seller_before, "0");
  EXPECT_EQ(service.handle(get("/api/token/balance/" + seller)).body["balance_wei"], price);

  for (const auto& n : service.handle(get("/api/nodes")).body["items"]) {
    if (n["node_id"] == "HAN-004") {
      EXPECT_EQ(n["owner"], buyer);
      EXPECT_EQ(n["panels"][0]["owner"], buyer);
    }
  }
  EXPECT_EQ(service.handle(post("/api/shop/approve", {{"item_id", item}, {"buyer", buyer}}, seller,
                                "pv_owner"))
                .status,
            409);
}

TEST_F(ApiTest, TokenEndpoints) {
  auto mint = planner(service, "/api/token/mint", {{"to", "alice"}, {"amount_wei", "42"}});
  ASSERT_EQ(mint.status, 200);
  EXPECT_EQ(service.handle(get("/api/token/balance/alice")).body["balance_wei"], "42");
  EXPECT_EQ(service.handle(post("/api/token/mint", {{"to", "alice"}, {"amount_wei", "1"}}, "alice",
                                "pv_owner"))
                .status,
            403);
  auto over = planner(service, "/api/token/mint", {{"to", "alice"}, {"amount_wei", std::string(40, '9')}});
  EXPECT_EQ(over.status, 400);
  auto cap = planner(service, "/api/token/mint", {{"to", "alice"}, {"amount_wei", "1" + std::string(28, '0')}});
  EXPECT_EQ(cap.status, 409);
  EXPECT_EQ(cap.body["code"], "CapExceeded");
  EXPECT_EQ(planner(service, "/api/token/mint", {{"to", "alice"}, {"amount_wei", "-3"}}).status, 400);
  Request bad = post("/api/token/mint", json::object(), "p", "planner");
  bad.body = "{not json";
  EXPECT_EQ(service.handle(bad).status, 400);
}

TEST_F(ApiTest, ReadersNeverSeeHalfAppliedSteps) {
  std::atomic<bool> done{false};
  std::atomic<int> violations{0};
  std::vector<std::thread> readers;
  for (int i = 0; i < 4; ++i) {
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!done) {
        auto h = service.handle(get("/api/market/hours"));
        auto e = service.handle(get("/api/events", {{"kind", "MarketStep"}}));
        if (h.status != 200 || e.status != 200) ++violations;
        // Each applied hour is exactly one MarketStep event; the event count can only grow.
        const auto steps = e.body["count"].get<std::uint64_t>();
        if (steps < last) ++violations;
        last = steps;
      }
    });
  }
  apply_all_hours();
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(violations, 0);
  EXPECT_EQ(service.handle(get("/api/events", {{"kind", "MarketStep"}})).body["count"], 24);
}

TEST(ApiHttp, ServesJsonAndAssets) {
  const auto assets = std::filesystem::temp_directory_path() / "solarchain_assets_test";
  std::filesystem::create_directories(assets);
  std::ofstream(assets / "index.html") << "<html>console</html>";

  Service service;
  service.generate(42);
  Server server(service, assets);
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");

  auto page = cli.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>console</html>");

  auto unauth = cli.Post("/api/market/step", R"({"hour":3})", "application/json");
  ASSERT_TRUE(unauth);
  EXPECT_EQ(unauth->status, 401);
  httplib::Headers hdr{{"x-account", "p"}, {"x-role", "planner"}};
  auto step = cli.Post("/api/market/step", hdr, R"({"hour":3})", "application/json");
  ASSERT_TRUE(step);
  EXPECT_EQ(step->status, 200);

  auto rej = cli.Get("/api/records?status=rejected&limit=1000");
  ASSERT_TRUE(rej);
  EXPECT_EQ(json::parse(rej->body)["count"], 60);

  server.stop();
  t.join();
  std::filesystem::remove_all(assets);
}
