#include "solarchain/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "solarchain/report.hpp"

namespace solarchain::api {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct ApiError {
  int status;
  std::string code;
  std::string message;
  json details = json::object();
};

[[noreturn]] void bad_request(const std::string& message, json details = json::object()) {
  throw ApiError{400, "BadRequest", message, std::move(details)};
}

json parse_body(const Request& r) {
  if (r.body.empty()) return json::object();
  json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_request("request body must be a JSON object");
  return j;
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) bad_request(fmt::format("missing field '{}'", key), {{"field", key}});
  return j.at(key);
}

std::string string_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    bad_request(fmt::format("field '{}' must be a non-empty string", key), {{"field", key}});
  }
  return v.get<std::string>();
}

std::int64_t int_field(const json& j, const char* key, std::optional<std::int64_t> fallback = {}) {
  if (!j.contains(key) && fallback) return *fallback;
  const auto& v = field(j, key);
  if (!v.is_number_integer()) {
    bad_request(fmt::format("field '{}' must be an integer", key), {{"field", key}});
  }
  return v.get<std::int64_t>();
}

std::uint64_t uint_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad_request(fmt::format("field '{}' must be a non-negative integer", key), {{"field", key}});
  }
  return v.get<std::uint64_t>();
}

// Wei amounts travel as decimal strings; small integers are accepted too.
Wei wei_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  try {
    if (v.is_string()) return Wei::parse(v.get<std::string>());
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      return Wei::from_u64(v.get<std::uint64_t>());
    }
  } catch (const std::invalid_argument&) {
  }
  bad_request(fmt::format("field '{}' must be a wei amount (decimal string)", key),
              {{"field", key}});
}

std::optional<std::int64_t> query_int(const Request& r, const std::string& key) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return std::nullopt;
  std::int64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    bad_request(fmt::format("query parameter '{}' must be an integer", key), {{"field", key}});
  }
  return v;
}

std::optional<std::string> query_str(const Request& r, const std::string& key) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int hour_in(const json& body, const char* key = "hour") {
  const auto h = int_field(body, key);
  if (h < 0 || h > 23) bad_request("hour must be in 0-23", {{"field", key}});
  return static_cast<int>(h);
}

int minute_in(const json& body) {
  const auto m = int_field(body, "minute", 0);
  if (m < 0 || m > 59) bad_request("minute must be in 0-59", {{"field", "minute"}});
  return static_cast<int>(m);
}

int ledger_status(ledger::ErrorCode c) {
  using E = ledger::ErrorCode;
  switch (c) {
    case E::NoSuchFactory:
    case E::NoSuchPanel:
    case E::NoSuchListing:
    case E::NoSuchOffer:
      return 404;
    case E::NotFactoryOwner:
    case E::NotOwner:
      return 403;
    case E::InvalidAmount:
    case E::InvalidAccount:
    case E::Overflow:
      return 400;
    case E::CooldownActive:
      return 429;
    default:
      return 409;
  }
}

int market_status(MarketErrorCode c) {
  switch (c) {
    case MarketErrorCode::NoSuchRecord:
    case MarketErrorCode::NoSuchFactory:
      return 404;
    case MarketErrorCode::InvalidHour:
      return 400;
    default:
      return 409;
  }
}

json record_json(const GenerationRecord& r, double tau, std::optional<std::uint64_t> panel) {
  const auto v = r.verdict(tau);
  return {{"timestamp", r.timestamp.to_iso()},
          {"hour", r.hour},
          {"node_id", r.node_id},
          {"city", r.city},
          {"latitude", r.latitude},
          {"longitude", r.longitude},
          {"irradiance_Wm2", r.irradiance_wm2},
          {"air_temp_C", r.air_temp_c},
          {"P_max_W", r.p_max_w},
          {"P_reported_W", num_or_null(r.p_reported_w)},
          {"fdia_detected", r.fdia_detected},
          {"verification_status", std::string(physics::to_string(r.verification_status))},
          {"residual_W", num_or_null(v.residual_w)},
          {"ratio", v.ratio && std::isfinite(*v.ratio) ? json(*v.ratio) : json(nullptr)},
          {"anomaly_class", std::string(physics::to_string(v.anomaly_class))},
          {"panel_id", panel ? json(*panel) : json(nullptr)}};
}

json trade_json(const TradeRow& t) {
  return {{"trade_id", t.trade_id},
          {"timestamp", t.timestamp.to_iso()},
          {"hour", t.hour},
          {"factory_id", t.factory_id},
          {"city", t.city},
          {"energy_units", t.energy_units},
          {"energy_purchased_MW", t.energy_mwh()},
          {"tokens_burned", t.tokens_burned.to_token_string()},
          {"tokens_burned_wei", t.tokens_burned.to_string()},
          {"exergy_dissipated_MJ", t.exergy_mj}};
}

json market_hour_json(const MarketHour& h) {
  return {{"timestamp", h.timestamp.to_iso()},
          {"hour", h.hour},
          {"total_verified_MW", h.total_verified_mw},
          {"SolarChain_liquidity_MW", h.solarchain_liquidity_mw},
          {"baseline_liquidity_MW", h.baseline_liquidity_mw},
          {"slippage_SolarChain_pct", h.slippage_solarchain_pct},
          {"slippage_baseline_pct", h.slippage_baseline_pct}};
}

// Attaches the sequence number and body of the newest event.
json with_seq(json body, const ledger::Ledger& l) {
  body["seq"] = l.last_seq();
  body["event"] = l.events().empty() ? json(nullptr) : ledger::to_json(l.events().back());
  return body;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

}  // namespace

std::optional<std::string> Request::header(const std::string& name) const {
  const auto want = lower(name);
  for (const auto& [k, v] : headers) {
    if (lower(k) == want) return v;
  }
  return std::nullopt;
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "planner") return Role::planner;
  if (s == "pv_owner") return Role::pv_owner;
  if (s == "factory_owner") return Role::factory_owner;
  return std::nullopt;
}

json error_body(std::string_view code, std::string_view message, json details) {
  return {{"code", code}, {"message", message}, {"details", std::move(details)}};
}

struct Service::Context {
  const Request& request;
  std::map<std::string, std::string> params;
  std::string account;
  json body;
};

struct Service::Route {
  std::string method;
  std::vector<std::string> pattern;
  bool mutating = false;
  bool needs_benchmark = true;
  std::optional<Role> role;
  std::function<Response(Context&)> handler;

  bool match(const std::vector<std::string>& segs, std::map<std::string, std::string>& params) const {
    if (segs.size() != pattern.size()) return false;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (pattern[i].front() == ':') params[pattern[i].substr(1)] = segs[i];
      else if (pattern[i] != segs[i]) return false;
    }
    return true;
  }
};

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  options_.config.market.validate();
  if (options_.default_page_size < 1 || options_.max_page_size < options_.default_page_size) {
    throw std::invalid_argument("page sizes must satisfy 1 <= default <= max");
  }
  install_routes();
}

Service::~Service() = default;

std::shared_lock<std::shared_mutex> Service::read_lock() const {
  std::lock_guard gate(turnstile_);
  return std::shared_lock(mutex_);
}

std::unique_lock<std::shared_mutex> Service::write_lock() const {
  std::lock_guard gate(turnstile_);
  return std::unique_lock(mutex_);
}

bool Service::loaded() const {
  auto lock = read_lock();
  return day_ != nullptr;
}

void Service::reset(std::vector<physics::NodeSpec> nodes, std::vector<GenerationRecord> records) {
  auto day = std::make_unique<MarketDay>(std::move(nodes), std::move(records),
                                         options_.config.market);
  std::vector<std::size_t> order(day->records().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& recs = day->records();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(recs[a].node_id, recs[a].hour) < std::tie(recs[b].node_id, recs[b].hour);
  });
  day_ = std::move(day);
  by_node_hour_ = std::move(order);
}

void Service::load(Dataset data) {
  auto lock = write_lock();
  reset(std::move(data.nodes), std::move(data.records));
}

void Service::generate(std::uint64_t seed) {
  auto cfg = options_.config;
  cfg.seed = seed;
  cfg.validate();
  auto nodes = benchgen::generate_nodes(cfg);
  auto day = benchgen::generate_generation(cfg, nodes);
  auto lock = write_lock();
  reset(std::move(nodes), std::move(day.records));
}

Response Service::handle(const Request& request) {
  try {
    return dispatch(request);
  } catch (const ApiError& e) {
    return {e.status, error_body(e.code, e.message, e.details), {}};
  } catch (const MarketError& e) {
    return {market_status(e.code()),
            error_body(to_string(e.code()), e.what(),
                       e.details().is_null() ? json::object() : e.details()),
            {}};
  } catch (const ledger::LedgerError& e) {
    Response r{ledger_status(e.code()), error_body(ledger::to_string(e.code()), e.what()), {}};
    if (e.retry_after_s()) {
      r.body["details"]["retry_after_s"] = *e.retry_after_s();
      r.headers["Retry-After"] = std::to_string(*e.retry_after_s());
    }
    return r;
  } catch (const benchgen::InfeasiblePlan& e) {
    return {409, error_body("InfeasiblePlan", e.what()), {}};
  } catch (const std::invalid_argument& e) {
    return {400, error_body("BadRequest", e.what()), {}};
  } catch (const std::exception& e) {
    return {500, error_body("Internal", e.what()), {}};
  }
}

Response Service::dispatch(const Request& request) {
  const auto segs = split_path(request.path);
  const Route* route = nullptr;
  std::map<std::string, std::string> params;
  bool path_known = false;
  for (const auto& r : routes_) {
    std::map<std::string, std::string> p;
    if (!r.match(segs, p)) continue;
    path_known = true;
    if (r.method == request.method) {
      route = &r;
      params = std::move(p);
      break;
    }
  }
  if (!route) {
    if (path_known) throw ApiError{405, "MethodNotAllowed", "method not allowed for this path"};
    throw ApiError{404, "NotFound", fmt::format("no endpoint {} {}", request.method, request.path)};
  }

  Context ctx{request, std::move(params), {}, json::object()};
  if (route->mutating) {
    const auto account = request.header(kAccountHeader);
    if (!account || account->empty()) {
      throw ApiError{401, "MissingAccount", fmt::format("{} header is required", kAccountHeader)};
    }
    ctx.account = *account;
    if (route->role) {
      const auto role_text = request.header(kRoleHeader);
      const auto role = role_text ? parse_role(*role_text) : std::nullopt;
      if (role != route->role) {
        throw ApiError{403, "Forbidden", "role not permitted for this endpoint",
                       {{"role", role_text ? json(*role_text) : json(nullptr)}}};
      }
    }
    ctx.body = parse_body(request);
  }

  auto run = [&]() -> Response {
    if (route->needs_benchmark && !day_) {
      throw ApiError{404, "NoBenchmark", "no benchmark is loaded"};
    }
    return route->handler(ctx);
  };
  if (route->mutating) {
    auto lock = write_lock();
    return run();
  }
  auto lock = read_lock();
  return run();
}

void Service::install_routes() {
  auto add = [this](std::string method, const std::string& path, bool mutating,
                    std::optional<Role> role, std::function<Response(Context&)> h,
                    bool needs_benchmark = true) {
    routes_.push_back(
        Route{std::move(method), split_path(path), mutating, needs_benchmark, role, std::move(h)});
  };
  const auto GET = "GET", POST = "POST";

  add(GET, "/api/health", false, std::nullopt, [this](Context&) {
    json j{{"status", "ok"}, {"benchmark_loaded", day_ != nullptr}};
    if (day_) {
      j["applied_hours"] = day_->applied_hours().size();
      j["last_seq"] = day_->ledger().last_seq();
    }
    return Response{200, j, {}};
  }, false);

  add(GET, "/api/benchmark", false, std::nullopt, [this](Context&) {
    const auto v = report::verify_records(day_->records(), day_->config().tau);
    return Response{200,
                    {{"nodes", day_->nodes().size()},
                     {"records", day_->records().size()},
                     {"verified", v.verified},
                     {"rejected", v.rejected},
                     {"tau", day_->config().tau},
                     {"date", day_->config().date.to_string()}},
                    {}};
  });

  add(POST, "/api/benchmark", true, Role::planner, [this](Context& c) {
    auto cfg = options_.config;
    cfg.seed = static_cast<std::uint64_t>(int_field(c.body, "seed", static_cast<std::int64_t>(cfg.seed)));
    cfg.validate();
    auto nodes = benchgen::generate_nodes(cfg);
    auto day = benchgen::generate_generation(cfg, nodes);
    reset(std::move(nodes), std::move(day.records));
    return Response{201, {{"seed", cfg.seed}, {"records", day_->records().size()}}, {}};
  }, false);

  add(GET, "/api/nodes", false, std::nullopt, [this](Context&) {
    std::map<std::string, json> panels;
    const auto& recs = day_->records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (auto pid = day_->panel_for_record(i)) {
        panels[recs[i].node_id].push_back({{"panel_id", *pid},
                                           {"hour", recs[i].hour},
                                           {"owner", day_->ledger().panel(*pid).owner}});
      }
    }
    json items = json::array();
    for (const auto& n : day_->nodes()) {
      auto it = panels.find(n.node_id);
      items.push_back({{"node_id", n.node_id},
                       {"city", n.city},
                       {"latitude", n.latitude},
                       {"longitude", n.longitude},
                       {"panel_area_m2", n.panel_area_m2},
                       {"efficiency", n.efficiency},
                       {"temp_coefficient", n.temp_coefficient},
                       {"install_date", n.install_date.to_string()},
                       {"owner", day_->owner_of_node(n.node_id)},
                       {"panels", it == panels.end() ? json::array() : it->second}});
    }
    return Response{200, {{"items", items}, {"count", items.size()}}, {}};
  });

  add(GET, "/api/records", false, std::nullopt, [this](Context& c) {
    const auto& q = c.request;
    std::optional<physics::VerificationStatus> status;
    if (auto s = query_str(q, "status")) {
      try {
        status = physics::parse_status(*s);
      } catch (const std::invalid_argument&) {
        bad_request("status must be 'verified' or 'rejected'", {{"field", "status"}});
      }
    }
    const auto city = query_str(q, "city");
    const auto node = query_str(q, "node_id");
    const auto hour = query_int(q, "hour");
    if (hour && (*hour < 0 || *hour > 23)) bad_request("hour must be in 0-23", {{"field", "hour"}});
    const auto limit = query_int(q, "limit").value_or(options_.default_page_size);
    if (limit < 1 || limit > options_.max_page_size) {
      bad_request(fmt::format("limit must be in 1-{}", options_.max_page_size), {{"field", "limit"}});
    }

    // Cursor is "<node_id>@<hour>" of the last item on the previous page.
    const auto& recs = day_->records();
    auto begin = by_node_hour_.begin();
    if (auto cur = query_str(q, "cursor")) {
      const auto at = cur->rfind('@');
      int h = -1;
      if (at == std::string::npos ||
          std::from_chars(cur->data() + at + 1, cur->data() + cur->size(), h).ec != std::errc()) {
        bad_request("malformed cursor", {{"field", "cursor"}});
      }
      const auto key = std::make_pair(cur->substr(0, at), h);
      begin = std::upper_bound(by_node_hour_.begin(), by_node_hour_.end(), key,
                               [&](const auto& k, std::size_t i) {
                                 return k < std::make_pair(recs[i].node_id, recs[i].hour);
                               });
    }
    auto keep = [&](const GenerationRecord& r) {
      return (!status || r.verification_status == *status) && (!city || r.city == *city) &&
             (!node || r.node_id == *node) && (!hour || r.hour == *hour);
    };
    std::size_t total = 0;
    for (auto i : by_node_hour_) total += keep(recs[i]);

    json items = json::array();
    json next = nullptr;
    for (auto it = begin; it != by_node_hour_.end(); ++it) {
      const auto& r = recs[*it];
      if (!keep(r)) continue;
      if (static_cast<std::int64_t>(items.size()) == limit) {
        next = items.back()["node_id"].get<std::string>() + "@" +
               std::to_string(items.back()["hour"].get<int>());
        break;
      }
      items.push_back(record_json(r, day_->config().tau, day_->panel_for_record(*it)));
    }
    return Response{200, {{"items", items}, {"count", items.size()}, {"total", total},
                          {"next_cursor", next}}, {}};
  });

  add(POST, "/api/panels", true, Role::planner, [this](Context& c) {
    const auto node = string_field(c.body, "node_id");
    const int hour = hour_in(c.body);
    std::optional<std::string> owner;
    if (c.body.contains("owner")) owner = string_field(c.body, "owner");
    const auto reg = day_->register_panel(node, hour, owner);
    const auto& p = day_->ledger().panel(reg.panel_id);
    return Response{201,
                    with_seq({{"panel_id", reg.panel_id},
                              {"owner", p.owner},
                              {"node_id", node},
                              {"hour", hour},
                              {"dc_power_W", p.dc_power_w},
                              {"ac_power_W", p.ac_power_w},
                              {"battery_temp_C", p.battery_temp_c}},
                             day_->ledger()),
                    {}};
  });

  add(GET, "/api/panels", false, std::nullopt, [this](Context&) {
    auto panels = ledger::snapshot_json(day_->ledger().state())["panels"];
    return Response{200, {{"items", panels}, {"count", panels.size()}}, {}};
  });

  add(GET, "/api/panels/:id", false, std::nullopt, [this](Context& c) {
    std::uint64_t id = 0;
    const auto& s = c.params["id"];
    std::from_chars(s.data(), s.data() + s.size(), id);
    const auto& panels = day_->ledger().state().panels;
    if (id == 0 || id > panels.size()) {
      throw ApiError{404, "NoSuchPanel", fmt::format("no panel '{}'", s)};
    }
    return Response{200, ledger::snapshot_json(day_->ledger().state())["panels"][id - 1], {}};
  });

  add(POST, "/api/market/step", true, Role::planner, [this](Context& c) {
    const int hour = hour_in(c.body);
    day_->apply_hour(hour);
    json row = nullptr;
    for (const auto& h : day_->market_hours()) {
      if (h.hour == hour) row = market_hour_json(h);
    }
    return Response{200,
                    with_seq({{"hour", hour},
                              {"applied_hours", day_->applied_hours().size()},
                              {"complete", day_->complete()},
                              {"market_hour", row}},
                             day_->ledger()),
                    {}};
  });

  add(GET, "/api/market/hours", false, std::nullopt, [this](Context&) {
    json rows = json::array();
    for (const auto& h : day_->market_hours()) rows.push_back(market_hour_json(h));
    const auto& tok = day_->ledger().state();
    return Response{200,
                    {{"hours", rows},
                     {"count", rows.size()},
                     {"complete", day_->complete()},
                     {"pool_energy_units", tok.exchange.global_supply_energy},
                     {"total_demand_units", tok.exchange.total_demand_energy}},
                    {}};
  });

  add(GET, "/api/analytics/summary", false, std::nullopt, [this](Context&) {
    if (!day_->complete()) {
      throw MarketError(MarketErrorCode::PipelineIncomplete,
                        fmt::format("{} of 24 market hours applied", day_->applied_hours().size()),
                        {{"applied_hours", day_->applied_hours().size()}});
    }
    return Response{200, report::build_report(*day_), {}};
  });

  add(GET, "/api/factories", false, std::nullopt, [this](Context&) {
    json items = json::array();
    const auto& l = day_->ledger();
    for (const auto& f : day_->config().factories) {
      const auto owner = day_->factory_owner(f.factory_id);
      items.push_back({{"factory_id", f.factory_id},
                       {"city", f.city},
                       {"latitude", f.latitude},
                       {"longitude", f.longitude},
                       {"power_consumption_units", f.power_consumption},
                       {"ledger_factory_id", day_->ledger_factory_id(f.factory_id)},
                       {"owner", owner},
                       {"balance_wei", l.balance_of(owner).to_string()},
                       {"exchange_allowance_wei",
                        l.allowance(owner, l.config().exchange_account).to_string()}});
    }
    return Response{200, {{"items", items}, {"count", items.size()}}, {}};
  });

  add(GET, "/api/trades", false, std::nullopt, [this](Context&) {
    json items = json::array();
    for (const auto& t : day_->trades()) items.push_back(trade_json(t));
    return Response{200, {{"items", items}, {"count", items.size()}}, {}};
  });

  add(POST, "/api/trades", true, Role::factory_owner, [this](Context& c) {
    const auto factory = string_field(c.body, "factory_id");
    const auto units = uint_field(c.body, "energy_units");
    const int hour = hour_in(c.body);
    const int minute = minute_in(c.body);
    day_->factory_spec(factory);  // NoSuchFactory first
    if (day_->factory_owner(factory) != c.account) {
      throw ledger::LedgerError(ledger::ErrorCode::NotFactoryOwner,
                                fmt::format("{} does not own {}", c.account, factory));
    }
    const auto t = day_->buy(factory, units, hour, minute);
    return Response{201, with_seq(trade_json(t), day_->ledger()), {}};
  });

  add(GET, "/api/rewards/:owner", false, std::nullopt, [this](Context& c) {
    const auto& owner = c.params["owner"];
    const auto& l = day_->ledger();
    json j{{"owner", owner},
           {"registered_capacity_W", l.registered_capacity_w(owner)},
           {"claimable_wei", l.preview_reward(owner).to_string()},
           {"accrued_market_reward_wei",
            [&] {
              const auto& m = l.state().exchange.personal_reward_wei;
              auto it = m.find(owner);
              return it == m.end() ? std::string("0") : it->second.to_string();
            }()},
           {"balance_wei", l.balance_of(owner).to_string()}};
    if (auto h = query_int(c.request, "hour")) {
      if (*h < 0 || *h > 23) bad_request("hour must be in 0-23", {{"field", "hour"}});
      const auto now = day_->config().hour_start(static_cast<int>(*h))
                           .plus_seconds(query_int(c.request, "minute").value_or(0) * 60);
      j["cooldown_remaining_s"] = l.cooldown_remaining(owner, now);
    }
    return Response{200, j, {}};
  });

  add(POST, "/api/rewards/claim", true, Role::pv_owner, [this](Context& c) {
    const int hour = hour_in(c.body);
    const int minute = minute_in(c.body);
    auto& l = day_->mutable_ledger();
    const auto now = day_->config().hour_start(hour).plus_seconds(minute * 60);
    l.set_clock(now);
    const auto paid = l.claim_reward(c.account, now);
    return Response{200,
                    with_seq({{"owner", c.account},
                              {"amount_wei", paid.to_string()},
                              {"amount", paid.to_token_string()}},
                             l),
                    {}};
  });

  // Shop and token calls keep the ledger clock unless an hour is supplied.
  auto clock_from = [this](const json& body) {
    if (body.contains("hour")) {
      day_->mutable_ledger().set_clock(
          day_->config().hour_start(hour_in(body)).plus_seconds(minute_in(body) * 60));
    }
  };

  add(GET, "/api/shop/listings", false, std::nullopt, [this](Context&) {
    auto items = ledger::snapshot_json(day_->ledger().state())["listings"];
    return Response{200, {{"items", items}, {"count", items.size()}}, {}};
  });

  add(POST, "/api/shop/listings", true, Role::pv_owner, [this, clock_from](Context& c) {
    const auto panel = uint_field(c.body, "panel_id");
    const auto price = wei_field(c.body, "ask_price_wei");
    clock_from(c.body);
    const auto item = day_->mutable_ledger().list_panel(c.account, panel, price);
    return Response{201, with_seq({{"item_id", item}, {"panel_id", panel}}, day_->ledger()), {}};
  });

  add(POST, "/api/shop/offers", true, std::nullopt, [this, clock_from](Context& c) {
    const auto item = uint_field(c.body, "item_id");
    const auto amount = wei_field(c.body, "amount_wei");
    clock_from(c.body);
    day_->mutable_ledger().place_offer(c.account, item, amount);
    return Response{201,
                    with_seq({{"item_id", item}, {"buyer", c.account},
                              {"amount_wei", amount.to_string()}},
                             day_->ledger()),
                    {}};
  });

  add(POST, "/api/shop/approve", true, Role::pv_owner, [this, clock_from](Context& c) {
    const auto item = uint_field(c.body, "item_id");
    const auto buyer = string_field(c.body, "buyer");
    clock_from(c.body);
    day_->mutable_ledger().approve_sale(c.account, item, buyer);
    const auto& listing = day_->ledger().listing(item);
    return Response{200,
                    with_seq({{"item_id", item},
                              {"panel_id", listing.panel_id},
                              {"new_owner", day_->ledger().panel(listing.panel_id).owner}},
                             day_->ledger()),
                    {}};
  });

  add(POST, "/api/shop/cancel", true, Role::pv_owner, [this, clock_from](Context& c) {
    const auto item = uint_field(c.body, "item_id");
    clock_from(c.body);
    day_->mutable_ledger().cancel_listing(c.account, item);
    return Response{200, with_seq({{"item_id", item}}, day_->ledger()), {}};
  });

  add(GET, "/api/token", false, std::nullopt, [this](Context&) {
    const auto& t = day_->ledger().state().token;
    return Response{200,
                    {{"total_supply_wei", t.total_supply.to_string()},
                     {"cap_wei", t.cap.to_string()},
                     {"cumulative_minted_wei", t.cumulative_minted.to_string()},
                     {"cumulative_burned_wei", t.cumulative_burned.to_string()}},
                    {}};
  });

  add(GET, "/api/token/balance/:account", false, std::nullopt, [this](Context& c) {
    const auto& a = c.params["account"];
    const auto& l = day_->ledger();
    json allowances = json::object();
    for (const auto& [k, v] : l.state().token.allowances) {
      if (k.first == a) allowances[k.second] = v.to_string();
    }
    return Response{200,
                    {{"account", a},
                     {"balance_wei", l.balance_of(a).to_string()},
                     {"balance", l.balance_of(a).to_token_string()},
                     {"allowances_wei", allowances}},
                    {}};
  });

  add(POST, "/api/token/approve", true, std::nullopt, [this, clock_from](Context& c) {
    const auto spender = string_field(c.body, "spender");
    const auto amount = wei_field(c.body, "amount_wei");
    clock_from(c.body);
    day_->mutable_ledger().approve(c.account, spender, amount);
    return Response{200,
                    with_seq({{"owner", c.account}, {"spender", spender},
                              {"amount_wei", amount.to_string()}},
                             day_->ledger()),
                    {}};
  });

  add(POST, "/api/token/mint", true, Role::planner, [this, clock_from](Context& c) {
    const auto to = string_field(c.body, "to");
    const auto amount = wei_field(c.body, "amount_wei");
    clock_from(c.body);
    day_->mutable_ledger().mint(to, amount);
    return Response{200, with_seq({{"to", to}, {"amount_wei", amount.to_string()}}, day_->ledger()),
                    {}};
  });

  add(GET, "/api/events", false, std::nullopt, [this](Context& c) {
    const auto after = query_int(c.request, "after").value_or(0);
    const auto limit = query_int(c.request, "limit").value_or(options_.max_page_size);
    if (after < 0) bad_request("after must be >= 0", {{"field", "after"}});
    if (limit < 1 || limit > options_.max_page_size) {
      bad_request(fmt::format("limit must be in 1-{}", options_.max_page_size), {{"field", "limit"}});
    }
    const auto kind = query_str(c.request, "kind");
    json items = json::array();
    const auto& log = day_->ledger().events();
    auto it = std::upper_bound(log.begin(), log.end(), static_cast<std::uint64_t>(after),
                               [](std::uint64_t s, const ledger::LedgerEvent& e) { return s < e.seq; });
    std::uint64_t last = static_cast<std::uint64_t>(after);
    bool more = false;
    for (; it != log.end(); ++it) {
      if (kind && it->kind() != *kind) continue;
      if (static_cast<std::int64_t>(items.size()) == limit) {
        more = true;
        break;
      }
      items.push_back(ledger::to_json(*it));
      last = it->seq;
    }
    return Response{200,
                    {{"items", items},
                     {"count", items.size()},
                     {"last_seq", day_->ledger().last_seq()},
                     {"next_after", more ? json(last) : json(nullptr)}},
                    {}};
  });

  add(GET, "/api/events/:seq", false, std::nullopt, [this](Context& c) {
    const auto& s = c.params["seq"];
    std::uint64_t seq = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seq);
    const auto& log = day_->ledger().events();
    if (ec != std::errc() || p != s.data() + s.size()) bad_request("seq must be an integer");
    auto it = std::lower_bound(log.begin(), log.end(), seq,
                               [](const ledger::LedgerEvent& e, std::uint64_t v) { return e.seq < v; });
    if (it == log.end() || it->seq != seq) {
      throw ApiError{404, "NoSuchEvent", fmt::format("no event with seq {}", seq)};
    }
    return Response{200, ledger::to_json(*it), {}};
  });
}

// ---------------------------------------------------------------------------

Server::Server(Service& service, std::optional<std::filesystem::path> assets_dir)
    : service_(service), http_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) r.headers.emplace(k, v);
    r.body = req.body;
    const auto out = service_.handle(r);
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body.dump(), "application/json");
  };
  http_->set_tcp_nodelay(true);
  http_->Get(R"(/api/.*)", forward);
  http_->Post(R"(/api/.*)", forward);
  http_->Put(R"(/api/.*)", forward);
  http_->Delete(R"(/api/.*)", forward);
  if (assets_dir) {
    if (!std::filesystem::is_directory(*assets_dir)) {
      throw std::invalid_argument(fmt::format("assets directory {} not found", assets_dir->string()));
    }
    http_->set_mount_point("/", assets_dir->string());
  }
}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
  return bound;
}

void Server::listen() { http_->listen_after_bind(); }

void Server::stop() { http_->stop(); }

}  // namespace solarchain::api
