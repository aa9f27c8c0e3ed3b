#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "solarchain/ledger.hpp"

namespace solarchain::ledger {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Wei wei_field(const json& j, const char* key) { return Wei::parse(j.at(key).get<std::string>()); }

json panel_json(const PanelRecord& p) {
  return {{"panel_id", p.panel_id},     {"owner", p.owner},
          {"latitude", p.latitude},     {"longitude", p.longitude},
          {"battery_temp_c", p.battery_temp_c}, {"dc_power_w", p.dc_power_w},
          {"ac_power_w", p.ac_power_w}, {"created_at", p.created_at.to_iso()}};
}

PanelRecord panel_from(const json& j) {
  return {j.at("panel_id").get<std::uint64_t>(),
          j.at("owner").get<std::string>(),
          j.at("latitude").get<double>(),
          j.at("longitude").get<double>(),
          j.at("battery_temp_c").get<double>(),
          j.at("dc_power_w").get<std::uint64_t>(),
          j.at("ac_power_w").get<std::uint64_t>(),
          Timestamp::parse(j.at("created_at").get<std::string>())};
}

json factory_json(const FactoryRecord& f) {
  return {{"factory_id", f.factory_id},
          {"owner", f.owner},
          {"latitude", f.latitude},
          {"longitude", f.longitude},
          {"power_consumption", f.power_consumption},
          {"energy_balance", f.energy_balance}};
}

FactoryRecord factory_from(const json& j) {
  return {j.at("factory_id").get<std::uint64_t>(),       j.at("owner").get<std::string>(),
          j.at("latitude").get<double>(),                j.at("longitude").get<double>(),
          j.at("power_consumption").get<std::uint64_t>(), j.at("energy_balance").get<std::uint64_t>()};
}

}  // namespace

json payload_to_json(const EventPayload& payload) {
  return std::visit(
      overloaded{
          [](const events::Minted& e) -> json {
            return {{"to", e.to}, {"amount_wei", e.amount.to_string()}};
          },
          [](const events::Burned& e) -> json {
            return {{"account", e.account},
                    {"spender", e.spender},
                    {"amount_wei", e.amount.to_string()}};
          },
          [](const events::Approval& e) -> json {
            return {{"owner", e.owner},
                    {"spender", e.spender},
                    {"amount_wei", e.amount.to_string()}};
          },
          [](const events::Transferred& e) -> json {
            return {{"from", e.from}, {"to", e.to}, {"amount_wei", e.amount.to_string()}};
          },
          [](const events::PanelCreated& e) -> json { return panel_json(e.panel); },
          [](const events::FactoryCreated& e) -> json { return factory_json(e.factory); },
          [](const events::MarketStep& e) -> json {
            json entries = json::array();
            for (const auto& en : e.entries) {
              entries.push_back({{"owner", en.owner},
                                 {"user_energy", en.user_energy},
                                 {"reward_units", en.reward_units},
                                 {"reward_wei", en.reward_wei.to_string()}});
            }
            return {{"entries", entries},
                    {"total_energy", e.total_energy},
                    {"pool_delta", e.pool_delta},
                    {"demand", e.demand}};
          },
          [](const events::RewardClaimed& e) -> json {
            return {{"owner", e.owner},
                    {"amount_wei", e.amount.to_string()},
                    {"capacity_w", e.capacity_w}};
          },
          [](const events::EnergyPurchased& e) -> json {
            return {{"buyer", e.buyer},
                    {"factory_id", e.factory_id},
                    {"energy_units", e.energy},
                    {"cost_wei", e.cost_wei.to_string()},
                    {"exergy_dissipated_MJ", e.exergy_mj}};
          },
          [](const events::PanelListed& e) -> json {
            return {{"item_id", e.item_id},
                    {"panel_id", e.panel_id},
                    {"seller", e.seller},
                    {"ask_price_wei", e.ask_price.to_string()}};
          },
          [](const events::OfferPlaced& e) -> json {
            return {{"item_id", e.item_id},
                    {"buyer", e.buyer},
                    {"amount_wei", e.amount.to_string()}};
          },
          [](const events::SaleApproved& e) -> json {
            return {{"item_id", e.item_id},
                    {"panel_id", e.panel_id},
                    {"seller", e.seller},
                    {"buyer", e.buyer},
                    {"amount_wei", e.amount.to_string()}};
          },
          [](const events::ListingCancelled& e) -> json { return {{"item_id", e.item_id}}; },
      },
      payload);
}

json to_json(const LedgerEvent& event) {
  return {{"seq", event.seq},
          {"kind", std::string(event.kind())},
          {"payload", payload_to_json(event.payload)},
          {"ts", event.ts.to_iso()}};
}

LedgerEvent event_from_json(const json& j) {
  LedgerEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.ts = Timestamp::parse(j.at("ts").get<std::string>());
  const auto kind = j.at("kind").get<std::string>();
  const json& p = j.at("payload");
  if (kind == "Minted") {
    e.payload = events::Minted{p.at("to").get<std::string>(), wei_field(p, "amount_wei")};
  } else if (kind == "Burned") {
    e.payload = events::Burned{p.at("account").get<std::string>(),
                               p.at("spender").get<std::string>(), wei_field(p, "amount_wei")};
  } else if (kind == "Approval") {
    e.payload = events::Approval{p.at("owner").get<std::string>(),
                                 p.at("spender").get<std::string>(), wei_field(p, "amount_wei")};
  } else if (kind == "Transferred") {
    e.payload = events::Transferred{p.at("from").get<std::string>(),
                                    p.at("to").get<std::string>(), wei_field(p, "amount_wei")};
  } else if (kind == "PanelCreated") {
    e.payload = events::PanelCreated{panel_from(p)};
  } else if (kind == "FactoryCreated") {
    e.payload = events::FactoryCreated{factory_from(p)};
  } else if (kind == "MarketStep") {
    events::MarketStep s;
    for (const auto& en : p.at("entries")) {
      s.entries.push_back({en.at("owner").get<std::string>(),
                           en.at("user_energy").get<std::uint64_t>(),
                           en.at("reward_units").get<std::uint64_t>(),
                           wei_field(en, "reward_wei")});
    }
    s.total_energy = p.at("total_energy").get<std::uint64_t>();
    s.pool_delta = p.at("pool_delta").get<std::uint64_t>();
    s.demand = p.at("demand").get<std::uint64_t>();
    e.payload = std::move(s);
  } else if (kind == "RewardClaimed") {
    e.payload = events::RewardClaimed{p.at("owner").get<std::string>(),
                                      wei_field(p, "amount_wei"),
                                      p.at("capacity_w").get<std::uint64_t>()};
  } else if (kind == "EnergyPurchased") {
    e.payload = events::EnergyPurchased{
        p.at("buyer").get<std::string>(), p.at("factory_id").get<std::uint64_t>(),
        p.at("energy_units").get<std::uint64_t>(), wei_field(p, "cost_wei"),
        p.at("exergy_dissipated_MJ").get<double>()};
  } else if (kind == "PanelListed") {
    e.payload = events::PanelListed{p.at("item_id").get<std::uint64_t>(),
                                    p.at("panel_id").get<std::uint64_t>(),
                                    p.at("seller").get<std::string>(),
                                    wei_field(p, "ask_price_wei")};
  } else if (kind == "OfferPlaced") {
    e.payload = events::OfferPlaced{p.at("item_id").get<std::uint64_t>(),
                                    p.at("buyer").get<std::string>(),
                                    wei_field(p, "amount_wei")};
  } else if (kind == "SaleApproved") {
    e.payload = events::SaleApproved{
        p.at("item_id").get<std::uint64_t>(), p.at("panel_id").get<std::uint64_t>(),
        p.at("seller").get<std::string>(), p.at("buyer").get<std::string>(),
        wei_field(p, "amount_wei")};
  } else if (kind == "ListingCancelled") {
    e.payload = events::ListingCancelled{p.at("item_id").get<std::uint64_t>()};
  } else {
    throw std::invalid_argument(fmt::format("unknown event kind '{}'", kind));
  }
  return e;
}

json snapshot_json(const LedgerState& s) {
  json balances = json::object();
  for (const auto& [k, v] : s.token.balances) balances[k] = v.to_string();
  json allowances = json::array();
  for (const auto& [k, v] : s.token.allowances) {
    allowances.push_back({{"owner", k.first}, {"spender", k.second}, {"amount_wei", v.to_string()}});
  }
  json panels = json::array();
  for (const auto& p : s.panels) panels.push_back(panel_json(p));
  json factories = json::array();
  for (const auto& f : s.factories) factories.push_back(factory_json(f));
  json rewards = json::object();
  for (const auto& [k, v] : s.exchange.personal_reward_wei) rewards[k] = v.to_string();
  json last_claim = json::object();
  for (const auto& [k, v] : s.rewards.last_claim) last_claim[k] = v.to_iso();
  json listings = json::array();
  for (const auto& l : s.listings) {
    json offers = json::object();
    for (const auto& [k, v] : l.offers) offers[k] = v.to_string();
    listings.push_back({{"item_id", l.item_id},
                        {"panel_id", l.panel_id},
                        {"seller", l.seller},
                        {"ask_price_wei", l.ask_price.to_string()},
                        {"offers", offers},
                        {"status", std::string(to_string(l.status))}});
  }
  return {{"token",
           {{"balances", balances},
            {"allowances", allowances},
            {"total_supply_wei", s.token.total_supply.to_string()},
            {"cap_wei", s.token.cap.to_string()},
            {"cumulative_minted_wei", s.token.cumulative_minted.to_string()},
            {"cumulative_burned_wei", s.token.cumulative_burned.to_string()}}},
          {"panels", panels},
          {"factories", factories},
          {"exchange",
           {{"global_supply_energy", s.exchange.global_supply_energy},
            {"total_demand_energy", s.exchange.total_demand_energy},
            {"personal_reward_wei", rewards}}},
          {"rewards",
           {{"rate_wei_per_w", s.rewards.rate_wei_per_w.to_string()},
            {"cooldown_s", s.rewards.cooldown_s},
            {"last_claim", last_claim}}},
          {"listings", listings}};
}

json config_to_json(const LedgerConfig& c) {
  return {{"cap_wei", c.cap.to_string()},
          {"reward_rate_wei_per_w", c.reward_rate_wei_per_w.to_string()},
          {"reward_cooldown_s", c.reward_cooldown_s},
          {"exergy_quality_factor", c.exergy_quality_factor},
          {"exchange_account", c.exchange_account},
          {"shop_account", c.shop_account}};
}

LedgerConfig config_from_json(const json& j) {
  LedgerConfig c;
  if (j.contains("cap_wei")) c.cap = wei_field(j, "cap_wei");
  if (j.contains("reward_rate_wei_per_w")) {
    c.reward_rate_wei_per_w = wei_field(j, "reward_rate_wei_per_w");
  }
  c.reward_cooldown_s = j.value("reward_cooldown_s", c.reward_cooldown_s);
  c.exergy_quality_factor = j.value("exergy_quality_factor", c.exergy_quality_factor);
  c.exchange_account = j.value("exchange_account", c.exchange_account);
  c.shop_account = j.value("shop_account", c.shop_account);
  return c;
}

void write_event_log(std::ostream& out, std::span<const LedgerEvent> log) {
  for (const auto& e : log) out << to_json(e).dump() << '\n';
}

std::vector<LedgerEvent> read_event_log(std::istream& in) {
  std::vector<LedgerEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(fmt::format("event log line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

}  // namespace solarchain::ledger
