#include "solarchain/market_day.hpp"

#include <cmath>

#include <fmt/format.h>

namespace solarchain {

using ledger::EnergyUnits;

std::string_view to_string(MarketErrorCode c) {
  switch (c) {
    case MarketErrorCode::HourAlreadyApplied: return "HourAlreadyApplied";
    case MarketErrorCode::InvalidHour: return "InvalidHour";
    case MarketErrorCode::NoSuchRecord: return "NoSuchRecord";
    case MarketErrorCode::RecordRejected: return "RecordRejected";
    case MarketErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case MarketErrorCode::NoSuchFactory: return "NoSuchFactory";
    case MarketErrorCode::PipelineIncomplete: return "PipelineIncomplete";
  }
  return "?";
}

std::string factory_owner_account(const std::string& factory_id) {
  return "owner-" + factory_id;
}

std::vector<FactorySpec> MarketConfig::default_factories() {
  constexpr EnergyUnits kDemand = 2'000'000;  // 20 kWh per hour
  return {
      {"FAC-BJ-01", "Beijing", 39.9042, 116.4074, kDemand},
      {"FAC-SH-01", "Shanghai", 31.2304, 121.4737, kDemand},
      {"FAC-SH-02", "Shanghai", 31.2304, 121.4737, kDemand},
      {"FAC-CD-01", "Chengdu", 30.5728, 104.0668, kDemand},
      {"FAC-SZ-01", "Shenzhen", 22.5431, 114.0579, kDemand},
      {"FAC-HZ-01", "Hangzhou", 30.2741, 120.1551, kDemand},
  };
}

void MarketConfig::validate() const {
  if (!(tau > 0.0 && tau <= 2.0)) throw std::invalid_argument("tau must be in (0, 2]");
  if (utc_offset_minutes < -14 * 60 || utc_offset_minutes > 14 * 60) {
    throw std::invalid_argument("utc offset must be within +/-14:00");
  }
  liquidity.validate();
  std::set<std::string> ids;
  for (const auto& f : factories) {
    if (f.factory_id.empty() || !ids.insert(f.factory_id).second) {
      throw std::invalid_argument(fmt::format("factory id '{}' is empty or duplicated", f.factory_id));
    }
  }
}

Timestamp MarketConfig::hour_start(int hour) const {
  return Timestamp::from_local(date, hour, 0, 0, utc_offset_minutes);
}

MarketDay::MarketDay(std::vector<physics::NodeSpec> nodes, std::vector<GenerationRecord> records,
                     MarketConfig config)
    : config_(std::move(config)),
      nodes_(std::move(nodes)),
      records_(std::move(records)),
      ledger_(config_.ledger) {
  config_.validate();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    record_index_.emplace(std::make_pair(records_[i].node_id, records_[i].hour), i);
  }

  // Genesis: each factory owner is funded and pre-approves the exchange.
  ledger_.set_clock(config_.hour_start(0));
  const Wei funding = Wei::tokens(config_.genesis_tokens_per_factory);
  for (const auto& f : config_.factories) {
    const auto owner = factory_owner_account(f.factory_id);
    factory_ids_[f.factory_id] =
        ledger_.create_factory(owner, f.latitude, f.longitude, f.power_consumption);
    if (!funding.is_zero()) {
      ledger_.mint(owner, funding);
      ledger_.approve(owner, config_.ledger.exchange_account, funding);
    }
  }
}

std::string MarketDay::owner_of_node(const std::string& node_id) const {
  auto it = first_panel_of_node_.find(node_id);
  if (it != first_panel_of_node_.end()) return ledger_.panel(it->second).owner;
  return "owner-" + node_id;
}

std::uint64_t MarketDay::apply_hour(int hour) {
  if (hour < 0 || hour > 23) {
    throw MarketError(MarketErrorCode::InvalidHour, fmt::format("hour {} outside 0-23", hour));
  }
  if (applied_.count(hour)) {
    throw MarketError(MarketErrorCode::HourAlreadyApplied,
                      fmt::format("hour {} has already been applied", hour), {{"hour", hour}});
  }
  std::map<std::string, EnergyUnits> per_owner;
  EnergyUnits total = 0;
  for (const auto& r : records_) {
    if (r.hour != hour || !r.verified()) continue;
    // Reports carry two decimals of W; over one hour that is 0.01 Wh = 1 unit.
    const auto units = static_cast<EnergyUnits>(std::llround(r.p_reported_w * 100.0));
    if (units == 0) continue;
    per_owner[owner_of_node(r.node_id)] += units;
    total += units;
  }
  EnergyUnits demand = 0;
  for (const auto& f : config_.factories) demand += f.power_consumption;

  const std::vector<std::pair<ledger::AccountId, EnergyUnits>> entries(per_owner.begin(),
                                                                       per_owner.end());
  ledger_.set_clock(config_.hour_start(hour));
  ledger_.update_market_step(entries, total, demand);
  applied_.insert(hour);
  return ledger_.last_seq();
}

const FactorySpec& MarketDay::factory_spec(const std::string& factory_id) const {
  for (const auto& f : config_.factories) {
    if (f.factory_id == factory_id) return f;
  }
  throw MarketError(MarketErrorCode::NoSuchFactory,
                    fmt::format("no factory '{}' in the roster", factory_id));
}

std::uint64_t MarketDay::ledger_factory_id(const std::string& factory_id) const {
  factory_spec(factory_id);
  return factory_ids_.at(factory_id);
}

std::string MarketDay::factory_owner(const std::string& factory_id) const {
  return ledger_.factory(ledger_factory_id(factory_id)).owner;
}

TradeRow MarketDay::buy(const std::string& factory_id, EnergyUnits units, int hour, int minute) {
  const auto& spec = factory_spec(factory_id);
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59) {
    throw MarketError(MarketErrorCode::InvalidHour,
                      fmt::format("trade time {:02d}:{:02d} is invalid", hour, minute));
  }
  if (units == 0) {
    throw ledger::LedgerError(ledger::ErrorCode::InvalidAmount, "purchase of zero energy");
  }
  ledger_.set_clock(config_.hour_start(hour).plus_seconds(minute * 60));
  const auto receipt =
      ledger_.buy_energy_for_factory(factory_owner(factory_id), ledger_factory_id(factory_id), units);
  TradeRow t;
  t.trade_id = fmt::format("TRD-{:04d}", trades_.size() + 1);
  t.timestamp = ledger_.clock();
  t.hour = hour;
  t.factory_id = factory_id;
  t.city = spec.city;
  t.energy_units = receipt.energy;
  t.tokens_burned = receipt.cost_wei;
  t.exergy_mj = receipt.exergy_mj;
  trades_.push_back(t);
  return t;
}

std::optional<std::size_t> MarketDay::find_record(const std::string& node_id, int hour) const {
  auto it = record_index_.find({node_id, hour});
  if (it == record_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint64_t> MarketDay::panel_for_record(std::size_t record_index) const {
  auto it = registered_.find(record_index);
  if (it == registered_.end()) return std::nullopt;
  return it->second;
}

RegisteredPanel MarketDay::register_panel(const std::string& node_id, int hour,
                                          const std::optional<std::string>& owner) {
  const auto idx = find_record(node_id, hour);
  if (!idx) {
    throw MarketError(MarketErrorCode::NoSuchRecord,
                      fmt::format("no record for node {} at hour {}", node_id, hour),
                      {{"node_id", node_id}, {"hour", hour}});
  }
  const auto& r = records_[*idx];
  const auto verdict = r.verdict(config_.tau);
  if (!r.verified() || !verdict.verified()) {
    // Both the stored status and a fresh check must pass.
    const auto cls = verdict.verified() ? physics::AnomalyClass::none : verdict.anomaly_class;
    throw MarketError(MarketErrorCode::RecordRejected,
                      fmt::format("record {}@{} failed verification ({})", node_id, hour,
                                  physics::to_string(cls)),
                      {{"node_id", node_id},
                       {"hour", hour},
                       {"anomaly_class", std::string(physics::to_string(cls))}});
  }
  if (auto existing = panel_for_record(*idx)) {
    throw MarketError(MarketErrorCode::AlreadyRegistered,
                      fmt::format("record {}@{} is already panel {}", node_id, hour, *existing),
                      {{"panel_id", *existing}});
  }
  const std::string account = owner.value_or("owner-" + node_id);
  ledger_.set_clock(config_.hour_start(hour));
  const auto pid = ledger_.create_panel(account, r.latitude, r.longitude, r.air_temp_c,
                                        static_cast<std::uint64_t>(std::llround(r.p_max_w)),
                                        static_cast<std::uint64_t>(std::llround(r.p_reported_w)));
  registered_.emplace(*idx, pid);
  first_panel_of_node_.try_emplace(node_id, pid);
  return {pid, ledger_.last_seq()};
}

std::vector<double> MarketDay::hourly_verified_mw() const {
  std::vector<double> w(24, 0.0);
  for (const auto& r : records_) {
    if (r.verified() && r.hour >= 0 && r.hour < 24) w[r.hour] += r.p_reported_w;
  }
  for (auto& v : w) v /= 1e6;
  return w;
}

std::vector<MarketHour> MarketDay::market_hours() const {
  const auto all = analytics::liquidity_series(hourly_verified_mw(), config_.hour_start(0),
                                               config_.liquidity);
  std::vector<MarketHour> out;
  for (const auto& h : all) {
    if (applied_.count(h.hour)) out.push_back(h);
  }
  return out;
}

}  // namespace solarchain
