#include "solarchain/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace solarchain::analytics {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Wei wei_add(Wei a, Wei b) {
  auto r = a.checked_add(b);
  if (!r) throw std::overflow_error("wei total overflows");
  return *r;
}

}  // namespace

void LiquidityConfig::validate() const {
  require(finite_nonneg(floor_solarchain_mw), "floor_solarchain_mw must be >= 0");
  require(finite_nonneg(floor_baseline_mw), "floor_baseline_mw must be >= 0");
  require(liquidity_share > 0.0 && liquidity_share <= 1.0, "liquidity_share must be in (0, 1]");
  require(voluntary_fraction >= 0.0 && voluntary_fraction <= 1.0,
          "voluntary_fraction must be in [0, 1]");
  require(std::isfinite(reference_trade_mw) && reference_trade_mw > 0.0,
          "reference_trade_mw must be > 0");
  require(daylight_first_hour >= 0 && daylight_first_hour <= daylight_last_hour &&
              daylight_last_hour <= 23,
          "daylight window must satisfy 0 <= first <= last <= 23");
}

double slippage_pct(double pool_depth_mw, double trade_size_mw) {
  require(finite_nonneg(pool_depth_mw), "pool depth must be finite and >= 0");
  require(finite_nonneg(trade_size_mw), "trade size must be finite and >= 0");
  if (trade_size_mw == 0.0) return 0.0;
  if (pool_depth_mw == 0.0) return 100.0;  // empty pool
  return trade_size_mw / (pool_depth_mw + trade_size_mw) * 100.0;
}

std::vector<MarketHour> liquidity_series(std::span<const double> hourly_verified_mw,
                                         const Timestamp& day_start,
                                         const LiquidityConfig& config) {
  config.validate();
  std::vector<MarketHour> out;
  out.reserve(hourly_verified_mw.size());
  for (std::size_t h = 0; h < hourly_verified_mw.size(); ++h) {
    const double v = hourly_verified_mw[h];
    require(finite_nonneg(v), "hourly verified supply must be finite and >= 0");
    MarketHour m;
    m.timestamp = day_start.plus_seconds(static_cast<std::int64_t>(h) * 3600);
    m.hour = static_cast<int>(h % 24);
    m.total_verified_mw = v;
    m.solarchain_liquidity_mw = config.floor_solarchain_mw + config.liquidity_share * v;
    m.baseline_liquidity_mw = config.floor_baseline_mw + config.voluntary_fraction * v;
    m.slippage_solarchain_pct = slippage_pct(m.solarchain_liquidity_mw, config.reference_trade_mw);
    m.slippage_baseline_pct = slippage_pct(m.baseline_liquidity_mw, config.reference_trade_mw);
    out.push_back(m);
  }
  return out;
}

double liquidity_area_mwh(std::span<const double> liquidity_mw) {
  double s = 0.0;
  for (double v : liquidity_mw) s += v;
  return s;
}

double inflation_prevented_pct(double rejected_kwh, double verified_kwh) {
  require(finite_nonneg(rejected_kwh), "rejected energy must be finite and >= 0");
  require(std::isfinite(verified_kwh) && verified_kwh > 0.0, "verified energy must be > 0");
  return rejected_kwh / verified_kwh * 100.0;
}

double capacity_factor_pct(double capacity_kw, double verified_kwh, double horizon_h) {
  require(std::isfinite(capacity_kw) && capacity_kw > 0.0, "capacity must be > 0");
  require(std::isfinite(horizon_h) && horizon_h > 0.0, "horizon must be > 0");
  require(finite_nonneg(verified_kwh), "verified energy must be finite and >= 0");
  return verified_kwh / (capacity_kw * horizon_h) * 100.0;
}

double exergy_of_trade_mj(double energy_mwh, double quality_factor) {
  require(finite_nonneg(energy_mwh), "energy must be finite and >= 0");
  require(quality_factor > 0.0 && quality_factor <= 1.0, "quality factor must be in (0, 1]");
  return energy_mwh * 3600.0 * quality_factor;
}

LiquiditySummary summarize_liquidity(std::span<const MarketHour> series,
                                     const LiquidityConfig& config) {
  LiquiditySummary s;
  s.hours = static_cast<int>(series.size());
  if (series.empty()) return s;
  std::vector<double> sc, bl, slip_sc, slip_bl;
  for (const auto& h : series) {
    sc.push_back(h.solarchain_liquidity_mw);
    bl.push_back(h.baseline_liquidity_mw);
    if (h.hour >= config.daylight_first_hour && h.hour <= config.daylight_last_hour) {
      slip_sc.push_back(h.slippage_solarchain_pct);
      slip_bl.push_back(h.slippage_baseline_pct);
    }
    if (h.slippage_solarchain_pct < h.slippage_baseline_pct) ++s.hours_solarchain_below_baseline;
  }
  s.mean_solarchain_mw = mean(sc);
  s.mean_baseline_mw = mean(bl);
  s.uplift_pct = s.mean_baseline_mw > 0.0
                     ? (s.mean_solarchain_mw / s.mean_baseline_mw - 1.0) * 100.0
                     : std::nan("");
  s.area_solarchain_mwh = liquidity_area_mwh(sc);
  s.area_baseline_mwh = liquidity_area_mwh(bl);
  s.mean_slippage_solarchain_pct = mean(slip_sc);
  s.mean_slippage_baseline_pct = mean(slip_bl);
  s.slippage_at_mean_solarchain_pct = slippage_pct(s.mean_solarchain_mw, config.reference_trade_mw);
  s.slippage_at_mean_baseline_pct = slippage_pct(s.mean_baseline_mw, config.reference_trade_mw);
  return s;
}

std::vector<CityStats> city_stats(std::span<const physics::NodeSpec> nodes,
                                  std::span<const GenerationRecord> records, double horizon_h) {
  std::vector<CityStats> out;
  std::map<std::string, std::size_t> idx;
  auto slot = [&](const std::string& city) -> CityStats& {
    auto [it, fresh] = idx.try_emplace(city, out.size());
    if (fresh) out.push_back(CityStats{city});
    return out[it->second];
  };
  for (const auto& n : nodes) {
    auto& c = slot(n.city);
    ++c.nodes;
    c.capacity_kw += n.panel_area_m2 * n.efficiency;  // kW at 1000 W/m^2
  }
  std::map<std::pair<std::string, int>, double> hourly_w;
  for (const auto& r : records) {
    auto& c = slot(r.city);
    if (r.verified()) {
      c.verified_kwh += r.p_reported_w / 1000.0;
      hourly_w[{r.city, r.hour}] += r.p_reported_w;
    } else if (finite_nonneg(r.p_reported_w)) {
      c.rejected_kwh += r.p_reported_w / 1000.0;
    }
  }
  for (const auto& [key, w] : hourly_w) {
    auto& c = out[idx.at(key.first)];
    c.peak_power_kw = std::max(c.peak_power_kw, w / 1000.0);
  }
  for (auto& c : out) {
    c.capacity_factor_pct =
        c.capacity_kw > 0.0 ? capacity_factor_pct(c.capacity_kw, c.verified_kwh, horizon_h) : 0.0;
  }
  return out;
}

SettlementReport settlement_report(std::span<const TradeRow> trades,
                                   std::span<const ledger::LedgerEvent> events) {
  SettlementReport rep;
  std::map<std::string, SettlementLine> per_city;
  for (const auto& t : trades) {
    for (SettlementLine* line : {&per_city[t.city], &rep.totals}) {
      ++line->trades;
      line->volume_mwh += t.energy_mwh();
      line->burned = wei_add(line->burned, t.tokens_burned);
      line->exergy_mj += t.exergy_mj;
    }
  }
  rep.cities.assign(per_city.begin(), per_city.end());

  auto flag = [&](std::string msg) {
    rep.reconciled = false;
    rep.discrepancies.push_back(std::move(msg));
  };

  std::vector<const ledger::events::EnergyPurchased*> purchases;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto* p = std::get_if<ledger::events::EnergyPurchased>(&events[i].payload);
    if (!p) continue;
    purchases.push_back(p);
    const auto* burn = i > 0 ? std::get_if<ledger::events::Burned>(&events[i - 1].payload) : nullptr;
    if (!burn || burn->account != p->buyer || burn->amount != p->cost_wei) {
      flag(fmt::format("event {}: purchase not preceded by a matching burn", events[i].seq));
      continue;
    }
    rep.ledger_purchase_burn = wei_add(rep.ledger_purchase_burn, burn->amount);
  }

  if (purchases.size() != trades.size()) {
    flag(fmt::format("{} trades but {} purchase events", trades.size(), purchases.size()));
  }
  const std::size_t n = std::min(purchases.size(), trades.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (trades[i].energy_units != purchases[i]->energy) {
      flag(fmt::format("{}: energy {} units != ledger {}", trades[i].trade_id,
                       trades[i].energy_units, purchases[i]->energy));
    }
    if (trades[i].tokens_burned != purchases[i]->cost_wei) {
      flag(fmt::format("{}: burned {} wei != ledger {}", trades[i].trade_id,
                       trades[i].tokens_burned.to_string(), purchases[i]->cost_wei.to_string()));
    }
  }
  if (rep.totals.burned != rep.ledger_purchase_burn) {
    flag(fmt::format("total burned {} wei != ledger purchase burns {}",
                     rep.totals.burned.to_string(), rep.ledger_purchase_burn.to_string()));
  }
  return rep;
}

nlohmann::json to_json(const LiquiditySummary& s) {
  return {{"mean_SolarChain_liquidity_MW", s.mean_solarchain_mw},
          {"mean_baseline_liquidity_MW", s.mean_baseline_mw},
          {"uplift_pct", s.uplift_pct},
          {"area_SolarChain_MWh", s.area_solarchain_mwh},
          {"area_baseline_MWh", s.area_baseline_mwh},
          {"mean_slippage_SolarChain_pct", s.mean_slippage_solarchain_pct},
          {"mean_slippage_baseline_pct", s.mean_slippage_baseline_pct},
          {"slippage_at_mean_SolarChain_pct", s.slippage_at_mean_solarchain_pct},
          {"slippage_at_mean_baseline_pct", s.slippage_at_mean_baseline_pct},
          {"hours_SolarChain_slippage_below_baseline", s.hours_solarchain_below_baseline},
          {"hours", s.hours}};
}

nlohmann::json to_json(const CityStats& s) {
  return {{"city", s.city},
          {"nodes", s.nodes},
          {"capacity_kW", s.capacity_kw},
          {"verified_kWh", s.verified_kwh},
          {"rejected_kWh", s.rejected_kwh},
          {"peak_power_kW", s.peak_power_kw},
          {"capacity_factor_pct", s.capacity_factor_pct}};
}

namespace {
nlohmann::json line_json(const SettlementLine& l) {
  return {{"trades", l.trades},
          {"volume_MWh", l.volume_mwh},
          {"tokens_burned", l.burned.to_token_string()},
          {"tokens_burned_wei", l.burned.to_string()},
          {"exergy_dissipated_MJ", l.exergy_mj}};
}
}  // namespace

nlohmann::json to_json(const SettlementReport& r) {
  nlohmann::json cities = nlohmann::json::array();
  for (const auto& [city, line] : r.cities) {
    auto j = line_json(line);
    j["city"] = city;
    cities.push_back(j);
  }
  return {{"cities", cities},
          {"totals", line_json(r.totals)},
          {"ledger_purchase_burn_wei", r.ledger_purchase_burn.to_string()},
          {"reconciled", r.reconciled},
          {"discrepancies", r.discrepancies}};
}

nlohmann::json to_json(const LiquidityConfig& c) {
  return {{"floor_solarchain_mw", c.floor_solarchain_mw},
          {"floor_baseline_mw", c.floor_baseline_mw},
          {"liquidity_share", c.liquidity_share},
          {"voluntary_fraction", c.voluntary_fraction},
          {"reference_trade_mw", c.reference_trade_mw},
          {"daylight_first_hour", c.daylight_first_hour},
          {"daylight_last_hour", c.daylight_last_hour}};
}

LiquidityConfig liquidity_config_from_json(const nlohmann::json& j) {
  LiquidityConfig c;
  c.floor_solarchain_mw = j.value("floor_solarchain_mw", c.floor_solarchain_mw);
  c.floor_baseline_mw = j.value("floor_baseline_mw", c.floor_baseline_mw);
  c.liquidity_share = j.value("liquidity_share", c.liquidity_share);
  c.voluntary_fraction = j.value("voluntary_fraction", c.voluntary_fraction);
  c.reference_trade_mw = j.value("reference_trade_mw", c.reference_trade_mw);
  c.daylight_first_hour = j.value("daylight_first_hour", c.daylight_first_hour);
  c.daylight_last_hour = j.value("daylight_last_hour", c.daylight_last_hour);
  c.validate();
  return c;
}

}  // namespace solarchain::analytics
