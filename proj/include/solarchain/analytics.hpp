#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "solarchain/dataset.hpp"
#include "solarchain/ledger.hpp"

namespace solarchain::analytics {

struct LiquidityConfig {
  double floor_solarchain_mw = 0.018;
  double floor_baseline_mw = 0.008;
  double liquidity_share = 0.75;
  // Share of verified supply a no-split market would still offer voluntarily.
  double voluntary_fraction = 0.50;
  // Fixed order size used to price slippage; reproduces 1.91% at 0.0957 MW.
  double reference_trade_mw = 0.00186346212661841;
  int daylight_first_hour = 6;
  int daylight_last_hour = 19;

  void validate() const;
};

/// One row per hour: verified supply, both pool depths, and the price impact
/// of the reference trade against each.
std::vector<MarketHour> liquidity_series(std::span<const double> hourly_verified_mw,
                                         const Timestamp& day_start,
                                         const LiquidityConfig& config = {});

/// Constant-product price impact q / (L + q) in percent. A positive trade
/// against an empty pool reports 100%. Throws std::invalid_argument on
/// negative or non-finite inputs.
double slippage_pct(double pool_depth_mw, double trade_size_mw);

/// Rectangle rule with 1 h steps.
double liquidity_area_mwh(std::span<const double> liquidity_mw);

double inflation_prevented_pct(double rejected_kwh, double verified_kwh);
double capacity_factor_pct(double capacity_kw, double verified_kwh, double horizon_h);
double exergy_of_trade_mj(double energy_mwh, double quality_factor);

struct LiquiditySummary {
  double mean_solarchain_mw = 0.0;
  double mean_baseline_mw = 0.0;
  double uplift_pct = 0.0;
  double area_solarchain_mwh = 0.0;
  double area_baseline_mwh = 0.0;
  // Mean of hourly slippage over the daylight window.
  double mean_slippage_solarchain_pct = 0.0;
  double mean_slippage_baseline_pct = 0.0;
  // Slippage of the reference trade against the mean pool depth.
  double slippage_at_mean_solarchain_pct = 0.0;
  double slippage_at_mean_baseline_pct = 0.0;
  int hours_solarchain_below_baseline = 0;  // hours with strictly lower slippage
  int hours = 0;
};

LiquiditySummary summarize_liquidity(std::span<const MarketHour> series,
                                     const LiquidityConfig& config = {});

struct CityStats {
  std::string city;
  int nodes = 0;
  double capacity_kw = 0.0;      // sum of area * efficiency at 1 kW/m^2
  double verified_kwh = 0.0;
  double rejected_kwh = 0.0;     // finite, non-negative rejected reports
  double peak_power_kw = 0.0;    // highest hourly verified city total
  double capacity_factor_pct = 0.0;
};

/// Cities in first-appearance order of `nodes`.
std::vector<CityStats> city_stats(std::span<const physics::NodeSpec> nodes,
                                  std::span<const GenerationRecord> records,
                                  double horizon_h = 24.0);

struct SettlementLine {
  int trades = 0;
  double volume_mwh = 0.0;
  Wei burned;
  double exergy_mj = 0.0;
};

struct SettlementReport {
  std::vector<std::pair<std::string, SettlementLine>> cities;  // sorted by city
  SettlementLine totals;
  Wei ledger_purchase_burn;    // sum of EnergyPurchased.cost_wei
  bool reconciled = true;
  std::vector<std::string> discrepancies;
};

/// Aggregates trades per city and cross-checks them, in order, against the
/// EnergyPurchased events in the log: same energy, same wei cost, and equal
/// grand totals.
SettlementReport settlement_report(std::span<const TradeRow> trades,
                                   std::span<const ledger::LedgerEvent> events);

nlohmann::json to_json(const LiquiditySummary& s);
nlohmann::json to_json(const CityStats& s);
nlohmann::json to_json(const SettlementReport& r);
nlohmann::json to_json(const LiquidityConfig& c);
LiquidityConfig liquidity_config_from_json(const nlohmann::json& j);

}  // namespace solarchain::analytics
