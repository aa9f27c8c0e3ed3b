#include "solarchain/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace solarchain::report {

using nlohmann::json;

double Confusion::precision() const {
  if (tp + fp == 0) return fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Confusion::recall() const {
  if (tp + fn == 0) return fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Confusion::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

VerificationSummary verify_records(std::span<const GenerationRecord> records, double tau) {
  VerificationSummary s;
  s.tau = tau;
  s.records = records.size();
  std::vector<physics::ResidualPair> pairs;
  for (const auto& r : records) {
    const auto v = r.verdict(tau);
    if (v.status != r.verification_status) ++s.stored_status_mismatches;
    const bool flagged = !v.verified();
    if (flagged) {
      ++s.rejected;
      ++s.rejected_by_class[std::string(physics::to_string(v.anomaly_class))];
      if (std::isfinite(r.p_reported_w) && r.p_reported_w >= 0.0) {
        s.rejected_kwh += r.p_reported_w / 1000.0;
      }
    } else {
      ++s.verified;
      s.verified_kwh += r.p_reported_w / 1000.0;
      pairs.push_back({r.p_reported_w, r.p_max_w});
    }
    auto& c = s.confusion;
    if (flagged && r.fdia_detected) ++c.tp;
    else if (flagged) ++c.fp;
    else if (r.fdia_detected) ++c.fn;
    else ++c.tn;
  }
  try {
    s.residuals = physics::residual_stats(pairs);
  } catch (const physics::InsufficientData&) {
  }
  return s;
}

BoundCheck recheck_bounds(const Dataset& data, const physics::BoundConfig& config) {
  BoundCheck out;
  std::map<std::string, const physics::NodeSpec*> by_id;
  for (const auto& n : data.nodes) by_id[n.node_id] = &n;
  std::map<std::string, double> day_min;
  for (const auto& r : data.records) {
    auto [it, fresh] = day_min.try_emplace(r.node_id, r.air_temp_c);
    if (!fresh) it->second = std::min(it->second, r.air_temp_c);
  }
  for (const auto& r : data.records) {
    auto it = by_id.find(r.node_id);
    if (it == by_id.end()) {
      ++out.unknown_nodes;
      continue;
    }
    physics::NodeSpec spec = *it->second;
    spec.latitude = r.latitude;
    spec.longitude = r.longitude;
    const physics::WeatherSample w{r.timestamp, r.irradiance_wm2, r.air_temp_c,
                                   day_min.at(r.node_id)};
    const double p = physics::compute_p_max(spec, w, config).p_max_w;
    out.max_abs_dev_w = std::max(out.max_abs_dev_w, std::fabs(p - r.p_max_w));
  }
  return out;
}

json to_json(const physics::ResidualStats& s) {
  return {{"count", s.count},   {"pearson_r", s.pearson_r}, {"mean_ratio", s.mean_ratio},
          {"ratio_std", s.ratio_std}, {"mae_W", s.mae_w}, {"rmse_W", s.rmse_w}};
}

json to_json(const VerificationSummary& v) {
  json by_class = json::object();
  for (const char* cls : {"night_time", "above_bound", "corrupted"}) by_class[cls] = 0;
  for (const auto& [k, n] : v.rejected_by_class) by_class[k] = n;
  return {{"tau", v.tau},
          {"records", v.records},
          {"verified", v.verified},
          {"rejected", v.rejected},
          {"confusion",
           {{"tp", v.confusion.tp}, {"fp", v.confusion.fp}, {"fn", v.confusion.fn},
            {"tn", v.confusion.tn}}},
          {"precision", v.confusion.precision()},
          {"recall", v.confusion.recall()},
          {"f1", v.confusion.f1()},
          {"rejected_by_class", by_class},
          {"stored_status_mismatches", v.stored_status_mismatches}};
}

json build_report(const MarketDay& day) {
  const auto& cfg = day.config();
  const auto ver = verify_records(day.records(), cfg.tau);
  const auto cities = analytics::city_stats(day.nodes(), day.records());
  const auto hours = day.market_hours();
  const auto liq = analytics::summarize_liquidity(hours, cfg.liquidity);
  const auto settlement = analytics::settlement_report(day.trades(), day.ledger().events());

  json j;
  j["counts"] = {{"nodes", day.nodes().size()},
                 {"records", day.records().size()},
                 {"verified", ver.verified},
                 {"rejected", ver.rejected},
                 {"trades", day.trades().size()},
                 {"market_hours", hours.size()},
                 {"ledger_events", day.ledger().events().size()}};
  j["verification"] = to_json(ver);
  j["residuals"] = ver.residuals ? to_json(*ver.residuals) : json(nullptr);
  j["energy"] = {{"verified_kWh", ver.verified_kwh},
                 {"rejected_kWh", ver.rejected_kwh},
                 {"inflation_prevented_pct",
                  ver.verified_kwh > 0.0
                      ? json(analytics::inflation_prevented_pct(ver.rejected_kwh, ver.verified_kwh))
                      : json(nullptr)}};
  j["cities"] = json::array();
  for (const auto& c : cities) j["cities"].push_back(analytics::to_json(c));

  json rows = json::array();
  for (const auto& h : hours) {
    rows.push_back({{"timestamp", h.timestamp.to_iso()},
                    {"hour", h.hour},
                    {"total_verified_MW", h.total_verified_mw},
                    {"SolarChain_liquidity_MW", h.solarchain_liquidity_mw},
                    {"baseline_liquidity_MW", h.baseline_liquidity_mw},
                    {"slippage_SolarChain_pct", h.slippage_solarchain_pct},
                    {"slippage_baseline_pct", h.slippage_baseline_pct}});
  }
  j["liquidity"] = analytics::to_json(liq);
  j["liquidity"]["hourly"] = rows;
  j["settlement"] = analytics::to_json(settlement);

  // Split accounting straight from the MarketStep events.
  std::uint64_t intake = 0, reward_units = 0, total_units = 0;
  for (const auto& e : day.ledger().events()) {
    if (const auto* s = std::get_if<ledger::events::MarketStep>(&e.payload)) {
      intake += s->pool_delta;
      total_units += s->total_energy;
      for (const auto& en : s->entries) reward_units += en.reward_units;
    }
  }
  const auto& tok = day.ledger().state().token;
  j["ledger"] = {{"total_supply_wei", tok.total_supply.to_string()},
                 {"cumulative_minted_wei", tok.cumulative_minted.to_string()},
                 {"cumulative_burned_wei", tok.cumulative_burned.to_string()},
                 {"pool_energy_units", day.ledger().state().exchange.global_supply_energy},
                 {"verified_energy_units", total_units},
                 {"pool_intake_units", intake},
                 {"reward_units", reward_units},
                 {"last_seq", day.ledger().last_seq()}};
  return j;
}

}  // namespace solarchain::report
