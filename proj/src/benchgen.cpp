#include "solarchain/benchgen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "solarchain/report.hpp"
#include "solarchain/rng.hpp"
#include "solarchain/units.hpp"

namespace solarchain::benchgen {

using nlohmann::json;
using physics::AnomalyClass;
using physics::NodeSpec;
using rng::fnv1a;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool ordered(const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; }

double uniform(rng::Stream& s, const Range& r) { return s.uniform(r.lo, r.hi); }

CalendarDate uniform_date(rng::Stream& s, const CalendarDate& from, const CalendarDate& to) {
  const auto a = from.to_sys_days().time_since_epoch().count();
  const auto b = to.to_sys_days().time_since_epoch().count();
  const auto d = static_cast<std::int64_t>(
      s.uniform_int(0, static_cast<std::uint64_t>(b - a)));
  return CalendarDate::from_sys_days(std::chrono::sys_days{std::chrono::days{a + d}});
}

}  // namespace

std::vector<CityProfile> BenchmarkConfig::default_cities() {
  return {
      {"Beijing", "BEI", 39.9042, 116.4074, 0.70, 0.08, 10.50, 23.50},
      {"Shanghai", "SHA", 31.2304, 121.4737, 0.80, 0.08, 15.00, 24.00},
      {"Chengdu", "CHE", 30.5728, 104.0668, 0.40, 0.08, 16.00, 25.00},
      {"Shenzhen", "SHE", 22.5431, 114.0579, 0.50, 0.08, 21.00, 27.00},
      {"Hangzhou", "HAN", 30.2741, 120.1551, 0.80, 0.08, 14.00, 25.50},
  };
}

void BenchmarkConfig::validate() const {
  require(!cities.empty(), "at least one city is required");
  std::set<std::string> names, codes;
  for (const auto& c : cities) {
    require(!c.name.empty() && names.insert(c.name).second,
            fmt::format("city name '{}' is empty or duplicated", c.name));
    require(!c.code.empty() && codes.insert(c.code).second,
            fmt::format("city code '{}' is empty or duplicated", c.code));
    require(c.latitude >= -90 && c.latitude <= 90 && c.longitude >= -180 && c.longitude <= 180,
            fmt::format("city '{}' has invalid coordinates", c.name));
    require(c.cloud_mean >= 0 && c.cloud_mean <= 1 && c.cloud_sd >= 0,
            fmt::format("city '{}': cloud_mean must be in [0, 1], cloud_sd >= 0", c.name));
    require(c.temp_min_c <= c.temp_max_c, fmt::format("city '{}': temp_min_c > temp_max_c", c.name));
  }
  require(nodes_per_city >= 1 && nodes_per_city <= 999, "nodes_per_city must be in [1, 999]");
  require(anomalies.night_time >= 0 && anomalies.above_bound >= 0 && anomalies.corrupted >= 0,
          "anomaly counts must be >= 0");
  require(max_anomaly_fraction >= 0 && max_anomaly_fraction <= 1,
          "max_anomaly_fraction must be in [0, 1]");
  require(anomalies.total() <= max_anomaly_fraction * record_count() + 1e-9,
          fmt::format("anomaly plan ({}) exceeds {:.1f}% of {} records", anomalies.total(),
                      max_anomaly_fraction * 100, record_count()));
  require(node_jitter_deg >= 0, "node_jitter_deg must be >= 0");
  for (const auto* r : {&panel_area_m2, &efficiency, &temp_coefficient, &air_temp_c,
                        &night_report_w, &corrupted_negative_w}) {
    require(ordered(*r), "ranges must satisfy lo <= hi");
  }
  if (latitude_envelope) require(ordered(*latitude_envelope), "latitude_envelope lo > hi");
  if (longitude_envelope) require(ordered(*longitude_envelope), "longitude_envelope lo > hi");
  require(panel_area_m2.lo >= 1 && panel_area_m2.hi <= 500, "panel_area_m2 must lie in [1, 500]");
  require(efficiency.lo > 0 && efficiency.hi < 0.35, "efficiency must lie in (0, 0.35)");
  require(temp_coefficient.lo >= -0.01 && temp_coefficient.hi < 0,
          "temp_coefficient must lie in [-0.01, 0)");
  require(install_from.to_sys_days() <= install_to.to_sys_days(), "install_from > install_to");
  require(honest_ratio_mean > 0 && honest_ratio_sd >= 0, "honest ratio parameters invalid");
  require(irradiance_jitter_min > 0 && irradiance_jitter_min <= 1,
          "irradiance_jitter_min must be in (0, 1]");
  require(night_report_w.lo > 0, "night reports must be positive");
  require(corrupted_negative_w.lo > 0, "corrupted_negative_w magnitudes must be positive");
  require(above_bound_max_factor > 0 && above_bound_min_pmax_w >= 0,
          "above-bound parameters invalid");
  require(trades.first_hour >= 0 && trades.first_hour <= trades.last_hour &&
              trades.last_hour <= 23,
          "trade window must satisfy 0 <= first <= last <= 23");
  require(trades.per_hour >= 0 && trades.per_hour <= 60, "trades per hour must be in [0, 60]");
  require(trades.min_wh >= 1 && trades.min_wh <= trades.max_wh, "trade size range invalid");
  market.validate();
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  require(j.is_object(), fmt::format("{} must be an object", where));
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    require(ok, fmt::format("unknown key '{}' in {}", k, where));
  }
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

void read_range(const json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  require(a.is_array() && a.size() == 2, fmt::format("'{}' must be a [lo, hi] pair", key));
  r = {a[0].get<double>(), a[1].get<double>()};
}

void read_envelope(const json& j, const char* key, std::optional<Range>& r) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    r.reset();
    return;
  }
  Range v;
  read_range(j, key, v);
  r = v;
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const BenchmarkConfig& c) {
  json cities = json::array();
  for (const auto& p : c.cities) {
    cities.push_back({{"name", p.name},
                      {"code", p.code},
                      {"latitude", p.latitude},
                      {"longitude", p.longitude},
                      {"cloud_mean", p.cloud_mean},
                      {"cloud_sd", p.cloud_sd},
                      {"temp_min_c", p.temp_min_c},
                      {"temp_max_c", p.temp_max_c}});
  }
  json factories = json::array();
  for (const auto& f : c.market.factories) {
    factories.push_back({{"factory_id", f.factory_id},
                         {"city", f.city},
                         {"latitude", f.latitude},
                         {"longitude", f.longitude},
                         {"power_consumption", f.power_consumption}});
  }
  return {
      {"seed", c.seed},
      {"date", c.market.date.to_string()},
      {"utc_offset", format_utc_offset(c.market.utc_offset_minutes)},
      {"tau", c.market.tau},
      {"nodes_per_city", c.nodes_per_city},
      {"cities", cities},
      {"anomalies",
       {{"night_time", c.anomalies.night_time},
        {"above_bound", c.anomalies.above_bound},
        {"corrupted", c.anomalies.corrupted}}},
      {"max_anomaly_fraction", c.max_anomaly_fraction},
      {"generation",
       {{"node_jitter_deg", c.node_jitter_deg},
        {"latitude_envelope", c.latitude_envelope ? range_json(*c.latitude_envelope) : json(nullptr)},
        {"longitude_envelope",
         c.longitude_envelope ? range_json(*c.longitude_envelope) : json(nullptr)},
        {"panel_area_m2", range_json(c.panel_area_m2)},
        {"efficiency", range_json(c.efficiency)},
        {"temp_coefficient", range_json(c.temp_coefficient)},
        {"install_from", c.install_from.to_string()},
        {"install_to", c.install_to.to_string()},
        {"air_temp_c", range_json(c.air_temp_c)},
        {"honest_ratio_mean", c.honest_ratio_mean},
        {"honest_ratio_sd", c.honest_ratio_sd},
        {"irradiance_jitter_min", c.irradiance_jitter_min},
        {"night_report_w", range_json(c.night_report_w)},
        {"above_bound_max_factor", c.above_bound_max_factor},
        {"above_bound_min_pmax_w", c.above_bound_min_pmax_w},
        {"corrupted_negative_w", range_json(c.corrupted_negative_w)}}},
      {"bound",
       {{"t_ref_c", c.bound.t_ref_c},
        {"temperature_mode", std::string(physics::to_string(c.bound.temperature_mode))},
        {"irradiance_mode", std::string(physics::to_string(c.bound.irradiance_mode))},
        {"solar_constant_wm2", c.bound.solar_constant_wm2},
        {"atmospheric_transmittance", c.bound.atmospheric_transmittance}}},
      {"ledger", ledger::config_to_json(c.market.ledger)},
      {"liquidity", analytics::to_json(c.market.liquidity)},
      {"factories", factories},
      {"genesis_tokens_per_factory", c.market.genesis_tokens_per_factory},
      {"trades",
       {{"first_hour", c.trades.first_hour},
        {"last_hour", c.trades.last_hour},
        {"per_hour", c.trades.per_hour},
        {"min_wh", c.trades.min_wh},
        {"max_wh", c.trades.max_wh}}},
  };
}

BenchmarkConfig config_from_json(const json& j) {
  BenchmarkConfig c;
  try {
    reject_unknown(j,
                   {"seed", "date", "utc_offset", "tau", "nodes_per_city", "cities", "anomalies",
                    "max_anomaly_fraction", "generation", "bound", "ledger", "liquidity",
                    "factories", "genesis_tokens_per_factory", "trades"},
                   "config");
    read(j, "seed", c.seed);
    if (j.contains("date")) c.market.date = CalendarDate::parse(j.at("date").get<std::string>());
    if (j.contains("utc_offset")) {
      c.market.utc_offset_minutes = parse_utc_offset(j.at("utc_offset").get<std::string>());
    }
    read(j, "tau", c.market.tau);
    read(j, "nodes_per_city", c.nodes_per_city);
    read(j, "max_anomaly_fraction", c.max_anomaly_fraction);
    read(j, "genesis_tokens_per_factory", c.market.genesis_tokens_per_factory);
    if (j.contains("cities")) {
      c.cities.clear();
      for (const auto& p : j.at("cities")) {
        reject_unknown(p,
                       {"name", "code", "latitude", "longitude", "cloud_mean", "cloud_sd",
                        "temp_min_c", "temp_max_c"},
                       "cities[]");
        CityProfile cp;
        cp.name = p.at("name").get<std::string>();
        cp.code = p.value("code", cp.name.substr(0, 3));
        std::transform(cp.code.begin(), cp.code.end(), cp.code.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
        cp.latitude = p.at("latitude").get<double>();
        cp.longitude = p.at("longitude").get<double>();
        read(p, "cloud_mean", cp.cloud_mean);
        read(p, "cloud_sd", cp.cloud_sd);
        read(p, "temp_min_c", cp.temp_min_c);
        read(p, "temp_max_c", cp.temp_max_c);
        c.cities.push_back(cp);
      }
    }
    if (j.contains("anomalies")) {
      const auto& a = j.at("anomalies");
      reject_unknown(a, {"night_time", "above_bound", "corrupted"}, "anomalies");
      read(a, "night_time", c.anomalies.night_time);
      read(a, "above_bound", c.anomalies.above_bound);
      read(a, "corrupted", c.anomalies.corrupted);
    }
    if (j.contains("generation")) {
      const auto& g = j.at("generation");
      reject_unknown(g,
                     {"node_jitter_deg", "latitude_envelope", "longitude_envelope",
                      "panel_area_m2", "efficiency", "temp_coefficient", "install_from",
                      "install_to", "air_temp_c", "honest_ratio_mean", "honest_ratio_sd",
                      "irradiance_jitter_min", "night_report_w", "above_bound_max_factor",
                      "above_bound_min_pmax_w", "corrupted_negative_w"},
                     "generation");
      read(g, "node_jitter_deg", c.node_jitter_deg);
      read_envelope(g, "latitude_envelope", c.latitude_envelope);
      read_envelope(g, "longitude_envelope", c.longitude_envelope);
      read_range(g, "panel_area_m2", c.panel_area_m2);
      read_range(g, "efficiency", c.efficiency);
      read_range(g, "temp_coefficient", c.temp_coefficient);
      if (g.contains("install_from")) {
        c.install_from = CalendarDate::parse(g.at("install_from").get<std::string>());
      }
      if (g.contains("install_to")) {
        c.install_to = CalendarDate::parse(g.at("install_to").get<std::string>());
      }
      read_range(g, "air_temp_c", c.air_temp_c);
      read(g, "honest_ratio_mean", c.honest_ratio_mean);
      read(g, "honest_ratio_sd", c.honest_ratio_sd);
      read(g, "irradiance_jitter_min", c.irradiance_jitter_min);
      read_range(g, "night_report_w", c.night_report_w);
      read(g, "above_bound_max_factor", c.above_bound_max_factor);
      read(g, "above_bound_min_pmax_w", c.above_bound_min_pmax_w);
      read_range(g, "corrupted_negative_w", c.corrupted_negative_w);
    }
    if (j.contains("bound")) {
      const auto& b = j.at("bound");
      reject_unknown(b,
                     {"t_ref_c", "temperature_mode", "irradiance_mode", "solar_constant_wm2",
                      "atmospheric_transmittance"},
                     "bound");
      read(b, "t_ref_c", c.bound.t_ref_c);
      if (b.contains("temperature_mode")) {
        c.bound.temperature_mode =
            physics::parse_temperature_mode(b.at("temperature_mode").get<std::string>());
      }
      if (b.contains("irradiance_mode")) {
        c.bound.irradiance_mode =
            physics::parse_irradiance_mode(b.at("irradiance_mode").get<std::string>());
      }
      read(b, "solar_constant_wm2", c.bound.solar_constant_wm2);
      read(b, "atmospheric_transmittance", c.bound.atmospheric_transmittance);
    }
    if (j.contains("ledger")) c.market.ledger = ledger::config_from_json(j.at("ledger"));
    if (j.contains("liquidity")) {
      c.market.liquidity = analytics::liquidity_config_from_json(j.at("liquidity"));
    }
    if (j.contains("factories")) {
      c.market.factories.clear();
      for (const auto& f : j.at("factories")) {
        reject_unknown(f, {"factory_id", "city", "latitude", "longitude", "power_consumption"},
                       "factories[]");
        c.market.factories.push_back({f.at("factory_id").get<std::string>(),
                                      f.at("city").get<std::string>(),
                                      f.at("latitude").get<double>(),
                                      f.at("longitude").get<double>(),
                                      f.at("power_consumption").get<ledger::EnergyUnits>()});
      }
    }
    if (j.contains("trades")) {
      const auto& t = j.at("trades");
      reject_unknown(t, {"first_hour", "last_hour", "per_hour", "min_wh", "max_wh"}, "trades");
      read(t, "first_hour", c.trades.first_hour);
      read(t, "last_hour", c.trades.last_hour);
      read(t, "per_hour", c.trades.per_hour);
      read(t, "min_wh", c.trades.min_wh);
      read(t, "max_wh", c.trades.max_wh);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("config: {}", e.what()));
  } catch (const ParseError& e) {
    throw std::invalid_argument(fmt::format("config: {}", e.what()));
  }
  c.validate();
  return c;
}

BenchmarkConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error(fmt::format("cannot open config {}", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("{}: {}", file.string(), e.what()));
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Generation

std::vector<NodeSpec> generate_nodes(const BenchmarkConfig& config) {
  config.validate();
  std::vector<NodeSpec> out;
  for (const auto& city : config.cities) {
    for (int i = 0; i < config.nodes_per_city; ++i) {
      rng::Stream s{config.seed, fnv1a("node"), fnv1a(city.name), static_cast<std::uint64_t>(i)};
      NodeSpec n;
      n.node_id = fmt::format("{}-{:03d}", city.code, i + 1);
      n.city = city.name;
      double lat = city.latitude + s.uniform(-config.node_jitter_deg, config.node_jitter_deg);
      double lon = city.longitude + s.uniform(-config.node_jitter_deg, config.node_jitter_deg);
      if (config.latitude_envelope) {
        lat = std::clamp(lat, config.latitude_envelope->lo, config.latitude_envelope->hi);
      }
      if (config.longitude_envelope) {
        lon = std::clamp(lon, config.longitude_envelope->lo, config.longitude_envelope->hi);
      }
      n.latitude = quantize(std::clamp(lat, -90.0, 90.0), 6);
      n.longitude = quantize(std::clamp(lon, -180.0, 180.0), 6);
      n.panel_area_m2 = quantize(uniform(s, config.panel_area_m2), 2);
      n.efficiency = quantize(uniform(s, config.efficiency), 4);
      n.temp_coefficient = quantize(uniform(s, config.temp_coefficient), 5);
      n.install_date = uniform_date(s, config.install_from, config.install_to);
      n.validate();
      out.push_back(std::move(n));
    }
  }
  return out;
}

namespace {

struct CityHour {
  double cloud = 1.0;
  double temp_c = 20.0;
};

std::vector<CityHour> city_weather(const BenchmarkConfig& config, const CityProfile& city) {
  std::vector<CityHour> out(24);
  const double mid = (city.temp_min_c + city.temp_max_c) / 2.0;
  const double amp = (city.temp_max_c - city.temp_min_c) / 2.0;
  for (int h = 0; h < 24; ++h) {
    rng::Stream s{config.seed, fnv1a("weather"), fnv1a(city.name), static_cast<std::uint64_t>(h)};
    out[h].cloud = std::clamp(s.normal(city.cloud_mean, city.cloud_sd), 0.05, 1.0);
    double t = mid + amp * std::cos(2.0 * std::numbers::pi * (h - 15) / 24.0) + s.normal(0.0, 0.3);
    t = std::clamp(t, city.temp_min_c, city.temp_max_c);
    t = std::clamp(t, config.air_temp_c.lo, config.air_temp_c.hi);
    out[h].temp_c = quantize(t, 2);
  }
  return out;
}

std::uint64_t priority(const BenchmarkConfig& c, std::string_view cls, const GenerationRecord& r) {
  return rng::key_hash({c.seed, fnv1a("anomaly"), fnv1a(cls), fnv1a(r.node_id),
                        static_cast<std::uint64_t>(r.hour)});
}

}  // namespace

GeneratedDay generate_generation(const BenchmarkConfig& config, const std::vector<NodeSpec>& nodes) {
  config.validate();
  const double tau = config.market.tau;
  GeneratedDay day;

  std::map<std::string, std::vector<CityHour>> weather;
  for (const auto& c : config.cities) weather[c.name] = city_weather(config, c);

  for (int h = 0; h < 24; ++h) {
    const Timestamp ts = config.market.hour_start(h);
    for (const auto& n : nodes) {
      auto wit = weather.find(n.city);
      if (wit == weather.end()) {
        throw std::invalid_argument(fmt::format("node {} has unknown city {}", n.node_id, n.city));
      }
      const auto& cw = wit->second;
      double day_min = cw[0].temp_c;
      for (const auto& x : cw) day_min = std::min(day_min, x.temp_c);

      rng::Stream s{config.seed, fnv1a("irradiance"), fnv1a(n.node_id), static_cast<std::uint64_t>(h)};
      const double elev = physics::solar_elevation(n.latitude, n.longitude, ts);
      const double clear = physics::clear_sky_irradiance(elev, config.bound.solar_constant_wm2,
                                                         config.bound.atmospheric_transmittance);
      const double jitter = s.uniform(config.irradiance_jitter_min, 1.0);

      GenerationRecord r;
      r.timestamp = ts;
      r.hour = h;
      r.node_id = n.node_id;
      r.city = n.city;
      r.latitude = n.latitude;
      r.longitude = n.longitude;
      r.irradiance_wm2 = quantize(clear * cw[h].cloud * jitter, 2);
      r.air_temp_c = cw[h].temp_c;
      const physics::WeatherSample w{ts, r.irradiance_wm2, r.air_temp_c, day_min};
      r.p_max_w = quantize(physics::compute_p_max(n, w, config.bound).p_max_w, 2);

      rng::Stream rs{config.seed, fnv1a("ratio"), fnv1a(n.node_id), static_cast<std::uint64_t>(h)};
      const double ratio =
          rs.truncated_normal(config.honest_ratio_mean, config.honest_ratio_sd, 0.0, 1.0);
      r.p_reported_w = r.p_max_w > 0.0 ? quantize(r.p_max_w * ratio, 2) : 0.0;
      day.records.push_back(std::move(r));
      day.injected.push_back(AnomalyClass::none);
    }
  }

  // Place each class on its eligible records with the lowest keyed priority,
  // so placement is independent of record order.
  auto place = [&](AnomalyClass cls, int count, auto eligible) {
    if (count == 0) return std::vector<std::size_t>{};
    std::vector<std::pair<std::uint64_t, std::size_t>> cand;
    for (std::size_t i = 0; i < day.records.size(); ++i) {
      if (day.injected[i] == AnomalyClass::none && eligible(day.records[i])) {
        cand.emplace_back(priority(config, physics::to_string(cls), day.records[i]), i);
      }
    }
    if (cand.size() < static_cast<std::size_t>(count)) {
      throw InfeasiblePlan(fmt::format("{} {} injections requested but only {} eligible records",
                                       count, physics::to_string(cls), cand.size()));
    }
    std::partial_sort(cand.begin(), cand.begin() + count, cand.end());
    std::vector<std::size_t> chosen;
    for (int k = 0; k < count; ++k) {
      chosen.push_back(cand[k].second);
      day.injected[cand[k].second] = cls;
    }
    return chosen;
  };

  if (config.anomalies.above_bound > 0 && tau >= config.above_bound_max_factor) {
    throw InfeasiblePlan(fmt::format("tau {} leaves no room below the above-bound ceiling {}", tau,
                                     config.above_bound_max_factor));
  }

  auto inject_stream = [&](const GenerationRecord& r) {
    return rng::Stream{config.seed, fnv1a("inject"), fnv1a(r.node_id),
                       static_cast<std::uint64_t>(r.hour)};
  };

  for (auto i : place(AnomalyClass::night_time, config.anomalies.night_time,
                      [](const GenerationRecord& r) { return r.p_max_w == 0.0; })) {
    auto s = inject_stream(day.records[i]);
    day.records[i].p_reported_w = quantize(uniform(s, config.night_report_w), 2);
  }
  for (auto i : place(AnomalyClass::above_bound, config.anomalies.above_bound,
                      [&](const GenerationRecord& r) {
                        return r.p_max_w > 0.0 && r.p_max_w >= config.above_bound_min_pmax_w;
                      })) {
    auto& r = day.records[i];
    auto s = inject_stream(r);
    const double f = tau + (config.above_bound_max_factor - tau) * (1.0 - s.uniform01());
    r.p_reported_w = quantize(r.p_max_w * f, 2);
    // Rounding must not pull the report back under the bound.
    while (physics::verify_record(r.p_reported_w, r.p_max_w, tau).verified()) {
      r.p_reported_w = quantize(r.p_reported_w + 0.01, 2);
    }
  }
  const auto corrupted = place(AnomalyClass::corrupted, config.anomalies.corrupted,
                               [](const GenerationRecord& r) { return r.p_max_w > 0.0; });
  for (std::size_t k = 0; k < corrupted.size(); ++k) {
    auto& r = day.records[corrupted[k]];
    auto s = inject_stream(r);
    r.p_reported_w = k % 2 == 0 ? std::nan("") : -quantize(uniform(s, config.corrupted_negative_w), 2);
  }

  // The stored status is always the verifier's own output.
  for (std::size_t i = 0; i < day.records.size(); ++i) {
    auto& r = day.records[i];
    r.fdia_detected = day.injected[i] != AnomalyClass::none;
    r.verification_status = physics::verify_record(r.p_reported_w, r.p_max_w, tau).status;
  }
  return day;
}

// ---------------------------------------------------------------------------
// Pipeline

void schedule_trades(MarketDay& market, const BenchmarkConfig& config, int hour) {
  const auto& plan = config.trades;
  const auto& factories = config.market.factories;
  if (hour < plan.first_hour || hour > plan.last_hour || factories.empty()) return;
  ledger::EnergyUnits total_demand = 0;
  for (const auto& f : factories) total_demand += f.power_consumption;

  for (int k = 0; k < plan.per_hour; ++k) {
    rng::Stream s{config.seed, fnv1a("trade"), static_cast<std::uint64_t>(hour),
                  static_cast<std::uint64_t>(k)};
    std::size_t pick = 0;
    if (total_demand > 0) {
      auto x = s.uniform_int(0, total_demand - 1);
      while (x >= factories[pick].power_consumption) x -= factories[pick++].power_consumption;
    } else {
      pick = static_cast<std::size_t>(s.uniform_int(0, factories.size() - 1));
    }
    const auto& f = factories[pick];
    std::uint64_t wh = s.uniform_int(plan.min_wh, plan.max_wh);

    const auto& led = market.ledger();
    const auto owner = market.factory_owner(f.factory_id);
    const std::uint64_t pool_wh = led.state().exchange.global_supply_energy / units::kUnitsPerWh;
    const Wei spendable = std::min(led.balance_of(owner),
                                   led.allowance(owner, config.market.ledger.exchange_account));
    const auto affordable_wh =
        static_cast<std::uint64_t>(spendable.raw() / ledger::Ledger::cost_wei_for(100).raw());
    // Leave room for the rest of this hour's draws.
    const std::uint64_t share_wh = pool_wh / static_cast<std::uint64_t>(plan.per_hour - k);
    wh = std::min({wh, share_wh, affordable_wh});
    if (wh < plan.min_wh) continue;
    market.buy(f.factory_id, wh * units::kUnitsPerWh, hour, k * 60 / std::max(plan.per_hour, 1));
  }
}

PipelineResult run_pipeline(const BenchmarkConfig& config,
                            const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  PipelineResult res;
  res.dataset.nodes = generate_nodes(config);
  auto day = generate_generation(config, res.dataset.nodes);
  res.dataset.records = std::move(day.records);

  res.market = std::make_unique<MarketDay>(res.dataset.nodes, res.dataset.records, config.market);
  for (int h = 0; h < 24; ++h) {
    res.market->apply_hour(h);
    schedule_trades(*res.market, config, h);
  }
  res.dataset.market = res.market->market_hours();
  res.dataset.trades = res.market->trades();
  res.metrics = report::build_report(*res.market);
  res.metrics["seed"] = config.seed;

  if (out_dir) {
    write_dataset(*out_dir, res.dataset);
    auto write_text = [&](const char* name, const std::string& text) {
      std::ofstream out(*out_dir / name, std::ios::binary);
      out << text;
      if (!out) throw std::runtime_error(fmt::format("write failed for {}", name));
    };
    write_text(kMetricsFile, res.metrics.dump(2) + "\n");
    write_text(kConfigFile, to_json(config).dump(2) + "\n");
    std::ofstream ev(*out_dir / kEventLogFile, std::ios::binary);
    ledger::write_event_log(ev, res.market->ledger().events());
    if (!ev) throw std::runtime_error("write failed for event log");
  }
  return res;
}

}  // namespace solarchain::benchgen
