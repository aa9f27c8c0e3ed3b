#include "solarchain/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace solarchain::physics {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require(bool ok, std::string_view what) {
  if (!ok) throw std::invalid_argument(std::string(what));
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void NodeSpec::validate() const {
  require(!node_id.empty(), "node_id must not be empty");
  require(finite(latitude) && latitude >= -90.0 && latitude <= 90.0,
          "latitude must lie in [-90, 90]");
  require(finite(longitude) && longitude >= -180.0 && longitude <= 180.0,
          "longitude must lie in [-180, 180]");
  require(finite(panel_area_m2) && panel_area_m2 >= 1.0 && panel_area_m2 <= 500.0,
          "panel_area_m2 must lie in [1, 500]");
  require(finite(efficiency) && efficiency > 0.0 && efficiency < 0.35,
          "efficiency must lie in (0, 0.35)");
  require(finite(temp_coefficient) && temp_coefficient >= -0.01 && temp_coefficient < 0.0,
          "temp_coefficient must lie in [-0.01, 0)");
}

void WeatherSample::validate() const {
  require(finite(irradiance_wm2) && irradiance_wm2 >= 0.0 && irradiance_wm2 <= 1400.0,
          "irradiance must lie in [0, 1400] W/m2");
  require(finite(air_temp_c), "air temperature must be finite");
  require(finite(daily_min_temp_c), "daily minimum temperature must be finite");
  require(daily_min_temp_c <= air_temp_c, "daily minimum temperature exceeds air temperature");
}

std::string_view to_string(VerificationStatus s) {
  return s == VerificationStatus::verified ? "verified" : "rejected";
}

std::string_view to_string(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::none: return "none";
    case AnomalyClass::night_time: return "night_time";
    case AnomalyClass::above_bound: return "above_bound";
    case AnomalyClass::corrupted: return "corrupted";
  }
  return "none";
}

std::string_view to_string(TemperatureMode m) {
  return m == TemperatureMode::daily_min ? "daily_min" : "hourly";
}

std::string_view to_string(IrradianceMode m) {
  switch (m) {
    case IrradianceMode::observed: return "observed";
    case IrradianceMode::clear_sky: return "clear_sky";
    case IrradianceMode::max_of_both: return "max_of_both";
  }
  return "observed";
}

VerificationStatus parse_status(std::string_view s) {
  if (s == "verified") return VerificationStatus::verified;
  if (s == "rejected") return VerificationStatus::rejected;
  throw std::invalid_argument(fmt::format("unknown verification status '{}'", s));
}

AnomalyClass parse_anomaly_class(std::string_view s) {
  for (auto c : {AnomalyClass::none, AnomalyClass::night_time, AnomalyClass::above_bound,
                 AnomalyClass::corrupted}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument(fmt::format("unknown anomaly class '{}'", s));
}

TemperatureMode parse_temperature_mode(std::string_view s) {
  if (s == "daily_min") return TemperatureMode::daily_min;
  if (s == "hourly") return TemperatureMode::hourly;
  throw std::invalid_argument(fmt::format("unknown temperature mode '{}'", s));
}

IrradianceMode parse_irradiance_mode(std::string_view s) {
  for (auto m : {IrradianceMode::observed, IrradianceMode::clear_sky,
                 IrradianceMode::max_of_both}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument(fmt::format("unknown irradiance mode '{}'", s));
}

double solar_elevation(double latitude_deg, double longitude_deg, const Timestamp& t) {
  // Declination and equation of time from the NOAA low-precision ephemeris
  // (Julian-century mean elements), then a plain hour-angle geometry.
  const double jd = static_cast<double>(t.utc_seconds()) / 86400.0 + 2440587.5;
  const double jc = (jd - 2451545.0) / 36525.0;

  const double l0 = std::fmod(280.46646 + jc * (36000.76983 + jc * 0.0003032), 360.0);
  const double m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
  const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
  const double mr = m * kDegToRad;
  const double center = std::sin(mr) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                        std::sin(2 * mr) * (0.019993 - 0.000101 * jc) + std::sin(3 * mr) * 0.000289;
  const double omega = (125.04 - 1934.136 * jc) * kDegToRad;
  const double app_lon = (l0 + center - 0.00569 - 0.00478 * std::sin(omega)) * kDegToRad;
  const double obliq_mean =
      23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
  const double obliq = (obliq_mean + 0.00256 * std::cos(omega)) * kDegToRad;
  const double decl = std::asin(std::sin(obliq) * std::sin(app_lon));

  const double y = std::pow(std::tan(obliq / 2), 2);
  const double l0r = l0 * kDegToRad;
  const double eqtime_min =
      4.0 / kDegToRad *
      (y * std::sin(2 * l0r) - 2 * ecc * std::sin(mr) + 4 * ecc * y * std::sin(mr) * std::cos(2 * l0r) -
       0.5 * y * y * std::sin(4 * l0r) - 1.25 * ecc * ecc * std::sin(2 * mr));

  const double true_solar_min = t.utc_hour() * 60.0 + eqtime_min + 4.0 * longitude_deg;
  const double hour_angle = (true_solar_min / 4.0 - 180.0) * kDegToRad;
  const double lat = latitude_deg * kDegToRad;

  double cos_zenith = std::sin(lat) * std::sin(decl) +
                      std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
  cos_zenith = std::clamp(cos_zenith, -1.0, 1.0);
  return 90.0 - std::acos(cos_zenith) / kDegToRad;
}

double clear_sky_irradiance(double elevation_deg, double solar_constant_wm2,
                            double transmittance) {
  if (!(elevation_deg > 0.0)) return 0.0;
  return solar_constant_wm2 * transmittance * std::sin(elevation_deg * kDegToRad);
}

PowerBound compute_p_max(const NodeSpec& spec, const WeatherSample& weather,
                         const BoundConfig& config) {
  require(finite(spec.panel_area_m2) && finite(spec.efficiency) &&
              finite(spec.temp_coefficient) && finite(spec.latitude) &&
              finite(spec.longitude),
          "node parameters must be finite");
  require(finite(weather.irradiance_wm2) && finite(weather.air_temp_c) &&
              finite(weather.daily_min_temp_c),
          "weather inputs must be finite");
  require(finite(config.t_ref_c), "reference temperature must be finite");
  require(spec.panel_area_m2 > 0.0 && spec.efficiency > 0.0, "area and efficiency must be > 0");
  require(weather.irradiance_wm2 >= 0.0, "irradiance must be non-negative");

  PowerBound b;
  switch (config.irradiance_mode) {
    case IrradianceMode::observed:
      b.g_used_wm2 = weather.irradiance_wm2;
      break;
    case IrradianceMode::clear_sky:
    case IrradianceMode::max_of_both: {
      const double elev = solar_elevation(spec.latitude, spec.longitude, weather.timestamp);
      const double ceiling = clear_sky_irradiance(elev, config.solar_constant_wm2,
                                                  config.atmospheric_transmittance);
      b.g_used_wm2 = config.irradiance_mode == IrradianceMode::clear_sky
                         ? ceiling
                         : std::max(ceiling, weather.irradiance_wm2);
      break;
    }
  }
  b.t_used_c = config.temperature_mode == TemperatureMode::daily_min ? weather.daily_min_temp_c
                                                                     : weather.air_temp_c;
  b.thermal_factor =
      std::max(0.0, 1.0 + std::fabs(spec.temp_coefficient) * (config.t_ref_c - b.t_used_c));
  b.p_max_w = b.g_used_wm2 == 0.0
                  ? 0.0
                  : spec.panel_area_m2 * spec.efficiency * b.g_used_wm2 * b.thermal_factor;
  return b;
}

Verdict verify_record(double p_reported_w, const PowerBound& bound, double tau) {
  return verify_record(p_reported_w, bound.p_max_w, tau);
}

Verdict verify_record(double p_reported_w, double p_max_w, double tau) {
  require(tau > 0.0 && tau <= 2.0, "tau must lie in (0, 2]");
  Verdict v;
  v.residual_w = p_max_w - p_reported_w;
  if (p_max_w > 0.0) v.ratio = p_reported_w / p_max_w;

  if (!std::isfinite(p_reported_w) || p_reported_w < 0.0 || !std::isfinite(p_max_w) ||
      p_max_w < 0.0) {
    v.status = VerificationStatus::rejected;
    v.anomaly_class = AnomalyClass::corrupted;
  } else if (p_max_w == 0.0 && p_reported_w > 0.0) {
    v.status = VerificationStatus::rejected;
    v.anomaly_class = AnomalyClass::night_time;
  } else if (p_reported_w > tau * p_max_w) {
    v.status = VerificationStatus::rejected;
    v.anomaly_class = AnomalyClass::above_bound;
  }
  return v;
}

ResidualStats residual_stats(std::span<const ResidualPair> pairs) {
  std::size_t n = 0;
  double sum_x = 0, sum_y = 0, sum_ratio = 0, sum_abs = 0, sum_sq = 0;
  for (const auto& p : pairs) {
    if (!(p.p_max_w > 0.0)) continue;
    ++n;
    sum_x += p.p_reported_w;
    sum_y += p.p_max_w;
    sum_ratio += p.p_reported_w / p.p_max_w;
    const double r = p.p_max_w - p.p_reported_w;
    sum_abs += std::fabs(r);
    sum_sq += r * r;
  }
  if (n < 2) {
    throw InsufficientData(
        fmt::format("residual statistics need at least 2 records with p_max > 0, got {}", n));
  }
  const double nd = static_cast<double>(n);
  ResidualStats s;
  s.count = n;
  s.mean_ratio = sum_ratio / nd;
  s.mae_w = sum_abs / nd;
  s.rmse_w = std::sqrt(sum_sq / nd);

  // Second pass with centred sums for numerical stability.
  const double mx = sum_x / nd, my = sum_y / nd;
  double sxx = 0, syy = 0, sxy = 0, sr = 0;
  for (const auto& p : pairs) {
    if (!(p.p_max_w > 0.0)) continue;
    const double dx = p.p_reported_w - mx, dy = p.p_max_w - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
    const double dr = p.p_reported_w / p.p_max_w - s.mean_ratio;
    sr += dr * dr;
  }
  s.ratio_std = std::sqrt(sr / (nd - 1.0));
  s.pearson_r = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy)
                                         : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace solarchain::physics
