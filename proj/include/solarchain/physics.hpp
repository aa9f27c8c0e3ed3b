#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "solarchain/time.hpp"

namespace solarchain::physics {

/// Static registry entry for one PV asset.
struct NodeSpec {
  std::string node_id;
  std::string city;
  double latitude = 0.0;          // degrees
  double longitude = 0.0;         // degrees
  double panel_area_m2 = 0.0;
  double efficiency = 0.0;        // (0, 0.35)
  double temp_coefficient = 0.0;  // per degC, stored negative
  CalendarDate install_date;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

struct WeatherSample {
  Timestamp timestamp;
  double irradiance_wm2 = 0.0;
  double air_temp_c = 0.0;
  double daily_min_temp_c = 0.0;

  void validate() const;
};

enum class TemperatureMode { daily_min, hourly };
enum class IrradianceMode { observed, clear_sky, max_of_both };

struct BoundConfig {
  double t_ref_c = 25.0;
  TemperatureMode temperature_mode = TemperatureMode::daily_min;
  IrradianceMode irradiance_mode = IrradianceMode::observed;
  double solar_constant_wm2 = 1361.0;
  double atmospheric_transmittance = 0.75;
};

struct PowerBound {
  double p_max_w = 0.0;
  double g_used_wm2 = 0.0;
  double t_used_c = 0.0;
  double thermal_factor = 1.0;
};

enum class VerificationStatus { verified, rejected };
enum class AnomalyClass { none, night_time, above_bound, corrupted };

struct Verdict {
  VerificationStatus status = VerificationStatus::verified;
  AnomalyClass anomaly_class = AnomalyClass::none;
  double residual_w = 0.0;       // p_max - p_reported
  std::optional<double> ratio;   // p_reported / p_max, absent when p_max == 0

  bool verified() const { return status == VerificationStatus::verified; }
};

std::string_view to_string(VerificationStatus s);
std::string_view to_string(AnomalyClass c);
std::string_view to_string(TemperatureMode m);
std::string_view to_string(IrradianceMode m);
VerificationStatus parse_status(std::string_view s);
AnomalyClass parse_anomaly_class(std::string_view s);
TemperatureMode parse_temperature_mode(std::string_view s);
IrradianceMode parse_irradiance_mode(std::string_view s);

inline constexpr double kDefaultTau = 1.0;

/// Geometric solar elevation in degrees (no refraction).
///
/// Declination and equation of time come from the NOAA low-precision solar
/// ephemeris; agreement with SPA is within a few hundredths of a degree
/// between 1950 and 2050.
double solar_elevation(double latitude_deg, double longitude_deg, const Timestamp& t);

/// Clear-sky ceiling: S0 * k_atm * sin(elevation), 0 at or below the horizon.
double clear_sky_irradiance(double elevation_deg, double solar_constant_wm2 = 1361.0,
                            double transmittance = 0.75);

/// Thermodynamic power ceiling of one node under the given weather.
///
/// The thermal factor is 1 + |beta| * (T_ref - T_used), floored at 0, so cold
/// conditions raise the ceiling. Throws std::invalid_argument on non-finite or
/// out-of-range inputs.
PowerBound compute_p_max(const NodeSpec& spec, const WeatherSample& weather,
                         const BoundConfig& config = {});

/// Classifies one report against its bound. tau must lie in (0, 2].
Verdict verify_record(double p_reported_w, const PowerBound& bound, double tau = kDefaultTau);
Verdict verify_record(double p_reported_w, double p_max_w, double tau = kDefaultTau);

struct ResidualPair {
  double p_reported_w = 0.0;
  double p_max_w = 0.0;
};

struct ResidualStats {
  std::size_t count = 0;
  double pearson_r = 0.0;
  double mean_ratio = 0.0;
  double ratio_std = 0.0;  // sample standard deviation (n - 1)
  double mae_w = 0.0;
  double rmse_w = 0.0;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Agreement statistics between verified reports and their bounds.
///
/// Pairs with p_max <= 0 are skipped. Throws InsufficientData when fewer than
/// two pairs remain. pearson_r is NaN when either series has zero variance.
ResidualStats residual_stats(std::span<const ResidualPair> pairs);

}  // namespace solarchain::physics
