#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "solarchain/dataset.hpp"
#include "solarchain/market_day.hpp"
#include "solarchain/physics.hpp"

namespace solarchain::benchgen {

/// City-level weather: per-hour cloud transmission ~ N(cloud_mean, cloud_sd)
/// clamped to [0.05, 1], and a cosine diurnal temperature between the given
/// extremes peaking at 15:00 local.
struct CityProfile {
  std::string name;
  std::string code;  // node id prefix, e.g. BEI
  double latitude = 0.0;
  double longitude = 0.0;
  double cloud_mean = 0.7;
  double cloud_sd = 0.08;
  double temp_min_c = 15.0;
  double temp_max_c = 25.0;
};

struct AnomalyPlan {
  int night_time = 28;
  int above_bound = 26;
  int corrupted = 6;
  int total() const { return night_time + above_bound + corrupted; }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TradePlan {
  int first_hour = 6;
  int last_hour = 19;
  int per_hour = 3;
  std::uint64_t min_wh = 326;
  std::uint64_t max_wh = 37'502;
};

/// Thrown when the anomaly plan cannot be placed on the generated day.
class InfeasiblePlan : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchmarkConfig {
  std::uint64_t seed = 42;
  std::vector<CityProfile> cities = default_cities();
  int nodes_per_city = 10;
  AnomalyPlan anomalies;
  double max_anomaly_fraction = 0.05;

  double node_jitter_deg = 0.08;
  std::optional<Range> latitude_envelope = Range{22.465945, 39.982854};
  std::optional<Range> longitude_envelope = Range{104.022990, 121.522048};
  Range panel_area_m2{18.43, 63.57};
  Range efficiency{0.1768, 0.2234};
  Range temp_coefficient{-0.00460, -0.00326};
  CalendarDate install_from{2020, 1, 9};
  CalendarDate install_to{2024, 5, 10};
  Range air_temp_c{9.10, 27.00};

  double honest_ratio_mean = 0.978;
  double honest_ratio_sd = 0.014;
  double irradiance_jitter_min = 0.96;  // per-node factor in [min, 1]
  Range night_report_w{40.0, 600.0};
  double above_bound_max_factor = 1.65;
  double above_bound_min_pmax_w = 900.0;  // only meaningful outputs are inflated
  Range corrupted_negative_w{10.0, 500.0};

  physics::BoundConfig bound;
  MarketConfig market;  // date, offset, tau, ledger, liquidity, factories
  TradePlan trades;

  static std::vector<CityProfile> default_cities();
  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
  int record_count() const { return static_cast<int>(cities.size()) * nodes_per_city * 24; }
};

nlohmann::json to_json(const BenchmarkConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
BenchmarkConfig config_from_json(const nlohmann::json& j);
BenchmarkConfig load_config(const std::filesystem::path& file);

std::vector<physics::NodeSpec> generate_nodes(const BenchmarkConfig& config);

/// Injection class per record, parallel to the generated records. Kept out
/// of the CSV; the CSV carries only the boolean label.
struct GeneratedDay {
  std::vector<GenerationRecord> records;
  std::vector<physics::AnomalyClass> injected;
};

GeneratedDay generate_generation(const BenchmarkConfig& config,
                                 const std::vector<physics::NodeSpec>& nodes);

struct PipelineResult {
  Dataset dataset;
  std::unique_ptr<MarketDay> market;
  nlohmann::json metrics;
};

/// generate -> verify -> 24 market steps with scheduled purchases ->
/// analytics. When `out_dir` is set, writes the four CSVs, metrics.json,
/// ledger_events.ndjson and the effective config.
PipelineResult run_pipeline(const BenchmarkConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Purchases for one hour: `per_hour` draws, factory chosen in proportion to
/// demand, energy uniform in whole Wh and capped by an even share of what is
/// left in the pool. Draws that would fall below the minimum size are skipped.
void schedule_trades(MarketDay& market, const BenchmarkConfig& config, int hour);

inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kEventLogFile = "ledger_events.ndjson";
inline constexpr const char* kConfigFile = "benchmark_config.json";

}  // namespace solarchain::benchgen
