#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "solarchain/ledger.hpp"
#include "solarchain/physics.hpp"
#include "solarchain/time.hpp"
#include "solarchain/wei.hpp"

namespace solarchain {

/// One node-hour observation plus the verifier's verdict.
struct GenerationRecord {
  Timestamp timestamp;
  int hour = 0;
  std::string node_id;
  std::string city;
  double latitude = 0.0;
  double longitude = 0.0;
  double irradiance_wm2 = 0.0;
  double air_temp_c = 0.0;
  double p_max_w = 0.0;
  double p_reported_w = 0.0;
  bool fdia_detected = false;  // injection label
  physics::VerificationStatus verification_status = physics::VerificationStatus::verified;

  bool verified() const { return verification_status == physics::VerificationStatus::verified; }
  /// Full verdict (class, residual, ratio) recomputed from the stored bound.
  physics::Verdict verdict(double tau = physics::kDefaultTau) const;
};

struct MarketHour {
  Timestamp timestamp;
  int hour = 0;
  double total_verified_mw = 0.0;
  double solarchain_liquidity_mw = 0.0;
  double baseline_liquidity_mw = 0.0;
  double slippage_solarchain_pct = 0.0;
  double slippage_baseline_pct = 0.0;
};

struct TradeRow {
  std::string trade_id;  // TRD-0001
  Timestamp timestamp;
  int hour = 0;
  std::string factory_id;  // FAC-SH-01
  std::string city;
  ledger::EnergyUnits energy_units = 0;
  Wei tokens_burned;
  double exergy_mj = 0.0;

  double energy_mwh() const { return static_cast<double>(energy_units) / 1e8; }
};

struct Dataset {
  std::vector<physics::NodeSpec> nodes;
  std::vector<GenerationRecord> records;
  std::vector<MarketHour> market;  // empty when the file is absent
  std::vector<TradeRow> trades;    // empty when the file is absent
};

inline constexpr const char* kNodesFile = "urban_energy_nodes.csv";
inline constexpr const char* kGenerationFile = "spatiotemporal_generation.csv";
inline constexpr const char* kMarketFile = "market_liquidity.csv";
inline constexpr const char* kTradesFile = "p2p_trades.csv";

/// A required column is missing or a row has the wrong number of fields.
class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writers use fixed decimals per column so identical inputs give identical
// bytes: coordinates 6, area 2, efficiency 4, temperature coefficient 5,
// W and degC 2, MW and MWh 6, percentages 4, tokens and MJ 4.
void write_nodes_csv(std::ostream& out, std::span<const physics::NodeSpec> nodes);
void write_generation_csv(std::ostream& out, std::span<const GenerationRecord> records);
void write_market_csv(std::ostream& out, std::span<const MarketHour> hours);
void write_trades_csv(std::ostream& out, std::span<const TradeRow> trades);

std::vector<physics::NodeSpec> read_nodes_csv(std::istream& in);
std::vector<GenerationRecord> read_generation_csv(std::istream& in);
std::vector<MarketHour> read_market_csv(std::istream& in);
std::vector<TradeRow> read_trades_csv(std::istream& in);

/// Loads the four CSVs from `dir`. Nodes and generation are required; market
/// and trades are optional. Errors name the file and 1-based line number.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

/// Rounds to `decimals` places the same way the writers print.
double quantize(double value, int decimals);

}  // namespace solarchain
