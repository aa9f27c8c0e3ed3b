#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "solarchain/analytics.hpp"
#include "solarchain/dataset.hpp"
#include "solarchain/ledger.hpp"

namespace solarchain {

struct FactorySpec {
  std::string factory_id;  // FAC-SH-01
  std::string city;
  double latitude = 0.0;
  double longitude = 0.0;
  ledger::EnergyUnits power_consumption = 0;  // units per hour
};

struct MarketConfig {
  CalendarDate date{2026, 5, 1};
  int utc_offset_minutes = 480;
  double tau = physics::kDefaultTau;
  ledger::LedgerConfig ledger;
  analytics::LiquidityConfig liquidity;
  std::vector<FactorySpec> factories = default_factories();
  std::uint64_t genesis_tokens_per_factory = 10'000;

  static std::vector<FactorySpec> default_factories();
  void validate() const;
  Timestamp hour_start(int hour) const;
};

enum class MarketErrorCode {
  HourAlreadyApplied,
  InvalidHour,
  NoSuchRecord,
  RecordRejected,
  AlreadyRegistered,
  NoSuchFactory,
  PipelineIncomplete,
};

std::string_view to_string(MarketErrorCode c);

class MarketError : public std::runtime_error {
 public:
  MarketError(MarketErrorCode code, const std::string& message, nlohmann::json details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}
  MarketErrorCode code() const { return code_; }
  const nlohmann::json& details() const { return details_; }

 private:
  MarketErrorCode code_;
  nlohmann::json details_;
};

struct RegisteredPanel {
  std::uint64_t panel_id = 0;
  std::uint64_t seq = 0;
};

/// One simulated market day on top of a verified dataset: a ledger seeded
/// with the factory roster, hour-by-hour market steps, purchases and panel
/// registrations. Used by the pipeline, the simulate command and the API.
///
/// Not thread-safe; the API guards it with a lock.
class MarketDay {
 public:
  MarketDay(std::vector<physics::NodeSpec> nodes, std::vector<GenerationRecord> records,
            MarketConfig config = {});

  const MarketConfig& config() const { return config_; }
  const ledger::Ledger& ledger() const { return ledger_; }
  const std::vector<physics::NodeSpec>& nodes() const { return nodes_; }
  const std::vector<GenerationRecord>& records() const { return records_; }
  const std::vector<TradeRow>& trades() const { return trades_; }
  const std::set<int>& applied_hours() const { return applied_; }
  bool complete() const { return applied_.size() == 24; }

  /// Account credited for a node's verified output: the current owner of
  /// the first panel registered from that node, else "owner-<node_id>".
  std::string owner_of_node(const std::string& node_id) const;

  /// Runs update_market_step with the hour's verified energy aggregated per
  /// owner. Returns the MarketStep event's sequence number.
  std::uint64_t apply_hour(int hour);

  /// Buys for a roster factory, acting as its owner. Returns the trade row;
  /// a zero-energy request is rejected with InvalidAmount.
  TradeRow buy(const std::string& factory_id, ledger::EnergyUnits units, int hour, int minute = 0);

  /// Registers the (node_id, hour) record as a panel. Only verified records
  /// qualify; each record registers at most once.
  RegisteredPanel register_panel(const std::string& node_id, int hour,
                                 const std::optional<std::string>& owner = std::nullopt);
  std::optional<std::uint64_t> panel_for_record(std::size_t record_index) const;
  std::optional<std::size_t> find_record(const std::string& node_id, int hour) const;

  const FactorySpec& factory_spec(const std::string& factory_id) const;
  std::uint64_t ledger_factory_id(const std::string& factory_id) const;
  std::string factory_owner(const std::string& factory_id) const;

  /// Hourly verified supply in MW for all 24 hours.
  std::vector<double> hourly_verified_mw() const;
  /// Liquidity rows for the applied hours, in hour order.
  std::vector<MarketHour> market_hours() const;

  /// Mutable ledger access for shop, reward and token calls made by callers
  /// that do their own validation (the API).
  ledger::Ledger& mutable_ledger() { return ledger_; }

 private:
  MarketConfig config_;
  std::vector<physics::NodeSpec> nodes_;
  std::vector<GenerationRecord> records_;
  ledger::Ledger ledger_;
  std::map<std::string, std::uint64_t> factory_ids_;
  std::set<int> applied_;
  std::vector<TradeRow> trades_;
  std::map<std::pair<std::string, int>, std::size_t> record_index_;
  std::map<std::size_t, std::uint64_t> registered_;          // record index -> panel id
  std::map<std::string, std::uint64_t> first_panel_of_node_;
};

/// Default account name for a factory's owner.
std::string factory_owner_account(const std::string& factory_id);

}  // namespace solarchain
