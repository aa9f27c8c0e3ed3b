#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "solarchain/time.hpp"
#include "solarchain/wei.hpp"

namespace solarchain::ledger {

using AccountId = std::string;
/// Integer energy quantum, 0.01 Wh.
using EnergyUnits = std::uint64_t;

enum class ErrorCode {
  CapExceeded,
  InsufficientAllowance,
  InsufficientBalance,
  InsufficientSupply,
  NotFactoryOwner,
  NoSuchFactory,
  NoSuchPanel,
  NoSuchListing,
  SupplyMismatch,
  CooldownActive,
  NotOwner,
  ListingClosed,
  NoSuchOffer,
  AlreadyListed,
  InvalidAmount,
  InvalidAccount,
  Overflow,
  ReplayMismatch,
};

std::string_view to_string(ErrorCode code);

class LedgerError : public std::runtime_error {
 public:
  LedgerError(ErrorCode code, const std::string& message,
              std::optional<std::int64_t> retry_after_s = std::nullopt)
      : std::runtime_error(message), code_(code), retry_after_s_(retry_after_s) {}

  ErrorCode code() const { return code_; }
  /// Seconds until the cooldown expires; set for CooldownActive only.
  std::optional<std::int64_t> retry_after_s() const { return retry_after_s_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> retry_after_s_;
};

struct LedgerConfig {
  Wei cap = Wei::tokens(1'000'000'000);
  Wei reward_rate_wei_per_w = Wei::from_u64(1'000'000'000'000ULL);
  std::int64_t reward_cooldown_s = 3600;
  double exergy_quality_factor = 0.0273;
  AccountId exchange_account = "exchange";
  AccountId shop_account = "shop";

  bool operator==(const LedgerConfig&) const = default;
};

struct TokenState {
  std::map<AccountId, Wei> balances;
  std::map<std::pair<AccountId, AccountId>, Wei> allowances;  // (owner, spender)
  Wei total_supply;
  Wei cap;
  Wei cumulative_minted;
  Wei cumulative_burned;

  bool operator==(const TokenState&) const = default;
};

struct PanelRecord {
  std::uint64_t panel_id = 0;
  AccountId owner;
  double latitude = 0.0;
  double longitude = 0.0;
  double battery_temp_c = 0.0;
  std::uint64_t dc_power_w = 0;
  std::uint64_t ac_power_w = 0;
  Timestamp created_at;

  bool operator==(const PanelRecord&) const = default;
};

struct FactoryRecord {
  std::uint64_t factory_id = 0;
  AccountId owner;
  double latitude = 0.0;
  double longitude = 0.0;
  EnergyUnits power_consumption = 0;  // units per hour
  EnergyUnits energy_balance = 0;

  bool operator==(const FactoryRecord&) const = default;
};

struct ExchangeState {
  EnergyUnits global_supply_energy = 0;
  EnergyUnits total_demand_energy = 0;
  std::map<AccountId, Wei> personal_reward_wei;

  bool operator==(const ExchangeState&) const = default;
};

struct RewardState {
  std::map<AccountId, Timestamp> last_claim;
  Wei rate_wei_per_w;
  std::int64_t cooldown_s = 0;

  bool operator==(const RewardState&) const = default;
};

enum class ListingStatus { open, sold, cancelled };
std::string_view to_string(ListingStatus s);

struct ShopListing {
  std::uint64_t item_id = 0;
  std::uint64_t panel_id = 0;
  AccountId seller;
  Wei ask_price;
  std::map<AccountId, Wei> offers;
  ListingStatus status = ListingStatus::open;

  bool operator==(const ShopListing&) const = default;
};

struct LedgerState {
  TokenState token;
  std::vector<PanelRecord> panels;        // panel_id == index + 1
  std::vector<FactoryRecord> factories;   // factory_id == index + 1
  ExchangeState exchange;
  RewardState rewards;
  std::vector<ShopListing> listings;      // item_id == index + 1

  bool operator==(const LedgerState&) const = default;
};

// ---------------------------------------------------------------------------
// Events. Each is a self-contained fact; applying the log in order from an
// empty state reproduces the live state.

namespace events {

struct Minted {
  AccountId to;
  Wei amount;
  bool operator==(const Minted&) const = default;
};
struct Burned {
  AccountId account;
  AccountId spender;  // empty for a self-burn
  Wei amount;
  bool operator==(const Burned&) const = default;
};
struct Approval {
  AccountId owner;
  AccountId spender;
  Wei amount;
  bool operator==(const Approval&) const = default;
};
struct Transferred {
  AccountId from;
  AccountId to;
  Wei amount;
  bool operator==(const Transferred&) const = default;
};
struct PanelCreated {
  PanelRecord panel;
  bool operator==(const PanelCreated&) const = default;
};
struct FactoryCreated {
  FactoryRecord factory;
  bool operator==(const FactoryCreated&) const = default;
};
struct MarketEntry {
  AccountId owner;
  EnergyUnits user_energy = 0;
  EnergyUnits reward_units = 0;  // user_energy * 25 / 100
  Wei reward_wei;                // reward_units * 1e18 / 100000
  bool operator==(const MarketEntry&) const = default;
};
struct MarketStep {
  std::vector<MarketEntry> entries;
  EnergyUnits total_energy = 0;
  EnergyUnits pool_delta = 0;    // total_energy * 75 / 100
  EnergyUnits demand = 0;
  bool operator==(const MarketStep&) const = default;
};
struct RewardClaimed {
  AccountId owner;
  Wei amount;
  std::uint64_t capacity_w = 0;
  bool operator==(const RewardClaimed&) const = default;
};
struct EnergyPurchased {
  AccountId buyer;
  std::uint64_t factory_id = 0;
  EnergyUnits energy = 0;
  Wei cost_wei;
  double exergy_mj = 0.0;
  bool operator==(const EnergyPurchased&) const = default;
};
struct PanelListed {
  std::uint64_t item_id = 0;
  std::uint64_t panel_id = 0;
  AccountId seller;
  Wei ask_price;
  bool operator==(const PanelListed&) const = default;
};
struct OfferPlaced {
  std::uint64_t item_id = 0;
  AccountId buyer;
  Wei amount;
  bool operator==(const OfferPlaced&) const = default;
};
struct SaleApproved {
  std::uint64_t item_id = 0;
  std::uint64_t panel_id = 0;
  AccountId seller;
  AccountId buyer;
  Wei amount;
  bool operator==(const SaleApproved&) const = default;
};
struct ListingCancelled {
  std::uint64_t item_id = 0;
  bool operator==(const ListingCancelled&) const = default;
};

}  // namespace events

using EventPayload =
    std::variant<events::Minted, events::Burned, events::Approval, events::Transferred,
                 events::PanelCreated, events::FactoryCreated, events::MarketStep,
                 events::RewardClaimed, events::EnergyPurchased, events::PanelListed,
                 events::OfferPlaced, events::SaleApproved, events::ListingCancelled>;

struct LedgerEvent {
  std::uint64_t seq = 0;
  Timestamp ts;
  EventPayload payload;

  std::string_view kind() const;
  bool operator==(const LedgerEvent&) const = default;
};

struct PurchaseReceipt {
  std::uint64_t factory_id = 0;
  EnergyUnits energy = 0;
  Wei cost_wei;
  double exergy_mj = 0.0;
  std::uint64_t seq = 0;  // sequence number of the EnergyPurchased event, 0 for a no-op
};

/// Deterministic single-writer state machine for the token, registries,
/// exchange, reward pool and shop.
///
/// Not thread-safe; callers serialize mutations (see market_day / api).
/// Every mutating call either throws LedgerError leaving state untouched, or
/// appends one or more events and applies them.
class Ledger {
 public:
  explicit Ledger(LedgerConfig config = {});

  /// Rebuilds a ledger from an event log. Throws LedgerError(ReplayMismatch)
  /// when sequence numbers are not strictly increasing or an event does not
  /// apply cleanly.
  static Ledger replay(LedgerConfig config, std::span<const LedgerEvent> log);

  const LedgerConfig& config() const { return config_; }
  const LedgerState& state() const { return state_; }
  const std::vector<LedgerEvent>& events() const { return log_; }
  std::uint64_t last_seq() const { return log_.empty() ? 0 : log_.back().seq; }

  /// Simulation clock stamped onto new events.
  void set_clock(Timestamp now) { clock_ = now; }
  Timestamp clock() const { return clock_; }

  // Token
  void mint(const AccountId& to, Wei amount);
  void approve(const AccountId& owner, const AccountId& spender, Wei amount);
  void transfer(const AccountId& from, const AccountId& to, Wei amount);
  void burn(const AccountId& account, Wei amount);
  void burn_from(const AccountId& account, const AccountId& spender, Wei amount);

  Wei balance_of(const AccountId& a) const;
  Wei allowance(const AccountId& owner, const AccountId& spender) const;

  // Registries
  std::uint64_t create_panel(const AccountId& owner, double lat, double lon,
                             double battery_temp_c, std::uint64_t dc_power_w,
                             std::uint64_t ac_power_w);
  std::uint64_t create_factory(const AccountId& owner, double lat, double lon,
                               EnergyUnits power_consumption);
  const PanelRecord& panel(std::uint64_t panel_id) const;
  const FactoryRecord& factory(std::uint64_t factory_id) const;

  // Exchange
  void update_market_step(std::span<const std::pair<AccountId, EnergyUnits>> entries,
                          EnergyUnits total_energy, EnergyUnits demand);
  PurchaseReceipt buy_energy_for_factory(const AccountId& buyer, std::uint64_t factory_id,
                                         EnergyUnits energy_amount);
  static Wei reward_wei_for(EnergyUnits user_energy);
  static Wei cost_wei_for(EnergyUnits energy_amount);

  // Reward pool
  std::uint64_t registered_capacity_w(const AccountId& owner) const;
  Wei preview_reward(const AccountId& owner) const;
  /// Seconds until `owner` may claim at `now`; 0 when a claim is allowed.
  std::int64_t cooldown_remaining(const AccountId& owner, Timestamp now) const;
  Wei claim_reward(const AccountId& owner, Timestamp now);

  // Shop
  std::uint64_t list_panel(const AccountId& seller, std::uint64_t panel_id, Wei ask_price);
  void place_offer(const AccountId& buyer, std::uint64_t item_id, Wei amount);
  void approve_sale(const AccountId& seller, std::uint64_t item_id, const AccountId& buyer);
  void cancel_listing(const AccountId& seller, std::uint64_t item_id);
  const ShopListing& listing(std::uint64_t item_id) const;

  /// Returns a description of the first broken structural invariant, if any.
  std::optional<std::string> check_invariants() const;

 private:
  void commit(EventPayload payload);
  void apply(const LedgerEvent& event);

  LedgerConfig config_;
  LedgerState state_;
  std::vector<LedgerEvent> log_;
  Timestamp clock_;
};

// ---------------------------------------------------------------------------
// Serialization. Wei amounts are decimal strings; timestamps are ISO 8601.

nlohmann::json to_json(const LedgerEvent& event);
LedgerEvent event_from_json(const nlohmann::json& j);
nlohmann::json payload_to_json(const EventPayload& payload);
nlohmann::json snapshot_json(const LedgerState& state);
nlohmann::json config_to_json(const LedgerConfig& config);
LedgerConfig config_from_json(const nlohmann::json& j);

/// Newline-delimited JSON, one {seq, kind, payload, ts} object per line.
void write_event_log(std::ostream& out, std::span<const LedgerEvent> log);
std::vector<LedgerEvent> read_event_log(std::istream& in);

}  // namespace solarchain::ledger
