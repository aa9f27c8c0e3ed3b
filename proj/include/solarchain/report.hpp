#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "solarchain/dataset.hpp"
#include "solarchain/market_day.hpp"
#include "solarchain/physics.hpp"

namespace solarchain::report {

/// Detection counts with rejection as the positive class and the injection
/// label as ground truth. Ratios with an empty denominator are 1 when there
/// is nothing to miss or misflag (a clean day verified cleanly).
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct VerificationSummary {
  double tau = physics::kDefaultTau;
  std::size_t records = 0;
  std::size_t verified = 0;
  std::size_t rejected = 0;
  Confusion confusion;
  std::map<std::string, std::size_t> rejected_by_class;
  std::optional<physics::ResidualStats> residuals;  // absent with < 2 usable pairs
  double verified_kwh = 0.0;
  double rejected_kwh = 0.0;  // finite, non-negative rejected reports
  std::size_t stored_status_mismatches = 0;
};

/// Re-runs verify_record at `tau` on every record (using its stored P_max).
VerificationSummary verify_records(std::span<const GenerationRecord> records, double tau);

/// Largest |P_max recomputed from node + weather - stored P_max| in W, and
/// the number of records whose node is missing from the registry. The daily
/// minimum temperature is each node's lowest air temperature of the day.
struct BoundCheck {
  double max_abs_dev_w = 0.0;
  std::size_t unknown_nodes = 0;
};
BoundCheck recheck_bounds(const Dataset& data, const physics::BoundConfig& config);

nlohmann::json to_json(const VerificationSummary& v);
nlohmann::json to_json(const physics::ResidualStats& s);

/// Full metrics document (counts, verification, residuals, energy, cities,
/// liquidity, settlement, ledger) for the current state of a market day.
nlohmann::json build_report(const MarketDay& day);

}  // namespace solarchain::report
