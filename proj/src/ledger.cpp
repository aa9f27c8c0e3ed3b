#include "solarchain/ledger.hpp"

#include <fmt/format.h>

#include "solarchain/units.hpp"

namespace solarchain::ledger {

namespace {

constexpr Wei::rep kWeiPerToken = 1'000'000'000'000'000'000ULL;
constexpr Wei::rep kUnitsPerToken = 100'000;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw LedgerError(code, msg); }

Wei add(Wei a, Wei b) {
  auto r = a.checked_add(b);
  if (!r) fail(ErrorCode::Overflow, "wei addition overflows");
  return *r;
}

Wei sub(Wei a, Wei b, ErrorCode code, std::string_view what) {
  auto r = a.checked_sub(b);
  if (!r) fail(code, fmt::format("{}: {} < {}", what, a.to_string(), b.to_string()));
  return *r;
}

EnergyUnits add_units(EnergyUnits a, EnergyUnits b) {
  EnergyUnits r{};
  if (__builtin_add_overflow(a, b, &r)) fail(ErrorCode::Overflow, "energy addition overflows");
  return r;
}

void require_account(const AccountId& a, std::string_view role) {
  if (a.empty()) fail(ErrorCode::InvalidAccount, fmt::format("{} account id is empty", role));
}

void require_positive(Wei amount, std::string_view what) {
  if (amount.is_zero()) fail(ErrorCode::InvalidAmount, fmt::format("{} must be > 0", what));
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::InsufficientAllowance: return "InsufficientAllowance";
    case ErrorCode::InsufficientBalance: return "InsufficientBalance";
    case ErrorCode::InsufficientSupply: return "InsufficientSupply";
    case ErrorCode::NotFactoryOwner: return "NotFactoryOwner";
    case ErrorCode::NoSuchFactory: return "NoSuchFactory";
    case ErrorCode::NoSuchPanel: return "NoSuchPanel";
    case ErrorCode::NoSuchListing: return "NoSuchListing";
    case ErrorCode::SupplyMismatch: return "SupplyMismatch";
    case ErrorCode::CooldownActive: return "CooldownActive";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::ListingClosed: return "ListingClosed";
    case ErrorCode::NoSuchOffer: return "NoSuchOffer";
    case ErrorCode::AlreadyListed: return "AlreadyListed";
    case ErrorCode::InvalidAmount: return "InvalidAmount";
    case ErrorCode::InvalidAccount: return "InvalidAccount";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
  }
  return "Unknown";
}

std::string_view to_string(ListingStatus s) {
  switch (s) {
    case ListingStatus::open: return "open";
    case ListingStatus::sold: return "sold";
    case ListingStatus::cancelled: return "cancelled";
  }
  return "open";
}

std::string_view LedgerEvent::kind() const {
  return std::visit(
      overloaded{
          [](const events::Minted&) { return std::string_view("Minted"); },
          [](const events::Burned&) { return std::string_view("Burned"); },
          [](const events::Approval&) { return std::string_view("Approval"); },
          [](const events::Transferred&) { return std::string_view("Transferred"); },
          [](const events::PanelCreated&) { return std::string_view("PanelCreated"); },
          [](const events::FactoryCreated&) { return std::string_view("FactoryCreated"); },
          [](const events::MarketStep&) { return std::string_view("MarketStep"); },
          [](const events::RewardClaimed&) { return std::string_view("RewardClaimed"); },
          [](const events::EnergyPurchased&) { return std::string_view("EnergyPurchased"); },
          [](const events::PanelListed&) { return std::string_view("PanelListed"); },
          [](const events::OfferPlaced&) { return std::string_view("OfferPlaced"); },
          [](const events::SaleApproved&) { return std::string_view("SaleApproved"); },
          [](const events::ListingCancelled&) { return std::string_view("ListingCancelled"); },
      },
      payload);
}

Ledger::Ledger(LedgerConfig config) : config_(std::move(config)) {
  state_.token.cap = config_.cap;
  state_.rewards.rate_wei_per_w = config_.reward_rate_wei_per_w;
  state_.rewards.cooldown_s = config_.reward_cooldown_s;
}

Ledger Ledger::replay(LedgerConfig config, std::span<const LedgerEvent> log) {
  Ledger l(std::move(config));
  for (const auto& e : log) {
    if (e.seq <= l.last_seq()) {
      fail(ErrorCode::ReplayMismatch,
           fmt::format("event seq {} does not follow {}", e.seq, l.last_seq()));
    }
    try {
      l.apply(e);
    } catch (const LedgerError& err) {
      fail(ErrorCode::ReplayMismatch,
           fmt::format("event {} ({}) failed to apply: {}", e.seq, e.kind(), err.what()));
    }
    l.log_.push_back(e);
    l.clock_ = e.ts;
  }
  return l;
}

void Ledger::commit(EventPayload payload) {
  LedgerEvent e{last_seq() + 1, clock_, std::move(payload)};
  apply(e);
  log_.push_back(std::move(e));
}

void Ledger::apply(const LedgerEvent& event) {
  auto& tok = state_.token;
  std::visit(
      overloaded{
          [&](const events::Minted& m) {
            const Wei supply = add(tok.total_supply, m.amount);
            if (supply > tok.cap) fail(ErrorCode::CapExceeded, "mint exceeds cap");
            tok.total_supply = supply;
            tok.cumulative_minted = add(tok.cumulative_minted, m.amount);
            tok.balances[m.to] = add(tok.balances[m.to], m.amount);
          },
          [&](const events::Burned& b) {
            if (!b.spender.empty()) {
              auto& allowed = tok.allowances[{b.account, b.spender}];
              allowed = sub(allowed, b.amount, ErrorCode::InsufficientAllowance, "allowance");
            }
            auto& bal = tok.balances[b.account];
            bal = sub(bal, b.amount, ErrorCode::InsufficientBalance, "balance");
            tok.total_supply = sub(tok.total_supply, b.amount, ErrorCode::Overflow, "supply");
            tok.cumulative_burned = add(tok.cumulative_burned, b.amount);
          },
          [&](const events::Approval& a) { tok.allowances[{a.owner, a.spender}] = a.amount; },
          [&](const events::Transferred& t) {
            auto& from = tok.balances[t.from];
            from = sub(from, t.amount, ErrorCode::InsufficientBalance, "balance");
            tok.balances[t.to] = add(tok.balances[t.to], t.amount);
          },
          [&](const events::PanelCreated& p) {
            if (p.panel.panel_id != state_.panels.size() + 1) {
              fail(ErrorCode::ReplayMismatch, "panel ids must be dense");
            }
            state_.panels.push_back(p.panel);
          },
          [&](const events::FactoryCreated& f) {
            if (f.factory.factory_id != state_.factories.size() + 1) {
              fail(ErrorCode::ReplayMismatch, "factory ids must be dense");
            }
            state_.factories.push_back(f.factory);
          },
          [&](const events::MarketStep& s) {
            auto& ex = state_.exchange;
            for (const auto& entry : s.entries) {
              auto& r = ex.personal_reward_wei[entry.owner];
              r = add(r, entry.reward_wei);
            }
            ex.global_supply_energy = add_units(ex.global_supply_energy, s.pool_delta);
            ex.total_demand_energy = s.demand;
          },
          [&](const events::RewardClaimed& r) { state_.rewards.last_claim[r.owner] = event.ts; },
          [&](const events::EnergyPurchased& p) {
            auto& ex = state_.exchange;
            if (ex.global_supply_energy < p.energy) {
              fail(ErrorCode::InsufficientSupply, "pool below purchase");
            }
            if (p.factory_id == 0 || p.factory_id > state_.factories.size()) {
              fail(ErrorCode::NoSuchFactory, "unknown factory");
            }
            ex.global_supply_energy -= p.energy;
            auto& f = state_.factories[p.factory_id - 1];
            f.energy_balance = add_units(f.energy_balance, p.energy);
          },
          [&](const events::PanelListed& l) {
            if (l.item_id != state_.listings.size() + 1) {
              fail(ErrorCode::ReplayMismatch, "listing ids must be dense");
            }
            state_.listings.push_back(ShopListing{l.item_id, l.panel_id, l.seller, l.ask_price,
                                                  {}, ListingStatus::open});
          },
          [&](const events::OfferPlaced& o) {
            if (o.item_id == 0 || o.item_id > state_.listings.size()) {
              fail(ErrorCode::NoSuchListing, "unknown listing");
            }
            state_.listings[o.item_id - 1].offers[o.buyer] = o.amount;
          },
          [&](const events::SaleApproved& s) {
            if (s.item_id == 0 || s.item_id > state_.listings.size()) {
              fail(ErrorCode::NoSuchListing, "unknown listing");
            }
            if (s.panel_id == 0 || s.panel_id > state_.panels.size()) {
              fail(ErrorCode::NoSuchPanel, "unknown panel");
            }
            auto& allowed = tok.allowances[{s.buyer, config_.shop_account}];
            allowed = sub(allowed, s.amount, ErrorCode::InsufficientAllowance, "allowance");
            auto& from = tok.balances[s.buyer];
            from = sub(from, s.amount, ErrorCode::InsufficientBalance, "balance");
            tok.balances[s.seller] = add(tok.balances[s.seller], s.amount);
            state_.panels[s.panel_id - 1].owner = s.buyer;
            state_.listings[s.item_id - 1].status = ListingStatus::sold;
          },
          [&](const events::ListingCancelled& c) {
            if (c.item_id == 0 || c.item_id > state_.listings.size()) {
              fail(ErrorCode::NoSuchListing, "unknown listing");
            }
            state_.listings[c.item_id - 1].status = ListingStatus::cancelled;
          },
      },
      event.payload);
}

// ---------------------------------------------------------------------------
// Token

Wei Ledger::balance_of(const AccountId& a) const {
  auto it = state_.token.balances.find(a);
  return it == state_.token.balances.end() ? Wei{} : it->second;
}

Wei Ledger::allowance(const AccountId& owner, const AccountId& spender) const {
  auto it = state_.token.allowances.find({owner, spender});
  return it == state_.token.allowances.end() ? Wei{} : it->second;
}

void Ledger::mint(const AccountId& to, Wei amount) {
  require_account(to, "recipient");
  require_positive(amount, "mint amount");
  const auto supply = state_.token.total_supply.checked_add(amount);
  if (!supply || *supply > state_.token.cap) {
    fail(ErrorCode::CapExceeded,
         fmt::format("mint of {} wei would exceed cap {} (supply {})", amount.to_string(),
                     state_.token.cap.to_string(), state_.token.total_supply.to_string()));
  }
  commit(events::Minted{to, amount});
}

void Ledger::approve(const AccountId& owner, const AccountId& spender, Wei amount) {
  require_account(owner, "owner");
  require_account(spender, "spender");
  commit(events::Approval{owner, spender, amount});
}

void Ledger::transfer(const AccountId& from, const AccountId& to, Wei amount) {
  require_account(from, "sender");
  require_account(to, "recipient");
  if (balance_of(from) < amount) fail(ErrorCode::InsufficientBalance, "balance below transfer");
  commit(events::Transferred{from, to, amount});
}

void Ledger::burn(const AccountId& account, Wei amount) {
  require_account(account, "account");
  if (balance_of(account) < amount) fail(ErrorCode::InsufficientBalance, "balance below burn");
  commit(events::Burned{account, {}, amount});
}

void Ledger::burn_from(const AccountId& account, const AccountId& spender, Wei amount) {
  require_account(account, "account");
  require_account(spender, "spender");
  if (allowance(account, spender) < amount) {
    fail(ErrorCode::InsufficientAllowance,
         fmt::format("allowance {} -> {} is below {}", account, spender, amount.to_string()));
  }
  if (balance_of(account) < amount) {
    fail(ErrorCode::InsufficientBalance,
         fmt::format("balance of {} is below {}", account, amount.to_string()));
  }
  commit(events::Burned{account, spender, amount});
}

// ---------------------------------------------------------------------------
// Registries

std::uint64_t Ledger::create_panel(const AccountId& owner, double lat, double lon,
                                   double battery_temp_c, std::uint64_t dc_power_w,
                                   std::uint64_t ac_power_w) {
  require_account(owner, "panel owner");
  const std::uint64_t id = state_.panels.size() + 1;
  commit(events::PanelCreated{
      PanelRecord{id, owner, lat, lon, battery_temp_c, dc_power_w, ac_power_w, clock_}});
  return id;
}

std::uint64_t Ledger::create_factory(const AccountId& owner, double lat, double lon,
                                     EnergyUnits power_consumption) {
  require_account(owner, "factory owner");
  const std::uint64_t id = state_.factories.size() + 1;
  commit(events::FactoryCreated{FactoryRecord{id, owner, lat, lon, power_consumption, 0}});
  return id;
}

const PanelRecord& Ledger::panel(std::uint64_t panel_id) const {
  if (panel_id == 0 || panel_id > state_.panels.size()) {
    fail(ErrorCode::NoSuchPanel, fmt::format("no panel {}", panel_id));
  }
  return state_.panels[panel_id - 1];
}

const FactoryRecord& Ledger::factory(std::uint64_t factory_id) const {
  if (factory_id == 0 || factory_id > state_.factories.size()) {
    fail(ErrorCode::NoSuchFactory, fmt::format("no factory {}", factory_id));
  }
  return state_.factories[factory_id - 1];
}

// ---------------------------------------------------------------------------
// Exchange

Wei Ledger::reward_wei_for(EnergyUnits user_energy) {
  // reward = userEnergy * 25 / 100; rewardWei = reward * 1e18 / 100000
  const Wei::rep reward = static_cast<Wei::rep>(user_energy) * 25 / 100;
  return Wei(reward * kWeiPerToken / kUnitsPerToken);
}

Wei Ledger::cost_wei_for(EnergyUnits energy_amount) {
  return Wei(static_cast<Wei::rep>(energy_amount) * kWeiPerToken / kUnitsPerToken);
}

void Ledger::update_market_step(std::span<const std::pair<AccountId, EnergyUnits>> entries,
                                EnergyUnits total_energy, EnergyUnits demand) {
  events::MarketStep step;
  step.total_energy = total_energy;
  step.demand = demand;
  EnergyUnits sum = 0;
  for (const auto& [owner, energy] : entries) {
    require_account(owner, "market entry owner");
    sum = add_units(sum, energy);
    const EnergyUnits reward_units =
        static_cast<EnergyUnits>(static_cast<Wei::rep>(energy) * 25 / 100);
    step.entries.push_back({owner, energy, reward_units, reward_wei_for(energy)});
  }
  if (sum != total_energy) {
    fail(ErrorCode::SupplyMismatch,
         fmt::format("entries sum to {} but total_energy is {}", sum, total_energy));
  }
  step.pool_delta = static_cast<EnergyUnits>(static_cast<Wei::rep>(total_energy) * 75 / 100);
  if (state_.exchange.global_supply_energy > UINT64_MAX - step.pool_delta) {
    fail(ErrorCode::Overflow, "global supply overflows");
  }
  commit(std::move(step));
}

PurchaseReceipt Ledger::buy_energy_for_factory(const AccountId& buyer, std::uint64_t factory_id,
                                               EnergyUnits energy_amount) {
  require_account(buyer, "buyer");
  const FactoryRecord& f = factory(factory_id);
  if (f.owner != buyer) {
    fail(ErrorCode::NotFactoryOwner,
         fmt::format("{} does not own factory {}", buyer, factory_id));
  }
  if (energy_amount == 0) return {factory_id, 0, Wei{}, 0.0, 0};
  if (state_.exchange.global_supply_energy < energy_amount) {
    fail(ErrorCode::InsufficientSupply,
         fmt::format("pool holds {} units, purchase needs {}",
                     state_.exchange.global_supply_energy, energy_amount));
  }
  const Wei cost = cost_wei_for(energy_amount);
  const auto& spender = config_.exchange_account;
  if (allowance(buyer, spender) < cost) {
    fail(ErrorCode::InsufficientAllowance,
         fmt::format("allowance {} -> {} is below cost {}", buyer, spender, cost.to_string()));
  }
  if (balance_of(buyer) < cost) {
    fail(ErrorCode::InsufficientBalance,
         fmt::format("balance of {} is below cost {}", buyer, cost.to_string()));
  }
  const double exergy =
      units::exergy_mj(units::units_to_mwh(energy_amount), config_.exergy_quality_factor);
  commit(events::Burned{buyer, spender, cost});
  commit(events::EnergyPurchased{buyer, factory_id, energy_amount, cost, exergy});
  return {factory_id, energy_amount, cost, exergy, last_seq()};
}

// ---------------------------------------------------------------------------
// Reward pool

std::uint64_t Ledger::registered_capacity_w(const AccountId& owner) const {
  std::uint64_t total = 0;
  for (const auto& p : state_.panels) {
    if (p.owner == owner && __builtin_add_overflow(total, p.dc_power_w, &total)) {
      fail(ErrorCode::Overflow, "capacity overflows");
    }
  }
  return total;
}

Wei Ledger::preview_reward(const AccountId& owner) const {
  auto r = state_.rewards.rate_wei_per_w.checked_mul(registered_capacity_w(owner));
  if (!r) fail(ErrorCode::Overflow, "reward overflows");
  return *r;
}

std::int64_t Ledger::cooldown_remaining(const AccountId& owner, Timestamp now) const {
  auto it = state_.rewards.last_claim.find(owner);
  if (it == state_.rewards.last_claim.end()) return 0;
  const std::int64_t elapsed = now.utc_seconds() - it->second.utc_seconds();
  return elapsed >= state_.rewards.cooldown_s ? 0 : state_.rewards.cooldown_s - elapsed;
}

Wei Ledger::claim_reward(const AccountId& owner, Timestamp now) {
  require_account(owner, "claimant");
  if (const auto remaining = cooldown_remaining(owner, now); remaining > 0) {
    throw LedgerError(ErrorCode::CooldownActive,
                      fmt::format("{} must wait {} s before claiming again", owner, remaining),
                      remaining);
  }
  const Wei payout = preview_reward(owner);
  const auto supply = state_.token.total_supply.checked_add(payout);
  if (!supply || *supply > state_.token.cap) {
    fail(ErrorCode::CapExceeded, "reward payout would exceed cap");
  }
  clock_ = now;
  if (!payout.is_zero()) commit(events::Minted{owner, payout});
  commit(events::RewardClaimed{owner, payout, registered_capacity_w(owner)});
  return payout;
}

// ---------------------------------------------------------------------------
// Shop

const ShopListing& Ledger::listing(std::uint64_t item_id) const {
  if (item_id == 0 || item_id > state_.listings.size()) {
    fail(ErrorCode::NoSuchListing, fmt::format("no listing {}", item_id));
  }
  return state_.listings[item_id - 1];
}

std::uint64_t Ledger::list_panel(const AccountId& seller, std::uint64_t panel_id,
                                 Wei ask_price) {
  require_account(seller, "seller");
  const PanelRecord& p = panel(panel_id);
  if (p.owner != seller) {
    fail(ErrorCode::NotOwner, fmt::format("{} does not own panel {}", seller, panel_id));
  }
  require_positive(ask_price, "ask price");
  for (const auto& l : state_.listings) {
    if (l.panel_id == panel_id && l.status == ListingStatus::open) {
      fail(ErrorCode::AlreadyListed,
           fmt::format("panel {} already has open listing {}", panel_id, l.item_id));
    }
  }
  const std::uint64_t id = state_.listings.size() + 1;
  commit(events::PanelListed{id, panel_id, seller, ask_price});
  return id;
}

void Ledger::place_offer(const AccountId& buyer, std::uint64_t item_id, Wei amount) {
  require_account(buyer, "buyer");
  const ShopListing& l = listing(item_id);
  if (l.status != ListingStatus::open) {
    fail(ErrorCode::ListingClosed, fmt::format("listing {} is {}", item_id, to_string(l.status)));
  }
  if (buyer == l.seller) fail(ErrorCode::InvalidAccount, "seller cannot bid on own listing");
  require_positive(amount, "offer");
  if (allowance(buyer, config_.shop_account) < amount) {
    fail(ErrorCode::InsufficientAllowance,
         fmt::format("{} has not approved the shop for {}", buyer, amount.to_string()));
  }
  commit(events::OfferPlaced{item_id, buyer, amount});
}

void Ledger::approve_sale(const AccountId& seller, std::uint64_t item_id,
                          const AccountId& buyer) {
  require_account(seller, "seller");
  const ShopListing& l = listing(item_id);
  if (l.status != ListingStatus::open) {
    fail(ErrorCode::ListingClosed, fmt::format("listing {} is {}", item_id, to_string(l.status)));
  }
  if (l.seller != seller || panel(l.panel_id).owner != seller) {
    fail(ErrorCode::NotOwner, fmt::format("{} cannot approve listing {}", seller, item_id));
  }
  auto offer = l.offers.find(buyer);
  if (offer == l.offers.end()) {
    fail(ErrorCode::NoSuchOffer, fmt::format("{} has no offer on listing {}", buyer, item_id));
  }
  const Wei amount = offer->second;
  if (allowance(buyer, config_.shop_account) < amount) {
    fail(ErrorCode::InsufficientAllowance,
         fmt::format("{} allowance to shop is below offer {}", buyer, amount.to_string()));
  }
  if (balance_of(buyer) < amount) {
    fail(ErrorCode::InsufficientBalance,
         fmt::format("{} balance is below offer {}", buyer, amount.to_string()));
  }
  commit(events::SaleApproved{item_id, l.panel_id, seller, buyer, amount});
}

void Ledger::cancel_listing(const AccountId& seller, std::uint64_t item_id) {
  const ShopListing& l = listing(item_id);
  if (l.seller != seller) fail(ErrorCode::NotOwner, "only the seller may cancel");
  if (l.status != ListingStatus::open) fail(ErrorCode::ListingClosed, "listing is closed");
  commit(events::ListingCancelled{item_id});
}

std::optional<std::string> Ledger::check_invariants() const {
  const auto& tok = state_.token;
  Wei sum;
  for (const auto& [acct, bal] : tok.balances) {
    auto s = sum.checked_add(bal);
    if (!s) return "balance sum overflows";
    sum = *s;
  }
  if (sum != tok.total_supply) {
    return fmt::format("sum of balances {} != total supply {}", sum.to_string(),
                       tok.total_supply.to_string());
  }
  if (tok.total_supply > tok.cap) return "total supply exceeds cap";
  auto net = tok.cumulative_minted.checked_sub(tok.cumulative_burned);
  if (!net || *net != tok.total_supply) return "total supply != minted - burned";
  for (std::size_t i = 0; i < state_.panels.size(); ++i) {
    if (state_.panels[i].panel_id != i + 1) return "panel ids are not dense";
    if (state_.panels[i].owner.empty()) return "panel without owner";
  }
  for (std::size_t i = 0; i < state_.factories.size(); ++i) {
    if (state_.factories[i].factory_id != i + 1) return "factory ids are not dense";
  }
  std::map<std::uint64_t, int> open_per_panel;
  for (const auto& l : state_.listings) {
    if (l.status == ListingStatus::open && ++open_per_panel[l.panel_id] > 1) {
      return fmt::format("panel {} has more than one open listing", l.panel_id);
    }
  }
  std::uint64_t prev = 0;
  for (const auto& e : log_) {
    if (e.seq <= prev) return "event sequence numbers not strictly increasing";
    prev = e.seq;
  }
  return std::nullopt;
}

}  // namespace solarchain::ledger
