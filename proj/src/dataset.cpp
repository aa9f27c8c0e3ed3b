#include "solarchain/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

namespace solarchain {

namespace {

using physics::NodeSpec;

const std::vector<std::string> kNodeColumns{"node_id",       "city",       "latitude",
                                            "longitude",     "panel_area_m2", "efficiency",
                                            "temp_coefficient", "install_date"};
const std::vector<std::string> kGenerationColumns{
    "timestamp",      "hour",       "node_id", "city",         "latitude",
    "longitude",      "irradiance_Wm2", "air_temp_C", "P_max_W", "P_reported_W",
    "fdia_detected",  "verification_status"};
const std::vector<std::string> kMarketColumns{
    "timestamp",           "hour",
    "total_verified_MW",   "SolarChain_liquidity_MW",
    "baseline_liquidity_MW", "slippage_SolarChain_pct",
    "slippage_baseline_pct"};
const std::vector<std::string> kTradeColumns{"trade_id", "timestamp", "hour",
                                             "factory_id", "city", "energy_purchased_MW",
                                             "tokens_burned", "exergy_dissipated_MJ"};

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = fmt::format("{:.{}f}", v, decimals);
  // Never print a signed zero.
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Header-indexed reader. Extra columns are ignored; column order is free.
class CsvTable {
 public:
  CsvTable(std::istream& in, const std::vector<std::string>& required) {
    std::string line;
    if (!next_line(in, line)) throw SchemaMismatch("empty file, expected a header row");
    const auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) index_[header[i]] = i;
    for (const auto& col : required) {
      if (!index_.count(col)) throw SchemaMismatch(fmt::format("missing column '{}'", col));
    }
    width_ = header.size();
    while (next_line(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (fields.size() != width_) {
        throw SchemaMismatch(fmt::format("line {}: expected {} fields, found {}", line_no_,
                                         width_, fields.size()));
      }
      rows_.push_back({line_no_, std::move(fields)});
    }
  }

  struct Row {
    std::size_t line;
    std::vector<std::string> fields;
  };

  const std::vector<Row>& rows() const { return rows_; }
  const std::string& get(const Row& r, const std::string& col) const {
    return r.fields[index_.at(col)];
  }

 private:
  bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    return true;
  }

  std::map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
  std::size_t line_no_ = 0;
  std::vector<Row> rows_;
};

[[noreturn]] void bad_field(std::size_t line, const std::string& col, const std::string& value,
                            const std::string& why) {
  throw ParseError(fmt::format("line {}: column '{}': {} ('{}')", line, col, why, value));
}

double parse_double(const CsvTable& t, const CsvTable::Row& r, const std::string& col) {
  const std::string& s = t.get(r, col);
  if (s == "NaN" || s == "nan" || s == "NAN") return std::nan("");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    bad_field(r.line, col, s, "not a number");
  }
  return v;
}

int parse_int(const CsvTable& t, const CsvTable::Row& r, const std::string& col) {
  const std::string& s = t.get(r, col);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    bad_field(r.line, col, s, "not an integer");
  }
  return v;
}

bool parse_bool(const CsvTable& t, const CsvTable::Row& r, const std::string& col) {
  const std::string& s = t.get(r, col);
  if (s == "True" || s == "true" || s == "1") return true;
  if (s == "False" || s == "false" || s == "0") return false;
  bad_field(r.line, col, s, "not a boolean");
}

Timestamp parse_ts(const CsvTable& t, const CsvTable::Row& r, const std::string& col) {
  const std::string& s = t.get(r, col);
  try {
    return Timestamp::parse(s);
  } catch (const ParseError& e) {
    bad_field(r.line, col, s, e.what());
  }
}

// "0.012345" MWh -> energy units (1e-8 MWh) without going through binary
// floating point.
ledger::EnergyUnits parse_mwh_units(const CsvTable& t, const CsvTable::Row& r,
                                    const std::string& col) {
  const std::string& s = t.get(r, col);
  const auto dot = s.find('.');
  const std::string whole = s.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  const bool ok = !s.empty() && whole.find_first_not_of("0123456789") == std::string::npos &&
                  frac.find_first_not_of("0123456789") == std::string::npos &&
                  (whole.size() + frac.size()) > 0 && whole.size() < 10;
  if (!ok) bad_field(r.line, col, s, "not a non-negative decimal");
  bool round_up = frac.size() > 8 && frac[8] >= '5';
  if (frac.size() > 8) frac.resize(8);
  frac.append(8 - frac.size(), '0');
  ledger::EnergyUnits v = whole.empty() ? 0 : std::stoull(whole);
  v = v * 100'000'000ULL + std::stoull(frac);
  return v + (round_up ? 1 : 0);
}

std::string units_as_mwh(ledger::EnergyUnits u) {
  // 6 decimals; trades are whole Wh so this is exact.
  const ledger::EnergyUnits scaled = (u + 50) / 100;  // Wh, half-up
  return fmt::format("{}.{:06d}", scaled / 1'000'000, scaled % 1'000'000);
}

template <class F>
auto with_file_context(const std::filesystem::path& file, F&& f) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", file.string()));
  try {
    return f(in);
  } catch (const SchemaMismatch& e) {
    throw SchemaMismatch(fmt::format("{}: {}", file.filename().string(), e.what()));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", file.filename().string(), e.what()));
  }
}

}  // namespace

double quantize(double value, int decimals) {
  if (!std::isfinite(value)) return value;
  const double scale = std::pow(10.0, decimals);
  const double q = std::round(value * scale) / scale;
  return q == 0.0 ? 0.0 : q;
}

physics::Verdict GenerationRecord::verdict(double tau) const {
  return physics::verify_record(p_reported_w, p_max_w, tau);
}

void write_nodes_csv(std::ostream& out, std::span<const NodeSpec> nodes) {
  write_header(out, kNodeColumns);
  for (const auto& n : nodes) {
    out << csv_field(n.node_id) << ',' << csv_field(n.city) << ',' << fixed(n.latitude, 6) << ','
        << fixed(n.longitude, 6) << ',' << fixed(n.panel_area_m2, 2) << ','
        << fixed(n.efficiency, 4) << ',' << fixed(n.temp_coefficient, 5) << ','
        << n.install_date.to_string() << '\n';
  }
}

void write_generation_csv(std::ostream& out, std::span<const GenerationRecord> records) {
  write_header(out, kGenerationColumns);
  for (const auto& r : records) {
    out << r.timestamp.to_iso() << ',' << r.hour << ',' << csv_field(r.node_id) << ','
        << csv_field(r.city) << ',' << fixed(r.latitude, 6) << ',' << fixed(r.longitude, 6) << ','
        << fixed(r.irradiance_wm2, 2) << ',' << fixed(r.air_temp_c, 2) << ','
        << fixed(r.p_max_w, 2) << ',' << fixed(r.p_reported_w, 2) << ','
        << (r.fdia_detected ? "True" : "False") << ',' << physics::to_string(r.verification_status)
        << '\n';
  }
}

void write_market_csv(std::ostream& out, std::span<const MarketHour> hours) {
  write_header(out, kMarketColumns);
  for (const auto& h : hours) {
    out << h.timestamp.to_iso() << ',' << h.hour << ',' << fixed(h.total_verified_mw, 6) << ','
        << fixed(h.solarchain_liquidity_mw, 6) << ',' << fixed(h.baseline_liquidity_mw, 6) << ','
        << fixed(h.slippage_solarchain_pct, 4) << ',' << fixed(h.slippage_baseline_pct, 4) << '\n';
  }
}

void write_trades_csv(std::ostream& out, std::span<const TradeRow> trades) {
  write_header(out, kTradeColumns);
  for (const auto& t : trades) {
    out << t.trade_id << ',' << t.timestamp.to_iso() << ',' << t.hour << ','
        << csv_field(t.factory_id) << ',' << csv_field(t.city) << ','
        << units_as_mwh(t.energy_units) << ',' << t.tokens_burned.to_token_string(4) << ','
        << fixed(t.exergy_mj, 4) << '\n';
  }
}

std::vector<NodeSpec> read_nodes_csv(std::istream& in) {
  CsvTable t(in, kNodeColumns);
  std::vector<NodeSpec> out;
  for (const auto& r : t.rows()) {
    NodeSpec n;
    n.node_id = t.get(r, "node_id");
    n.city = t.get(r, "city");
    n.latitude = parse_double(t, r, "latitude");
    n.longitude = parse_double(t, r, "longitude");
    n.panel_area_m2 = parse_double(t, r, "panel_area_m2");
    n.efficiency = parse_double(t, r, "efficiency");
    n.temp_coefficient = parse_double(t, r, "temp_coefficient");
    try {
      n.install_date = CalendarDate::parse(t.get(r, "install_date"));
      n.validate();
    } catch (const std::exception& e) {
      throw ParseError(fmt::format("line {}: {}", r.line, e.what()));
    }
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<GenerationRecord> read_generation_csv(std::istream& in) {
  CsvTable t(in, kGenerationColumns);
  std::vector<GenerationRecord> out;
  out.reserve(t.rows().size());
  for (const auto& r : t.rows()) {
    GenerationRecord g;
    g.timestamp = parse_ts(t, r, "timestamp");
    g.hour = parse_int(t, r, "hour");
    if (g.hour < 0 || g.hour > 23) bad_field(r.line, "hour", t.get(r, "hour"), "outside 0-23");
    g.node_id = t.get(r, "node_id");
    g.city = t.get(r, "city");
    g.latitude = parse_double(t, r, "latitude");
    g.longitude = parse_double(t, r, "longitude");
    g.irradiance_wm2 = parse_double(t, r, "irradiance_Wm2");
    g.air_temp_c = parse_double(t, r, "air_temp_C");
    g.p_max_w = parse_double(t, r, "P_max_W");
    g.p_reported_w = parse_double(t, r, "P_reported_W");
    g.fdia_detected = parse_bool(t, r, "fdia_detected");
    try {
      g.verification_status = physics::parse_status(t.get(r, "verification_status"));
    } catch (const std::exception& e) {
      bad_field(r.line, "verification_status", t.get(r, "verification_status"), e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<MarketHour> read_market_csv(std::istream& in) {
  CsvTable t(in, kMarketColumns);
  std::vector<MarketHour> out;
  for (const auto& r : t.rows()) {
    MarketHour h;
    h.timestamp = parse_ts(t, r, "timestamp");
    h.hour = parse_int(t, r, "hour");
    h.total_verified_mw = parse_double(t, r, "total_verified_MW");
    h.solarchain_liquidity_mw = parse_double(t, r, "SolarChain_liquidity_MW");
    h.baseline_liquidity_mw = parse_double(t, r, "baseline_liquidity_MW");
    h.slippage_solarchain_pct = parse_double(t, r, "slippage_SolarChain_pct");
    h.slippage_baseline_pct = parse_double(t, r, "slippage_baseline_pct");
    out.push_back(h);
  }
  return out;
}

std::vector<TradeRow> read_trades_csv(std::istream& in) {
  CsvTable t(in, kTradeColumns);
  std::vector<TradeRow> out;
  for (const auto& r : t.rows()) {
    TradeRow tr;
    tr.trade_id = t.get(r, "trade_id");
    tr.timestamp = parse_ts(t, r, "timestamp");
    tr.hour = parse_int(t, r, "hour");
    tr.factory_id = t.get(r, "factory_id");
    tr.city = t.get(r, "city");
    tr.energy_units = parse_mwh_units(t, r, "energy_purchased_MW");
    try {
      tr.tokens_burned = Wei::parse_tokens(t.get(r, "tokens_burned"));
    } catch (const std::exception& e) {
      bad_field(r.line, "tokens_burned", t.get(r, "tokens_burned"), e.what());
    }
    tr.exergy_mj = parse_double(t, r, "exergy_dissipated_MJ");
    out.push_back(std::move(tr));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.nodes = with_file_context(dir / kNodesFile, [](std::istream& in) { return read_nodes_csv(in); });
  d.records = with_file_context(dir / kGenerationFile,
                                [](std::istream& in) { return read_generation_csv(in); });
  if (std::filesystem::exists(dir / kMarketFile)) {
    d.market = with_file_context(dir / kMarketFile,
                                 [](std::istream& in) { return read_market_csv(in); });
  }
  if (std::filesystem::exists(dir / kTradesFile)) {
    d.trades = with_file_context(dir / kTradesFile,
                                 [](std::istream& in) { return read_trades_csv(in); });
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  auto emit = [&](const char* name, auto&& writer) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", (dir / name).string()));
    writer(out);
    if (!out) throw std::runtime_error(fmt::format("write failed for {}", (dir / name).string()));
  };
  emit(kNodesFile, [&](std::ostream& o) { write_nodes_csv(o, data.nodes); });
  emit(kGenerationFile, [&](std::ostream& o) { write_generation_csv(o, data.records); });
  emit(kMarketFile, [&](std::ostream& o) { write_market_csv(o, data.market); });
  emit(kTradesFile, [&](std::ostream& o) { write_trades_csv(o, data.trades); });
}

}  // namespace solarchain
