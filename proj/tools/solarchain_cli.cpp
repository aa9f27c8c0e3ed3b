// solarchain: generate / verify / simulate / serve.
//
// Exit codes: 0 all checked invariants hold, 1 an invariant failed (a
// "FAIL {json}" line goes to stderr), 2 bad input or usage ("ERROR {json}").

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "solarchain/api.hpp"
#include "solarchain/benchgen.hpp"
#include "solarchain/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace solarchain;

namespace {

struct Outcome {
  json summary = json::object();
  std::vector<std::pair<std::string, std::string>> failures;

  void check(bool ok, const std::string& invariant, const std::string& detail) {
    if (!ok) failures.emplace_back(invariant, detail);
  }
};

struct Common {
  std::string config_file;
  std::string data_dir;
  std::uint64_t seed = 42;
  double tau = physics::kDefaultTau;
  bool json_out = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
};

// Config precedence: flag > environment > file. CLI11 already folds the
// environment into the option, so only the file layer is handled here.
benchgen::BenchmarkConfig resolve_config(const Common& c, const std::string& data_dir) {
  benchgen::BenchmarkConfig cfg;
  if (!c.config_file.empty()) {
    cfg = benchgen::load_config(c.config_file);
  } else if (!data_dir.empty() && fs::exists(fs::path(data_dir) / benchgen::kConfigFile)) {
    cfg = benchgen::load_config(fs::path(data_dir) / benchgen::kConfigFile);
  }
  if (c.seed_opt && c.seed_opt->count()) cfg.seed = c.seed;
  if (c.tau_opt && c.tau_opt->count()) cfg.market.tau = c.tau;
  cfg.validate();
  return cfg;
}

json failures_json(const Outcome& o) {
  json f = json::array();
  for (const auto& [inv, detail] : o.failures) f.push_back({{"invariant", inv}, {"detail", detail}});
  return f;
}

std::string fmt_pct(double v) { return fmt::format("{:.2f}%", v); }

Outcome run_generate(const Common& c, const std::string& out_dir) {
  const auto cfg = resolve_config(c, "");
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = benchgen::run_pipeline(cfg, out_dir.empty() ? std::nullopt
                                                               : std::optional<fs::path>(out_dir));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& m = res.metrics;
  Outcome o;
  o.summary = {{"nodes", res.dataset.nodes.size()},
               {"records", res.dataset.records.size()},
               {"rejected", m["verification"]["rejected"]},
               {"trades", res.dataset.trades.size()},
               {"seed", cfg.seed},
               {"out", out_dir.empty() ? json(nullptr) : json(out_dir)},
               {"seconds", secs},
               {"metrics", m}};
  o.check(m["verification"]["stored_status_mismatches"] == 0, "stored_status",
          "stored verification_status disagrees with the verifier");
  o.check(m["verification"]["rejected"] == cfg.anomalies.total(), "injection_count",
          fmt::format("rejected {} != planned {}", m["verification"]["rejected"].dump(),
                      cfg.anomalies.total()));
  o.check(m["verification"]["f1"] == 1.0, "f1", "verifier disagrees with injection labels");
  o.check(m["settlement"]["reconciled"].get<bool>(), "settlement", "trades do not reconcile");
  const auto broken = res.market->ledger().check_invariants();
  o.check(!broken, "ledger", broken.value_or(""));
  return o;
}

void print_generate(const Outcome& o) {
  const auto& s = o.summary;
  fmt::print("nodes={} records={} rejected={} trades={}\n", s["nodes"].get<std::size_t>(),
             s["records"].get<std::size_t>(), s["rejected"].get<std::size_t>(),
             s["trades"].get<std::size_t>());
}

Outcome run_verify(const Common& c) {
  const auto cfg = resolve_config(c, c.data_dir);
  const auto data = load_dataset(c.data_dir);
  const auto v = report::verify_records(data.records, cfg.market.tau);
  const auto bounds = report::recheck_bounds(data, cfg.bound);
  Outcome o;
  o.summary = report::to_json(v);
  o.summary["residuals"] = v.residuals ? report::to_json(*v.residuals) : json(nullptr);
  o.summary["verified_kWh"] = v.verified_kwh;
  o.summary["rejected_kWh"] = v.rejected_kwh;
  o.summary["bound_max_abs_dev_W"] = bounds.max_abs_dev_w;
  o.check(bounds.unknown_nodes == 0, "known_nodes",
          fmt::format("{} records reference nodes missing from {}", bounds.unknown_nodes, kNodesFile));
  // Stored bounds are written to 0.01 W.
  o.check(bounds.max_abs_dev_w <= 0.0051, "bound_recompute",
          fmt::format("stored P_max differs from recomputation by {:.4f} W", bounds.max_abs_dev_w));
  if (!(c.tau_opt && c.tau_opt->count())) {
    o.check(v.stored_status_mismatches == 0, "stored_status",
            fmt::format("{} stored statuses disagree at tau={}", v.stored_status_mismatches,
                        cfg.market.tau));
  }
  return o;
}

void print_verify(const Outcome& o) {
  const auto& s = o.summary;
  const auto& cm = s["confusion"];
  fmt::print("records={} verified={} rejected={} tau={}\n", s["records"].get<std::size_t>(),
             s["verified"].get<std::size_t>(), s["rejected"].get<std::size_t>(),
             s["tau"].get<double>());
  fmt::print("                 labelled  clean\n");
  fmt::print("  rejected       {:8d}  {:5d}\n", cm["tp"].get<int>(), cm["fp"].get<int>());
  fmt::print("  verified       {:8d}  {:5d}\n", cm["fn"].get<int>(), cm["tn"].get<int>());
  fmt::print("precision={:.3f} recall={:.3f} F1={:.3f}\n", s["precision"].get<double>(),
             s["recall"].get<double>(), s["f1"].get<double>());
  const auto& by = s["rejected_by_class"];
  fmt::print("night_time={} above_bound={} corrupted={}\n", by["night_time"].get<int>(),
             by["above_bound"].get<int>(), by["corrupted"].get<int>());
  if (!s["residuals"].is_null()) {
    const auto& r = s["residuals"];
    fmt::print("residuals: n={} r={:.4f} mean_ratio={:.4f} MAE={:.2f} W RMSE={:.2f} W\n",
               r["count"].get<std::size_t>(), r["pearson_r"].get<double>(),
               r["mean_ratio"].get<double>(), r["mae_W"].get<double>(), r["rmse_W"].get<double>());
  }
}

int trade_minute(const TradeRow& t, const MarketConfig& cfg) {
  const auto offset = t.timestamp.utc_seconds() - cfg.hour_start(t.hour).utc_seconds();
  if (offset < 0 || offset >= 3600) {
    throw ParseError(fmt::format("{}: timestamp {} is outside hour {}", t.trade_id,
                                 t.timestamp.to_iso(), t.hour));
  }
  return static_cast<int>(offset / 60);
}

Outcome run_simulate(const Common& c, const std::string& report_path, std::string csv_path) {
  const auto cfg = resolve_config(c, c.data_dir);
  const auto data = load_dataset(c.data_dir);
  MarketDay day(data.nodes, data.records, cfg.market);

  Outcome o;
  // Replay: each hour's step, then that hour's purchases in file order.
  std::size_t next = 0;
  for (int h = 0; h < 24; ++h) {
    day.apply_hour(h);
    for (; next < data.trades.size() && data.trades[next].hour == h; ++next) {
      const auto& t = data.trades[next];
      const auto got = day.buy(t.factory_id, t.energy_units, h, trade_minute(t, cfg.market));
      o.check(got.tokens_burned == t.tokens_burned, "trade_replay",
              fmt::format("{} burned {} wei, file says {}", t.trade_id, got.tokens_burned.to_string(),
                          t.tokens_burned.to_string()));
    }
  }
  o.check(next == data.trades.size(), "trade_order",
          fmt::format("{} trades are out of hour order", data.trades.size() - next));

  auto rep = report::build_report(day);
  o.check(rep["settlement"]["reconciled"].get<bool>(), "settlement",
          "trade totals do not match the ledger burn events");
  const auto hours = day.market_hours();
  for (const auto& h : hours) {
    o.check(h.solarchain_liquidity_mw >= h.baseline_liquidity_mw, "liquidity_order",
            fmt::format("hour {}: split pool below baseline", h.hour));
  }
  if (!data.market.empty()) {
    bool same = data.market.size() == hours.size();
    for (std::size_t i = 0; same && i < hours.size(); ++i) {
      same = std::fabs(data.market[i].solarchain_liquidity_mw - hours[i].solarchain_liquidity_mw) <= 1e-6 &&
             std::fabs(data.market[i].baseline_liquidity_mw - hours[i].baseline_liquidity_mw) <= 1e-6;
    }
    o.check(same, "market_csv", fmt::format("{} disagrees with the replayed market", kMarketFile));
  }

  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    out << rep.dump(2) << "\n";
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", report_path));
    if (csv_path.empty()) csv_path = (fs::path(report_path).parent_path() / kMarketFile).string();
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    write_market_csv(out, hours);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", csv_path));
  }
  o.summary = rep;
  o.summary["outputs"] = {{"report", report_path.empty() ? json(nullptr) : json(report_path)},
                          {"liquidity_csv", csv_path.empty() ? json(nullptr) : json(csv_path)}};
  return o;
}

void print_simulate(const Outcome& o) {
  const auto& s = o.summary;
  const auto& l = s["liquidity"];
  fmt::print("trades={} verified_kWh={:.2f} inflation_prevented={}\n",
             s["counts"]["trades"].get<std::size_t>(), s["energy"]["verified_kWh"].get<double>(),
             s["energy"]["inflation_prevented_pct"].is_null()
                 ? "n/a"
                 : fmt_pct(s["energy"]["inflation_prevented_pct"].get<double>()));
  fmt::print("liquidity: SolarChain {:.4f} MW baseline {:.4f} MW uplift {}\n",
             l["mean_SolarChain_liquidity_MW"].get<double>(),
             l["mean_baseline_liquidity_MW"].get<double>(), fmt_pct(l["uplift_pct"].get<double>()));
  fmt::print("slippage (daylight mean): SolarChain {} baseline {}; lower in {}/{} hours\n",
             fmt_pct(l["mean_slippage_SolarChain_pct"].get<double>()),
             fmt_pct(l["mean_slippage_baseline_pct"].get<double>()),
             l["hours_SolarChain_slippage_below_baseline"].get<int>(), l["hours"].get<int>());
  for (const auto& c : s["cities"]) {
    fmt::print("  {:<9} capacity={:7.2f} kW verified={:8.2f} kWh CF={}\n", c["city"].get<std::string>(),
               c["capacity_kW"].get<double>(), c["verified_kWh"].get<double>(),
               fmt_pct(c["capacity_factor_pct"].get<double>()));
  }
  fmt::print("settlement: burned {} SOLR, reconciled={}\n",
             s["settlement"]["totals"]["tokens_burned"].get<std::string>(),
             s["settlement"]["reconciled"].get<bool>() ? "yes" : "no");
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int run_serve(const Common& c, const std::string& host, int port, const std::string& assets) {
  api::ServiceOptions opts;
  opts.config = resolve_config(c, c.data_dir);
  api::Service service(opts);
  if (!c.data_dir.empty()) {
    service.load(load_dataset(c.data_dir));
  } else {
    service.generate(opts.config.seed);
  }
  api::Server server(service, assets.empty() ? std::nullopt : std::optional<fs::path>(assets));
  const int bound = server.bind(host, port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  if (c.json_out) {
    std::cout << json{{"listening", fmt::format("http://{}:{}", host, bound)}}.dump() << std::endl;
  } else {
    std::cout << fmt::format("listening on http://{}:{}", host, bound) << std::endl;
  }
  server.listen();
  g_stop = true;
  watcher.join();
  return 0;
}

int finish(const std::string& command, const Outcome& o, bool json_out,
           void (*print)(const Outcome&)) {
  const bool ok = o.failures.empty();
  if (json_out) {
    json j = o.summary;
    j["command"] = command;
    j["ok"] = ok;
    j["failures"] = failures_json(o);
    std::cout << j.dump(2) << "\n";
  } else {
    print(o);
  }
  if (!ok) {
    std::cerr << "FAIL " << json{{"command", command}, {"failures", failures_json(o)}}.dump() << "\n";
    return 1;
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_data, bool with_seed, bool with_tau) {
  sub->add_option("--config", c.config_file, "Benchmark config JSON")
      ->envname("SOLARCHAIN_CONFIG")
      ->check(CLI::ExistingFile);
  if (with_data) {
    sub->add_option("--data", c.data_dir, "Dataset directory")->envname("SOLARCHAIN_DATA");
  }
  if (with_seed) c.seed_opt = sub->add_option("--seed", c.seed, "RNG seed")->envname("SOLARCHAIN_SEED");
  if (with_tau) {
    c.tau_opt = sub->add_option("--tau", c.tau, "Verification threshold")->envname("SOLARCHAIN_TAU");
  }
  sub->add_flag("--json", c.json_out, "Machine-readable output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SolarChain benchmark, verifier, market simulator and API server"};
  app.require_subcommand(1);

  Common gen_c, ver_c, sim_c, srv_c;
  std::string out_dir, report_path, csv_path, host = "127.0.0.1", assets;
  int port = 8080;

  auto* gen = app.add_subcommand("generate", "Generate the benchmark and run the market day");
  add_common(gen, gen_c, false, true, true);
  gen->add_option("--out", out_dir, "Output directory");

  auto* ver = app.add_subcommand("verify", "Re-run verification on a dataset");
  add_common(ver, ver_c, true, false, true);
  ver->get_option("--data")->required();

  auto* sim = app.add_subcommand("simulate", "Replay 24 market steps and the trades of a dataset");
  add_common(sim, sim_c, true, false, true);
  sim->get_option("--data")->required();
  sim->add_option("--report", report_path, "Report JSON path");
  sim->add_option("--liquidity-csv", csv_path,
                  "Liquidity CSV path (default: market_liquidity.csv beside the report)");

  auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
  add_common(srv, srv_c, true, true, true);
  srv->add_option("--port", port, "Port (0 picks a free one)")
      ->envname("SOLARCHAIN_PORT")
      ->check(CLI::Range(0, 65535));
  srv->add_option("--host", host, "Bind address")->envname("SOLARCHAIN_HOST");
  srv->add_option("--assets", assets, "Static console build to serve under /")
      ->envname("SOLARCHAIN_ASSETS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (gen->parsed()) {
      if (!out_dir.empty()) fs::create_directories(out_dir);
      return finish(command, run_generate(gen_c, out_dir), gen_c.json_out, print_generate);
    }
    if (ver->parsed()) return finish(command, run_verify(ver_c), ver_c.json_out, print_verify);
    if (sim->parsed()) {
      return finish(command, run_simulate(sim_c, report_path, csv_path), sim_c.json_out,
                    print_simulate);
    }
    return run_serve(srv_c, host, port, assets);
  } catch (const std::exception& e) {
    std::string code = "Error";
    if (dynamic_cast<const SchemaMismatch*>(&e)) code = "SchemaMismatch";
    else if (dynamic_cast<const ParseError*>(&e)) code = "ParseError";
    else if (dynamic_cast<const benchgen::InfeasiblePlan*>(&e)) code = "InfeasiblePlan";
    else if (dynamic_cast<const MarketError*>(&e)) code = "MarketError";
    else if (dynamic_cast<const ledger::LedgerError*>(&e)) code = "LedgerError";
    else if (dynamic_cast<const std::invalid_argument*>(&e)) code = "InvalidArgument";
    std::cerr << "ERROR " << json{{"command", command}, {"code", code}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  }
}
