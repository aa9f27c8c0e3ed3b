#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "solarchain/benchgen.hpp"
#include "solarchain/dataset.hpp"
#include "solarchain/market_day.hpp"

namespace httplib {
class Server;
}

namespace solarchain::api {

/// Transport-neutral request. Header names are matched case-insensitively.
struct Request {
  std::string method;  // GET, POST
  std::string path;    // /api/records
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;

  std::optional<std::string> header(const std::string& name) const;
};

struct Response {
  int status = 200;
  nlohmann::json body;
  std::map<std::string, std::string> headers;
};

enum class Role { planner, pv_owner, factory_owner };
std::optional<Role> parse_role(std::string_view s);

inline constexpr const char* kAccountHeader = "X-Account";
inline constexpr const char* kRoleHeader = "X-Role";

struct ServiceOptions {
  /// Used for market configuration and for POST /api/benchmark.
  benchgen::BenchmarkConfig config;
  int default_page_size = 100;
  int max_page_size = 1000;
};

/// JSON facade over one benchmark and its market day.
///
/// Reads take a shared lock and see a consistent snapshot; every mutation
/// holds the exclusive lock for its whole duration, so a market step or a
/// purchase is never observed half-applied. Simulation time only comes from
/// hours supplied in request bodies.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  /// Replaces the benchmark with `data` (nodes + records) and starts a fresh
  /// market day. Market and trade rows in `data` are ignored.
  void load(Dataset data);
  /// Generates the benchmark for `seed` with the configured parameters.
  void generate(std::uint64_t seed);
  bool loaded() const;

  Response handle(const Request& request);

  /// Read-only access to the market day under the shared lock.
  template <class F>
  auto inspect(F&& f) const {
    auto lock = read_lock();
    return f(static_cast<const MarketDay*>(day_.get()));
  }

 private:
  struct Route;
  struct Context;

  Response dispatch(const Request& request);
  void install_routes();
  void reset(std::vector<physics::NodeSpec> nodes, std::vector<GenerationRecord> records);
  // A writer holds the turnstile while it waits, so new readers queue behind
  // it instead of starving it.
  std::shared_lock<std::shared_mutex> read_lock() const;
  std::unique_lock<std::shared_mutex> write_lock() const;

  ServiceOptions options_;
  mutable std::mutex turnstile_;
  mutable std::shared_mutex mutex_;
  std::unique_ptr<MarketDay> day_;
  std::vector<std::size_t> by_node_hour_;  // record indices sorted by (node_id, hour)
  std::vector<Route> routes_;
};

/// Error body shared by every non-2xx response.
nlohmann::json error_body(std::string_view code, std::string_view message,
                          nlohmann::json details = nlohmann::json::object());

/// HTTP binding of a Service. Optionally serves static files (the console
/// build) from `assets_dir` under "/".
class Server {
 public:
  Server(Service& service, std::optional<std::filesystem::path> assets_dir = std::nullopt);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds to `host:port`; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace solarchain::api
