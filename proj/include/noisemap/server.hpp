#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "noisemap/error.hpp"
#include "noisemap/grid.hpp"
#include "noisemap/io.hpp"
#include "noisemap/mgrs.hpp"
#include "noisemap/reconstruct.hpp"

// after Eigen: <resolv.h>, pulled in by httplib, defines a macro named _res
#include <httplib.h>

namespace noisemap::server {

using json = nlohmann::json;

inline constexpr double kMinLaeq = -120.0;
inline constexpr double kMaxLaeq = 140.0;
inline constexpr int kFactPrecision = 10; ///< metres

/// Raw fact key: whole second and 10 m MGRS square.
struct FactKey
{
  std::int64_t second = 0;
  std::string mgrs;
  auto operator<=>(const FactKey&) const = default;
};

struct Fact
{
  EnergeticMean level;
  std::set<std::string> fingerprints; ///< records already merged into this fact
};

struct IngestResult
{
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
  std::vector<std::pair<std::size_t, std::string>> rejected; ///< (line, reason)
};

struct MapVersion
{
  std::uint64_t version = 0;
  Lattice window;
  Method method = Method::L1;
  bool failed = false;
  std::string error;
  NoiseProfile profile;
  std::vector<bool> measured; ///< per cell, true where binned data existed
  json diagnostics;
};

struct QueryRequest
{
  double min_lat = -90, min_lon = -180, max_lat = 90, max_lon = 180;
  double from = -std::numeric_limits<double>::infinity();
  double to = std::numeric_limits<double>::infinity();
  std::optional<Method> method;

  void validate() const
  {
    if (!(min_lat <= max_lat && min_lon <= max_lon))
      throw Error("bad_query", "bounding box is empty");
    if (!(from <= to))
      throw Error("bad_query", "time range is empty");
  }
};

struct QueryCell
{
  std::string mgrs;
  double lat = 0, lon = 0;
  double t = 0; ///< start of the temporal cell
  double laeq = 0;
  bool measured = false;
  std::uint64_t version = 0;
  std::size_t g = 0, t_index = 0;
};

/**
 * Raw fact store plus versioned maps. With a path, every accepted record and
 * every published map is appended to a JSON-lines log that is replayed on
 * construction.
 */
class Repository
{
public:
  explicit Repository(std::string path = {}) : path_(std::move(path))
  {
    maps_ = std::make_shared<const std::vector<std::shared_ptr<const MapVersion>>>();
    if (!path_.empty())
      replay();
  }

  IngestResult ingest(std::span<const SampleRecord> records)
  {
    IngestResult res;
    std::lock_guard lock(facts_mutex_);
    std::string log;
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        const auto outcome = ingest_locked(records[i]);
        if (outcome) {
          ++res.accepted;
          log += json{{"kind", "record"}, {"record", io::to_json(records[i])}}.dump() + '\n';
        } else {
          ++res.duplicates;
        }
      } catch (const Error& e) {
        res.rejected.emplace_back(i, e.what());
      }
    }
    append(log);
    return res;
  }

  IngestResult ingest(const SampleRecord& r) { return ingest(std::span<const SampleRecord>(&r, 1)); }

  std::size_t fact_count() const
  {
    std::lock_guard lock(facts_mutex_);
    return facts_.size();
  }

  std::optional<double> fact_level(std::int64_t second, const std::string& mgrs) const
  {
    std::lock_guard lock(facts_mutex_);
    auto it = facts_.find({second, mgrs});
    if (it == facts_.end())
      return std::nullopt;
    return it->second.level.value();
  }

  /// Facts binned onto a window lattice; several facts per cell pool energetically.
  SampleSet window_samples(const Lattice& w) const
  {
    w.validate();
    std::map<std::size_t, EnergeticMean> cells;
    std::lock_guard lock(facts_mutex_);
    for (const auto& [key, fact] : facts_) {
      const auto t = w.temporal_cell(static_cast<double>(key.second));
      if (!t)
        continue;
      std::optional<std::size_t> g;
      try {
        const auto c = geo::mgrs_to_latlon(geo::parse_mgrs(key.mgrs));
        g = w.spatial_cell(c.lat, c.lon);
      } catch (const Error&) {
        continue;
      }
      if (!g)
        continue;
      cells[w.index(*g, *t)].merge(fact.level);
    }
    std::vector<Sample> s;
    for (const auto& [idx, acc] : cells) {
      auto [g, t] = w.cell(idx);
      s.push_back({g, t, acc.value()});
    }
    return SampleSet(w, std::move(s));
  }

  /// Bins the window, reconstructs, and publishes a new version (marked failed on error).
  std::shared_ptr<const MapVersion> run_reconstruction(const Lattice& window, Method method,
                                                       const ReconOptions& opt = {})
  {
    std::lock_guard job(recon_mutex_); // jobs run one at a time
    const SampleSet s = window_samples(window);
    if (s.empty())
      throw Error("empty_window", "no facts fall inside the reconstruction window");
    auto v = std::make_shared<MapVersion>();
    v->window = window;
    v->method = method;
    v->measured.assign(window.size(), false);
    for (const auto& e : s.entries())
      v->measured[window.index(e.g, e.t)] = true;
    try {
      const ReconResult r = reconstruct(s, method, opt);
      v->profile = r.profile;
      v->diagnostics = io::diagnostics_json(r);
    } catch (const Error& e) {
      v->failed = true;
      v->error = std::string(e.code()) + ": " + e.what();
      v->profile = s.to_profile();
    }
    publish(v, true);
    return v;
  }

  std::vector<std::shared_ptr<const MapVersion>> versions() const { return *snapshot(); }

  std::shared_ptr<const MapVersion> version(std::uint64_t id) const
  {
    for (const auto& v : *snapshot())
      if (v->version == id)
        return v;
    return nullptr;
  }

  /// Cells of the newest successful map of each window that intersect the request.
  std::vector<QueryCell> query(const QueryRequest& q) const
  {
    q.validate();
    const auto maps = snapshot();
    std::map<std::string, std::shared_ptr<const MapVersion>> latest;
    for (const auto& v : *maps) {
      if (v->failed || (q.method && *q.method != v->method))
        continue;
      const std::string key = io::to_json(v->window).dump();
      auto& slot = latest[key];
      if (!slot || slot->version < v->version)
        slot = v;
    }
    std::vector<std::shared_ptr<const MapVersion>> chosen;
    for (const auto& [key, v] : latest)
      chosen.push_back(v);
    std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return a->version < b->version; });

    std::vector<QueryCell> out;
    for (const auto& v : chosen) {
      const Lattice& w = v->window;
      for (std::size_t g = 1; g <= w.n_s; ++g) {
        const auto c = w.cell_center(g);
        if (c.lat < q.min_lat || c.lat > q.max_lat || c.lon < q.min_lon || c.lon > q.max_lon)
          continue;
        const std::string mgrs = w.cell_mgrs(g).to_string();
        for (std::size_t t = 1; t <= w.n_t; ++t) {
          const double start = w.cell_start_time(t);
          if (start + w.period <= q.from || start > q.to)
            continue;
          const std::size_t idx = w.index(g, t);
          out.push_back({mgrs, c.lat, c.lon, start, v->profile.values[idx], v->measured[idx], v->version, g, t});
        }
      }
    }
    return out;
  }

private:
  using MapList = std::vector<std::shared_ptr<const MapVersion>>;

  static std::string fingerprint(const SampleRecord& r) { return io::to_json(r).dump(); }

  /// true when the record changed the store, false for an exact duplicate.
  bool ingest_locked(const SampleRecord& r)
  {
    r.validate();
    if (!(r.laeq >= kMinLaeq && r.laeq <= kMaxLaeq))
      throw Error("out_of_band", "laeq outside the [-120, 140] dBA sanity band");
    const auto idx = geo::latlon_to_mgrs(r.lat, r.lon, kFactPrecision);
    FactKey key{static_cast<std::int64_t>(std::floor(r.timestamp)), idx.to_string()};
    Fact& f = facts_[key];
    if (!f.fingerprints.insert(fingerprint(r)).second)
      return false;
    f.level.add(r.laeq);
    return true;
  }

  std::shared_ptr<const MapList> snapshot() const
  {
    std::lock_guard lock(maps_mutex_);
    return maps_;
  }

  void publish(const std::shared_ptr<MapVersion>& v, bool persist)
  {
    std::lock_guard lock(maps_mutex_);
    auto next = std::make_shared<MapList>(*maps_);
    if (persist)
      v->version = next_version_;
    next_version_ = std::max(next_version_, v->version + 1);
    next->push_back(v);
    maps_ = next;
    if (persist) {
      json j = {{"kind", "map"},
                {"version", v->version},
                {"window", io::to_json(v->window)},
                {"method", to_string(v->method)},
                {"failed", v->failed},
                {"error", v->error},
                {"profile", io::profile_csv(v->profile)},
                {"diagnostics", v->diagnostics}};
      std::string mask;
      for (bool b : v->measured)
        mask += b ? '1' : '0';
      j["measured"] = mask;
      append(j.dump() + '\n');
    }
  }

  void append(const std::string& text)
  {
    if (path_.empty() || text.empty())
      return;
    std::lock_guard lock(file_mutex_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out)
      throw Error("unwritable_file", "cannot append to store " + path_);
    out << text;
  }

  void replay()
  {
    std::ifstream probe(path_);
    if (!probe)
      return;
    const std::string text = io::read_file(path_);
    for (const auto& line : io::lines(text)) {
      const json j = io::parse_json(line, "store");
      const std::string kind = j.value("kind", "");
      if (kind == "record") {
        std::lock_guard lock(facts_mutex_);
        ingest_locked(io::record_from_json(j.at("record")));
      } else if (kind == "map") {
        auto v = std::make_shared<MapVersion>();
        v->version = j.at("version").get<std::uint64_t>();
        v->window = io::lattice_from_json(j.at("window"));
        v->method = method_from_string(j.at("method").get<std::string>());
        v->failed = j.value("failed", false);
        v->error = j.value("error", "");
        v->profile = io::profile_from_csv(j.at("profile").get<std::string>(), v->window);
        v->diagnostics = j.value("diagnostics", json::object());
        const std::string mask = j.value("measured", "");
        v->measured.assign(v->window.size(), false);
        for (std::size_t i = 0; i < mask.size() && i < v->measured.size(); ++i)
          v->measured[i] = mask[i] == '1';
        publish(v, false);
      }
    }
  }

  std::string path_;
  mutable std::mutex facts_mutex_;
  mutable std::mutex maps_mutex_;
  std::mutex recon_mutex_;
  std::mutex file_mutex_;
  std::map<FactKey, Fact> facts_;
  std::shared_ptr<const MapList> maps_;
  std::uint64_t next_version_ = 1;
};

// ---------------------------------------------------------------------------
// JSON views

inline json to_json(const IngestResult& r)
{
  json rej = json::array();
  for (const auto& [line, reason] : r.rejected)
    rej.push_back({{"line", line}, {"reason", reason}});
  return {{"accepted", r.accepted}, {"duplicates", r.duplicates}, {"rejected", rej}};
}

inline json to_json(const QueryCell& c)
{
  return {{"mgrs", c.mgrs}, {"lat", c.lat},        {"lon", c.lon},
          {"t", c.t},       {"laeq", c.laeq},      {"source", c.measured ? "measured" : "reconstructed"},
          {"version", c.version}};
}

inline json summary_json(const MapVersion& v)
{
  std::size_t measured = 0;
  for (bool b : v.measured)
    measured += b;
  return {{"version", v.version},   {"window", io::to_json(v.window)}, {"method", to_string(v.method)},
          {"failed", v.failed},     {"error", v.error},                {"measured_cells", measured},
          {"cells", v.window.size()}, {"diagnostics", v.diagnostics}};
}

/// Window JSON: lattice fields; `T` is accepted for the temporal width.
inline Lattice window_from_json(json j)
{
  if (j.contains("T") && !j.contains("period"))
    j["period"] = j["T"];
  return io::lattice_from_json(j);
}

/// Rebuilds the reconstructed profile of one window from query cells.
inline NoiseProfile profile_from_cells(std::span<const QueryCell> cells, const Lattice& w)
{
  NoiseProfile p(w);
  for (const auto& c : cells) {
    const auto g = w.spatial_cell(c.lat, c.lon);
    const auto t = w.temporal_cell(c.t + 0.5 * w.period);
    if (g && t)
      p.at(*g, *t) = c.laeq;
  }
  return p;
}

inline QueryCell cell_from_json(const json& j)
{
  QueryCell c;
  c.mgrs = j.at("mgrs").get<std::string>();
  c.lat = j.at("lat").get<double>();
  c.lon = j.at("lon").get<double>();
  c.t = j.at("t").get<double>();
  c.laeq = j.at("laeq").get<double>();
  c.measured = j.at("source").get<std::string>() == "measured";
  c.version = j.at("version").get<std::uint64_t>();
  return c;
}

// ---------------------------------------------------------------------------
// HTTP binding

inline QueryRequest query_from_params(const httplib::Request& req)
{
  QueryRequest q;
  if (req.has_param("bbox")) {
    const std::string b = req.get_param_value("bbox");
    const auto f = io::split(b);
    if (f.size() != 4)
      throw Error("bad_query", "bbox needs minlat,minlon,maxlat,maxlon");
    q.min_lat = io::parse_number(f[0]);
    q.min_lon = io::parse_number(f[1]);
    q.max_lat = io::parse_number(f[2]);
    q.max_lon = io::parse_number(f[3]);
  }
  if (req.has_param("from"))
    q.from = io::parse_number(req.get_param_value("from"));
  if (req.has_param("to"))
    q.to = io::parse_number(req.get_param_value("to"));
  if (req.has_param("method"))
    q.method = method_from_string(req.get_param_value("method"));
  return q;
}

/**
 * Endpoints:
 *   POST /records      JSON lines (or CSV) of records
 *   POST /reconstruct  {"window": {...lattice...}, "method": "l1"}
 *   GET  /noise        ?bbox=minlat,minlon,maxlat,maxlon&from=&to=&method=
 *   GET  /maps         published versions
 *   GET  /maps/<v>     one version's profile CSV
 */
class HttpServer
{
public:
  explicit HttpServer(Repository& repo, ReconOptions opt = {}) : repo_(repo), opt_(std::move(opt))
  {
    const auto fail = [](httplib::Response& res, int status, const Error& e) {
      res.status = status;
      res.set_content(io::error_json(e.code(), e.what()).dump(), "application/json");
    };
    http_.Post("/records", [this, fail](const httplib::Request& req, httplib::Response& res) {
      try {
        std::vector<SampleRecord> records;
        std::vector<std::pair<std::size_t, std::string>> parse_errors;
        std::size_t n = 0;
        const bool csv = req.body.find_first_not_of(" \t\r\n") != std::string::npos &&
                         req.body[req.body.find_first_not_of(" \t\r\n")] != '{';
        if (csv) {
          records = io::records_from_csv(req.body);
        } else {
          for (const auto& line : io::lines(req.body)) {
            try {
              records.push_back(io::record_from_json(io::parse_json(line, "record")));
            } catch (const Error& e) {
              parse_errors.emplace_back(n, e.what());
            }
            ++n;
          }
        }
        auto r = repo_.ingest(records);
        r.rejected.insert(r.rejected.end(), parse_errors.begin(), parse_errors.end());
        res.status = r.rejected.empty() ? 200 : (r.accepted + r.duplicates > 0 ? 207 : 400);
        res.set_content(to_json(r).dump(), "application/json");
      } catch (const Error& e) {
        fail(res, 400, e);
      }
    });
    http_.Post("/reconstruct", [this, fail](const httplib::Request& req, httplib::Response& res) {
      try {
        const json j = io::parse_json(req.body, "reconstruct request");
        if (!j.contains("window"))
          throw Error("schema_violation", "reconstruct request needs a window");
        const Lattice w = window_from_json(j.at("window"));
        const Method m = method_from_string(j.value("method", std::string("l1")));
        const auto v = repo_.run_reconstruction(w, m, opt_);
        res.status = v->failed ? 500 : 200;
        res.set_content(summary_json(*v).dump(), "application/json");
      } catch (const Error& e) {
        fail(res, e.code() == "empty_window" ? 409 : 400, e);
      }
    });
    http_.Get("/noise", [this, fail](const httplib::Request& req, httplib::Response& res) {
      try {
        json out = json::array();
        for (const auto& c : repo_.query(query_from_params(req)))
          out.push_back(to_json(c));
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        fail(res, 400, e);
      }
    });
    http_.Get("/maps", [this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& v : repo_.versions())
        out.push_back(summary_json(*v));
      res.set_content(out.dump(), "application/json");
    });
    http_.Get(R"(/maps/(\d+))", [this, fail](const httplib::Request& req, httplib::Response& res) {
      const auto v = repo_.version(std::stoull(req.matches[1]));
      if (!v)
        return fail(res, 404, Error("not_found", "no such map version"));
      res.set_content(io::profile_csv(v->profile), "text/csv");
    });
  }

  ~HttpServer() { stop(); }

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0)
  {
    port_ = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0)
      throw Error("bind_failed", "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port)
  {
    if (!http_.bind_to_port(host, port))
      throw Error("bind_failed", "cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
    http_.listen_after_bind();
  }

  void stop()
  {
    http_.stop();
    if (thread_.joinable())
      thread_.join();
  }

  int port() const { return port_; }

private:
  Repository& repo_;
  ReconOptions opt_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = -1;
};

/// Re-runs reconstruction of a fixed window every `interval`.
class Scheduler
{
public:
  Scheduler(Repository& repo, Lattice window, Method method, std::chrono::seconds interval)
    : repo_(repo), window_(window), method_(method), interval_(interval)
  {
    thread_ = std::thread([this] { loop(); });
  }

  ~Scheduler()
  {
    {
      std::lock_guard lock(m_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  std::size_t runs() const { return runs_; }

private:
  void loop()
  {
    std::unique_lock lock(m_);
    while (!cv_.wait_for(lock, interval_, [this] { return stop_; })) {
      lock.unlock();
      try {
        repo_.run_reconstruction(window_, method_);
      } catch (const Error&) {
        // empty windows are skipped until data arrives
      }
      ++runs_;
      lock.lock();
    }
  }

  Repository& repo_;
  Lattice window_;
  Method method_;
  std::chrono::seconds interval_;
  std::mutex m_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::atomic<std::size_t> runs_{0};
  std::thread thread_;
};

} // namespace noisemap::server
