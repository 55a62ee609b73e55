#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "noisemap/acoustics.hpp"
#include "noisemap/context.hpp"
#include "noisemap/error.hpp"
#include "noisemap/grid.hpp"
#include "noisemap/reconstruct.hpp"
#include "noisemap/simulate.hpp"
#include "noisemap/speech.hpp"

namespace noisemap::io {

using json = nlohmann::json;

/// Shortest text that parses back to the same double.
inline std::string format_number(double x)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_number(std::string_view s)
{
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("parse_error", "not a number: '" + std::string(s) + "'");
  return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = line.find(sep, start);
    out.push_back(trim(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos)
      break;
    start = p + 1;
  }
  return out;
}

inline bool is_header(std::string_view first_field)
{
  first_field = trim(first_field);
  return !first_field.empty() &&
         (std::isalpha(static_cast<unsigned char>(first_field.front())) || first_field.front() == '_');
}

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("unreadable_file", "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("unwritable_file", "cannot write " + path);
  out << text;
}

inline std::vector<std::string> lines(const std::string& text)
{
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r')
      l.pop_back();
    if (!trim(l).empty())
      out.push_back(l);
  }
  return out;
}

inline json parse_json(const std::string& text, const std::string& what)
{
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error("schema_violation", what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Lattice sidecar

inline json to_json(const Lattice& l)
{
  return {{"n_s", l.n_s}, {"n_t", l.n_t}, {"omega", l.omega}, {"period", l.period},
          {"t0", l.t0},   {"origin", l.origin.to_string()}};
}

inline Lattice lattice_from_json(const json& j)
{
  try {
    Lattice l;
    l.n_s = j.at("n_s").get<std::size_t>();
    l.n_t = j.at("n_t").get<std::size_t>();
    l.omega = j.value("omega", 10);
    l.period = j.value("period", 1.0);
    l.t0 = j.value("t0", 0.0);
    if (j.contains("origin"))
      l.origin = geo::parse_mgrs(j.at("origin").get<std::string>());
    else
      l.origin = geo::latlon_to_mgrs(j.value("origin_lat", 0.0), j.value("origin_lon", 0.0), l.omega);
    l.validate();
    return l;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("lattice: ") + e.what());
  }
}

/// Default lattice used when a command is given no sidecar: a road at 0 N 3 E.
inline Lattice default_lattice(std::size_t n_s, std::size_t n_t)
{
  Lattice l;
  l.n_s = n_s;
  l.n_t = n_t;
  l.origin = geo::latlon_to_mgrs(0.0, 3.0, l.omega);
  return l;
}

// ---------------------------------------------------------------------------
// Profiles: n_s rows by n_t columns, empty field = missing cell

inline std::string profile_csv(const NoiseProfile& p)
{
  std::string out;
  const auto& l = p.lattice;
  for (std::size_t g = 1; g <= l.n_s; ++g) {
    for (std::size_t t = 1; t <= l.n_t; ++t) {
      if (t > 1)
        out += ',';
      const double x = p.at(g, t);
      if (!std::isnan(x))
        out += format_number(x);
    }
    out += '\n';
  }
  return out;
}

inline NoiseProfile profile_from_csv(const std::string& text, const Lattice& l)
{
  const auto rows = lines(text);
  if (rows.size() != l.n_s)
    throw Error("schema_violation", "profile has " + std::to_string(rows.size()) + " rows, lattice expects " +
                                      std::to_string(l.n_s));
  NoiseProfile p(l);
  for (std::size_t g = 1; g <= l.n_s; ++g) {
    const auto f = split(rows[g - 1]);
    if (f.size() != l.n_t)
      throw Error("schema_violation", "profile row " + std::to_string(g) + " has " + std::to_string(f.size()) +
                                        " columns, lattice expects " + std::to_string(l.n_t));
    for (std::size_t t = 1; t <= l.n_t; ++t)
      if (!f[t - 1].empty())
        p.at(g, t) = parse_number(f[t - 1]);
  }
  return p;
}

/// Shape of a headerless CSV matrix (rows, columns of the first row).
inline std::pair<std::size_t, std::size_t> csv_shape(const std::string& text)
{
  const auto rows = lines(text);
  if (rows.empty())
    throw Error("schema_violation", "empty profile");
  return {rows.size(), split(rows.front()).size()};
}

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void save_profile(const std::string& path, const NoiseProfile& p)
{
  write_file(path, profile_csv(p));
  write_file(sidecar_path(path), to_json(p.lattice).dump(2) + "\n");
}

/// Loads a profile; the lattice comes from `lattice_path`, else `<path>.json`, else a default.
inline NoiseProfile load_profile(const std::string& path, const std::string& lattice_path = {})
{
  const std::string text = read_file(path);
  const std::string lp = lattice_path.empty() ? sidecar_path(path) : lattice_path;
  std::ifstream probe(lp);
  Lattice l;
  if (probe) {
    l = lattice_from_json(parse_json(read_file(lp), lp));
  } else {
    if (!lattice_path.empty())
      throw Error("unreadable_file", "cannot open " + lattice_path);
    auto [r, c] = csv_shape(text);
    l = default_lattice(r, c);
  }
  return profile_from_csv(text, l);
}

// ---------------------------------------------------------------------------
// Sample sets: g,t,laeq

inline std::string samples_csv(const SampleSet& s)
{
  std::string out = "g,t,laeq\n";
  for (const auto& e : s.entries())
    out += std::to_string(e.g) + ',' + std::to_string(e.t) + ',' + format_number(e.x) + '\n';
  return out;
}

inline SampleSet samples_from_csv(const std::string& text, const Lattice& l)
{
  std::vector<Sample> s;
  for (const auto& row : lines(text)) {
    const auto f = split(row);
    if (is_header(f.front()))
      continue;
    if (f.size() < 3)
      throw Error("schema_violation", "sample rows need g,t,laeq");
    const double g = parse_number(f[0]), t = parse_number(f[1]);
    if (g < 1 || t < 1 || g != std::floor(g) || t != std::floor(t))
      throw Error("bad_sample", "sample indices must be positive integers");
    s.push_back({static_cast<std::size_t>(g), static_cast<std::size_t>(t), parse_number(f[2])});
  }
  return SampleSet(l, std::move(s));
}

// ---------------------------------------------------------------------------
// Records: JSON lines {"t","lat","lon","laeq"[,"device_id"]} or CSV t,lat,lon,laeq[,device_id]

inline json to_json(const SampleRecord& r)
{
  json j = {{"t", r.timestamp}, {"lat", r.lat}, {"lon", r.lon}, {"laeq", r.laeq}};
  if (!r.device_id.empty())
    j["device_id"] = r.device_id;
  return j;
}

inline SampleRecord record_from_json(const json& j)
{
  try {
    SampleRecord r;
    r.timestamp = j.at("t").get<double>();
    r.lat = j.at("lat").get<double>();
    r.lon = j.at("lon").get<double>();
    r.laeq = j.at("laeq").get<double>();
    r.device_id = j.value("device_id", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("record: ") + e.what());
  }
}

inline std::string records_jsonl(std::span<const SampleRecord> rs)
{
  std::string out;
  for (const auto& r : rs)
    out += to_json(r).dump() + '\n';
  return out;
}

inline std::vector<SampleRecord> records_from_jsonl(const std::string& text)
{
  std::vector<SampleRecord> out;
  for (const auto& l : lines(text))
    out.push_back(record_from_json(parse_json(l, "record")));
  return out;
}

inline std::vector<SampleRecord> records_from_csv(const std::string& text)
{
  std::vector<SampleRecord> out;
  for (const auto& row : lines(text)) {
    const auto f = split(row);
    if (is_header(f.front()))
      continue;
    if (f.size() < 4)
      throw Error("schema_violation", "record rows need t,lat,lon,laeq");
    SampleRecord r{parse_number(f[0]), parse_number(f[1]), parse_number(f[2]), parse_number(f[3]),
                   f.size() > 4 ? std::string(f[4]) : std::string{}};
    out.push_back(r);
  }
  return out;
}

/// JSON lines unless the first non-blank character says otherwise.
inline std::vector<SampleRecord> records_from_text(const std::string& text)
{
  const auto p = text.find_first_not_of(" \t\r\n");
  if (p != std::string::npos && text[p] != '{')
    return records_from_csv(text);
  return records_from_jsonl(text);
}

// ---------------------------------------------------------------------------
// Profile specs. Accepts {"n_s","n_t","rho","mean","std","seed"}; rho may be
// given as "dct_percent" (a percentage) so percentage columns can be pasted directly.

inline ProfileSpec spec_from_json(const json& j)
{
  try {
    ProfileSpec s;
    s.n_s = j.value("n_s", s.n_s);
    s.n_t = j.value("n_t", s.n_t);
    s.mean = j.value("mean", s.mean);
    s.std = j.value("std", s.std);
    if (j.contains("rho"))
      s.rho = j.at("rho").get<double>();
    else if (j.contains("dct_percent"))
      s.rho = j.at("dct_percent").get<double>() / 100.0;
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("profile spec: ") + e.what());
  }
}

inline std::vector<ProfileSpec> specs_from_json(const json& j)
{
  std::vector<ProfileSpec> out;
  if (j.is_array())
    for (const auto& e : j)
      out.push_back(spec_from_json(e));
  else
    out.push_back(spec_from_json(j));
  return out;
}

// ---------------------------------------------------------------------------
// Acoustics

inline std::string leq_csv(std::span<const LeqReading> rs)
{
  std::string out = "timestamp,laeq_dba,interval_s\n";
  for (const auto& r : rs)
    out += format_number(r.timestamp) + ',' + format_number(r.laeq) + ',' + format_number(r.interval_s) + '\n';
  return out;
}

inline std::vector<LeqReading> leq_from_csv(const std::string& text)
{
  std::vector<LeqReading> out;
  for (const auto& row : lines(text)) {
    const auto f = split(row);
    if (is_header(f.front()))
      continue;
    if (f.size() < 2)
      throw Error("schema_violation", "Leq rows need timestamp,laeq_dba[,interval_s]");
    LeqReading r;
    r.timestamp = parse_number(f[0]);
    r.laeq = parse_number(f[1]);
    r.interval_s = f.size() > 2 ? parse_number(f[2]) : 1.0;
    out.push_back(r);
  }
  return out;
}

inline json to_json(const CalibrationOffset& c)
{
  return {{"device_id", c.device_id}, {"delta", c.delta}, {"estimated_at", c.estimated_at},
          {"tone_version", c.tone_version}};
}

inline CalibrationOffset offset_from_json(const json& j)
{
  try {
    CalibrationOffset c;
    c.delta = j.at("delta").get<double>();
    c.device_id = j.value("device_id", std::string{});
    c.estimated_at = j.value("estimated_at", 0.0);
    c.tone_version = j.value("tone_version", c.tone_version);
    return c;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("calibration offset: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Classifier models

inline json to_json(const speech::SpeechThreshold& t)
{
  return {{"theta", t.theta}, {"trained_voiced", t.trained_voiced}, {"trained_noise", t.trained_noise}};
}

inline speech::SpeechThreshold speech_model_from_json(const json& j)
{
  try {
    speech::SpeechThreshold t;
    t.theta = j.at("theta").get<double>();
    t.trained_voiced = j.value("trained_voiced", std::size_t{0});
    t.trained_noise = j.value("trained_noise", std::size_t{0});
    return t;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("speech model: ") + e.what());
  }
}

struct ContextModel
{
  context::KnnModel knn;
  context::ClassifierConfig config;
};

inline json to_json(const ContextModel& m)
{
  json pairs = json::array();
  for (const auto& p : m.knn.training)
    pairs.push_back({{"feature", p.feature}, {"label", context::to_string(p.label)}});
  return {{"training", pairs},
          {"k", m.knn.k},
          {"feature_kind", context::to_string(m.knn.feature_kind)},
          {"threshold", m.config.prox_threshold},
          {"use_proximity", m.config.use_proximity},
          {"delta_s", m.config.delta_s}};
}

inline ContextModel context_model_from_json(const json& j)
{
  try {
    ContextModel m;
    for (const auto& p : j.at("training"))
      m.knn.training.push_back({p.at("feature").get<double>(),
                                context::label_from_string(p.at("label").get<std::string>())});
    m.knn.k = j.value("k", 5);
    m.knn.feature_kind = context::feature_from_string(j.value("feature_kind", std::string("mean")));
    m.config.k = m.knn.k;
    m.config.feature_kind = m.knn.feature_kind;
    m.config.prox_threshold = j.value("threshold", m.config.prox_threshold);
    m.config.use_proximity = j.value("use_proximity", true);
    m.config.delta_s = j.value("delta_s", 60.0);
    m.knn.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error("schema_violation", std::string("context model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reconstruction diagnostics

inline json diagnostics_json(const ReconResult& r)
{
  json j = {{"method", to_string(r.method)}, {"notes", r.notes}};
  if (r.method == Method::L1)
    j["solver"] = {{"iterations", r.solver.iterations},
                   {"primal_residual", r.solver.primal_residual},
                   {"dual_residual", r.solver.dual_residual},
                   {"constraint_residual", r.solver.constraint_residual},
                   {"epsilon", r.solver.epsilon},
                   {"converged", r.solver.converged}};
  if (r.linear)
    j["linear"] = {{"a", r.linear->a}, {"b", r.linear->b}, {"c", r.linear->c},
                   {"residual_rms", r.linear->residual_rms}};
  if (r.metric)
    j["metric"] = {{"a", r.metric->a}, {"b", r.metric->b}, {"loo_rms", r.metric->loo_rms}};
  if (r.gp)
    j["gp"] = {{"length_g", r.gp->length_g},     {"length_t", r.gp->length_t},
               {"signal_var", r.gp->signal_var}, {"noise_var", r.gp->noise_var},
               {"mean", r.gp->mean},             {"log_marginal", r.gp->log_marginal}};
  return j;
}

inline json error_json(const std::string& code, const std::string& message)
{
  return {{"error", code}, {"message", message}};
}

} // namespace noisemap::io
