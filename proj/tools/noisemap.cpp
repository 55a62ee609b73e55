// noisemap: command line front end for every pipeline stage.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "noisemap/acoustics.hpp"
#include "noisemap/basis.hpp"
#include "noisemap/context.hpp"
#include "noisemap/io.hpp"
#include "noisemap/reconstruct.hpp"
#include "noisemap/server.hpp"
#include "noisemap/simulate.hpp"
#include "noisemap/speech.hpp"
#include "noisemap/wav.hpp"

using namespace noisemap;
using json = nlohmann::json;

namespace {

void emit(const std::string& path, const std::string& text)
{
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::write_file(path, text);
}

PcmFrame load_audio(const std::string& path, int raw_rate)
{
  return raw_rate > 0 ? wav::read_raw_f32(path, raw_rate) : wav::read(path);
}

std::vector<double> parse_list(const std::string& s)
{
  std::vector<double> out;
  for (auto f : io::split(s))
    out.push_back(io::parse_number(f));
  if (out.empty())
    throw Error("bad_arguments", "empty list");
  return out;
}

std::vector<Method> parse_methods(const std::string& s)
{
  if (s == "all")
    return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<Method> out;
  for (auto f : io::split(s))
    out.push_back(method_from_string(std::string(io::trim(f))));
  return out;
}

ProfileSpec load_spec(const std::string& path, std::size_t row)
{
  const auto specs = io::specs_from_json(io::parse_json(io::read_file(path), path));
  if (row >= specs.size())
    throw Error("bad_arguments", "spec file has " + std::to_string(specs.size()) + " row(s)");
  return specs[row];
}

// t,z,prox_state[,label]
struct TraceRow
{
  context::TraceSample s;
  std::optional<context::Label> label;
};

std::vector<TraceRow> read_trace(const std::string& path)
{
  std::vector<TraceRow> out;
  for (const auto& line : io::lines(io::read_file(path))) {
    const auto f = io::split(line);
    if (io::is_header(f.front()))
      continue;
    if (f.size() < 3)
      throw Error("schema_violation", "trace rows need t,z,prox_state");
    TraceRow r;
    r.s.t = io::parse_number(f[0]);
    r.s.z = io::parse_number(f[1]);
    r.s.prox_state = io::parse_number(f[2]) != 0.0 ? 1 : 0;
    if (f.size() > 3)
      r.label = context::label_from_string(std::string(io::trim(f[3])));
    out.push_back(r);
  }
  return out;
}

std::vector<std::optional<context::SensorWindow>> trace_windows(const std::vector<TraceRow>& rows,
                                                                double delta_s)
{
  std::vector<context::TraceSample> t;
  for (const auto& r : rows)
    t.push_back(r.s);
  return context::window_trace(t, delta_s);
}

std::string env_or(const char* name, const std::string& fallback)
{
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

// ---------------------------------------------------------------------------

struct ToneArgs
{
  std::string write_tone, recording, reference, out, device_id;
  int raw_rate = 0;
  double estimated_at = 0.0;
};

void run_calibrate(const ToneArgs& a)
{
  if (a.write_tone.empty() && a.recording.empty())
    throw Error("bad_arguments", "give --write-tone and/or --recording");
  if (!a.write_tone.empty())
    wav::write(a.write_tone, generate_calibration_tone());
  if (a.recording.empty())
    return;
  if (a.reference.empty())
    throw Error("bad_arguments", "--recording needs --reference");
  const auto recorded = leq_series(load_audio(a.recording, a.raw_rate), {});
  std::map<long long, double> ref;
  for (const auto& r : io::leq_from_csv(io::read_file(a.reference)))
    ref[std::llround(r.timestamp)] = r.laeq;
  std::vector<LeqReading> used;
  std::vector<double> levels;
  for (const auto& r : recorded) {
    const auto it = ref.find(std::llround(r.timestamp));
    if (tone_active_second(r.timestamp) && it != ref.end()) {
      used.push_back(r);
      levels.push_back(it->second);
    }
  }
  if (used.empty())
    throw Error("no_overlap", "no tone-on second appears in both recording and reference");
  auto off = estimate_offset(used, levels);
  off.device_id = a.device_id;
  off.estimated_at = a.estimated_at;
  json j = io::to_json(off);
  j["spread_db"] = off.spread_db;
  j["seconds_used"] = used.size();
  emit(a.out, j.dump(2) + "\n");
  if (off.failed)
    throw Error("calibration_failed", "per-second differences spread " + io::format_number(off.spread_db) + " dB");
}

struct LeqArgs
{
  std::string wav, offset, out;
  int raw_rate = 0;
  double interval = 1.0;
};

void run_leq(const LeqArgs& a)
{
  CalibrationOffset off;
  if (!a.offset.empty())
    off = io::offset_from_json(io::parse_json(io::read_file(a.offset), a.offset));
  emit(a.out, io::leq_csv(leq_series(load_audio(a.wav, a.raw_rate), off, a.interval)));
}

struct SpeechArgs
{
  std::vector<std::string> wavs, train_voiced, train_noise;
  std::string model, save_model, out;
  int raw_rate = 0;
  double window = speech::kWindowSeconds;
};

std::vector<speech::SpectralFeature> features_of(const std::vector<std::string>& files, int raw_rate,
                                                 double window)
{
  std::vector<speech::SpectralFeature> out;
  for (const auto& f : files)
    for (const auto& w : speech::split_windows(load_audio(f, raw_rate), window))
      out.push_back(speech::spectral_median(w));
  return out;
}

void run_speech(const SpeechArgs& a)
{
  speech::SpeechThreshold th;
  if (!a.train_voiced.empty() || !a.train_noise.empty()) {
    th = speech::train_threshold(features_of(a.train_voiced, a.raw_rate, a.window),
                                 features_of(a.train_noise, a.raw_rate, a.window));
    if (!a.save_model.empty())
      io::write_file(a.save_model, io::to_json(th).dump(2) + "\n");
  } else if (!a.model.empty()) {
    th = io::speech_model_from_json(io::parse_json(io::read_file(a.model), a.model));
  } else {
    throw Error("bad_arguments", "give --model or training audio");
  }
  if (a.wavs.empty()) {
    if (a.save_model.empty())
      emit(a.out, io::to_json(th).dump(2) + "\n");
    return;
  }
  std::string csv = "window_start,feature,label\n";
  for (const auto& f : features_of(a.wavs, a.raw_rate, a.window))
    csv += io::format_number(f.window_start) + ',' + io::format_number(f.median_amp) + ',' +
           speech::to_string(speech::classify(f, th)) + '\n';
  emit(a.out, csv);
}

struct ContextArgs
{
  std::string trace, model, train, save_model, out, feature = "mean";
  int k = 5;
  int threshold = context::kDefaultProximityThreshold;
  double delta = 60.0;
  bool no_proximity = false;
};

void run_context(const ContextArgs& a, const CLI::App& app)
{
  io::ContextModel m;
  if (!a.model.empty())
    m = io::context_model_from_json(io::parse_json(io::read_file(a.model), a.model));
  // flags override file values
  if (a.model.empty() || app.count("--k"))
    m.config.k = a.k;
  if (a.model.empty() || app.count("--feature"))
    m.config.feature_kind = context::feature_from_string(a.feature);
  if (a.model.empty() || app.count("--threshold"))
    m.config.prox_threshold = a.threshold;
  if (a.model.empty() || app.count("--delta"))
    m.config.delta_s = a.delta;
  if (a.no_proximity)
    m.config.use_proximity = false;

  if (!a.train.empty()) {
    const auto rows = read_trace(a.train);
    const auto windows = trace_windows(rows, m.config.delta_s);
    // a window takes the label of its first row
    std::vector<context::LabelledWindow> data;
    std::size_t row = 0;
    for (const auto& w : windows) {
      if (!w)
        continue;
      while (rows[row].s.t < w->start)
        ++row;
      if (!rows[row].label)
        throw Error("schema_violation", "training trace rows need a label column");
      data.push_back({*w, *rows[row].label});
    }
    m.knn = context::build_model(data, m.config);
  } else if (a.model.empty()) {
    throw Error("bad_arguments", "give --model or --train");
  }
  m.knn.k = m.config.k;
  if (m.knn.feature_kind != m.config.feature_kind)
    throw Error("bad_arguments", "--feature differs from the feature the model was trained on");
  m.knn.validate();
  if (!a.save_model.empty())
    io::write_file(a.save_model, io::to_json(m).dump(2) + "\n");
  if (a.trace.empty()) {
    if (a.save_model.empty())
      throw Error("bad_arguments", "give --trace to classify or --save-model");
    return;
  }
  const auto rows = read_trace(a.trace);
  const auto windows = trace_windows(rows, m.config.delta_s);
  const auto labels = context::detect_switch(m.knn, m.config, windows);
  std::string csv = "window_start,label\n";
  for (std::size_t i = 0; i < windows.size(); ++i)
    csv += io::format_number(rows.front().s.t + static_cast<double>(i) * m.config.delta_s) + ',' +
           context::to_string(labels[i]) + '\n';
  emit(a.out, csv);
}

struct SimArgs
{
  std::string spec, samples_out, truth_out;
  std::size_t row = 0, agents = 5;
  double prob = 0.6, noise_std = 0.0, v_max = 1.31;
  std::optional<double> missing;
  std::uint64_t seed = 42;
};

void run_simulate(const SimArgs& a)
{
  const auto spec = load_spec(a.spec, a.row);
  const auto truth = synth_profile(spec, io::default_lattice(spec.n_s, spec.n_t)).profile;
  SampleSet s;
  if (a.missing) {
    s = mask_uniform(truth, *a.missing, a.seed);
  } else {
    MobilityParams mp;
    mp.v_max = a.v_max;
    s = run_campaign(a.agents, truth, mp, a.prob, a.seed, a.noise_std).samples;
  }
  if (!a.truth_out.empty())
    io::save_profile(a.truth_out, truth);
  emit(a.samples_out, io::samples_csv(s));
}

struct ReconArgs
{
  std::string samples, lattice, method = "l1", out, diagnostics, truth;
  std::optional<double> eps;
  int max_iter = 10000;
};

void run_reconstruct(const ReconArgs& a)
{
  const Lattice l = io::lattice_from_json(io::parse_json(io::read_file(a.lattice), a.lattice));
  const auto s = io::samples_from_csv(io::read_file(a.samples), l);
  ReconOptions opt;
  opt.l1.epsilon = a.eps;
  opt.l1.max_iterations = a.max_iter;
  const auto r = reconstruct(s, method_from_string(a.method), opt);
  json diag = io::diagnostics_json(r);
  diag["observed"] = s.size();
  diag["cells"] = l.size();
  if (!a.truth.empty())
    diag["rms_error"] = rms_error(r.profile, io::load_profile(a.truth, a.lattice));
  emit(a.out, io::profile_csv(r.profile));
  std::string dpath = a.diagnostics;
  if (dpath.empty() && !a.out.empty() && a.out != "-")
    dpath = a.out + ".diagnostics.json";
  if (!dpath.empty())
    io::write_file(dpath, diag.dump(2) + "\n");
}

struct SweepArgs
{
  std::string truth, lattice, spec, config, out, missing = "0.3,0.5,0.7,0.9", methods = "all";
  std::size_t row = 0;
  int trials = 20;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

void run_sweep(SweepArgs a, const CLI::App& app)
{
  if (!a.config.empty()) {
    const json c = io::parse_json(io::read_file(a.config), a.config);
    const auto take = [&](const char* key, const char* flag, auto& field) {
      if (c.contains(key) && !app.count(flag))
        field = c.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    try {
      take("truth", "--truth", a.truth);
      take("lattice", "--lattice", a.lattice);
      take("profile_spec", "--profile-spec", a.spec);
      take("row", "--row", a.row);
      take("trials", "--trials", a.trials);
      take("seed", "--seed", a.seed);
      take("out", "--out", a.out);
      if (c.contains("missing") && !app.count("--missing")) {
        a.missing.clear();
        for (const auto& f : c.at("missing"))
          a.missing += (a.missing.empty() ? "" : ",") + io::format_number(f.get<double>());
      }
      if (c.contains("methods") && !app.count("--methods")) {
        const auto& m = c.at("methods");
        a.methods = m.is_string() ? m.get<std::string>() : "";
        if (m.is_array())
          for (const auto& e : m)
            a.methods += (a.methods.empty() ? "" : ",") + e.get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error("schema_violation", std::string("experiment config: ") + e.what());
    }
  }
  if (a.trials < 1)
    throw Error("bad_arguments", "trials must be at least 1");
  if (a.truth.empty() == a.spec.empty())
    throw Error("bad_arguments", "give exactly one of --truth and --profile-spec");
  const auto fracs = parse_list(a.missing);
  for (double f : fracs)
    if (!(f >= 0.0 && f < 1.0))
      throw Error("bad_fraction", "missing fractions must lie in [0, 1)");
  const auto methods = parse_methods(a.methods);
  NoiseProfile truth;
  if (!a.truth.empty()) {
    truth = io::load_profile(a.truth, a.lattice);
  } else {
    const auto spec = load_spec(a.spec, a.row);
    truth = synth_profile(spec, io::default_lattice(spec.n_s, spec.n_t)).profile;
  }
  if (!truth.complete())
    throw Error("undefined_cells", "sweep needs a fully defined truth profile");

  struct Task
  {
    Method m;
    double frac;
    int trial;
    double err = 0.0;
    std::string error;
  };
  std::vector<Task> tasks;
  for (Method m : methods)
    for (double f : fracs)
      for (int t = 0; t < a.trials; ++t)
        tasks.push_back({m, f, t});

  ReconOptions opt;
  opt.gp.compute_std = false; // only the RMS is reported
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) {
      auto& k = tasks[i];
      // mask depends on (fraction, trial) only, so every method sees the same samples
      const std::uint64_t mseed = a.seed * 1000003u + 1000u * static_cast<std::uint64_t>(k.trial) +
                                  static_cast<std::uint64_t>(std::llround(k.frac * 100.0));
      try {
        k.err = rms_error(reconstruct(mask_uniform(truth, k.frac, mseed), k.m, opt).profile, truth);
      } catch (const Error& e) {
        k.error = std::string(e.code()) + ": " + e.what();
      }
    }
  };
  const unsigned n = std::max(1u, a.workers ? a.workers : std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < n; ++i)
    pool.emplace_back(work);
  work();
  for (auto& t : pool)
    t.join();

  std::string csv = "method,missing_frac,trial,rms_error\n";
  for (const auto& k : tasks) {
    if (!k.error.empty())
      throw Error("reconstruction_failed", k.error);
    csv += std::string(to_string(k.m)) + ',' + io::format_number(k.frac) + ',' + std::to_string(k.trial) + ',' +
           io::format_number(k.err) + '\n';
  }
  emit(a.out, csv);
}

struct CompressArgs
{
  std::string profile, lattice, out, magnitudes, layout = "flat";
  std::vector<double> targets{1.0};
};

void run_compress(const CompressArgs& a)
{
  if (a.layout != "flat" && a.layout != "separable")
    throw Error("bad_arguments", "layout must be flat or separable");
  const auto p = io::load_profile(a.profile, a.lattice);
  const auto rep = compressibility(p, a.targets,
                                   a.layout == "flat" ? DctBasis::Layout::Flat : DctBasis::Layout::Separable);
  json t = json::array();
  for (const auto& [target, k] : rep.counts)
    t.push_back({{"target_dba", target}, {"coefficients", k}, {"fraction", rep.fractions.at(target)}});
  const json j = {{"cells", rep.n}, {"layout", a.layout}, {"targets", t}};
  emit(a.out, j.dump(2) + "\n");
  if (!a.magnitudes.empty()) {
    std::string csv = "rank,magnitude\n";
    for (std::size_t i = 0; i < rep.sorted_magnitudes.size(); ++i)
      csv += std::to_string(i + 1) + ',' + io::format_number(rep.sorted_magnitudes[i]) + '\n';
    io::write_file(a.magnitudes, csv);
  }
}

struct ServeArgs
{
  std::string host = "127.0.0.1", store, window, method = "l1";
  int port = 8080;
  long interval = 3600;
};

void run_serve(ServeArgs a, const CLI::App& app)
{
  // flag > environment > default
  if (!app.count("--port"))
    a.port = static_cast<int>(io::parse_number(env_or("NOISEMAP_PORT", std::to_string(a.port))));
  if (!app.count("--store"))
    a.store = env_or("NOISEMAP_STORE", a.store);
  server::Repository repo(a.store);
  server::HttpServer http(repo);
  std::optional<server::Scheduler> sched;
  if (!a.window.empty()) {
    if (a.interval < 1)
      throw Error("bad_arguments", "interval must be at least one second");
    const auto w = server::window_from_json(io::parse_json(io::read_file(a.window), a.window));
    sched.emplace(repo, w, method_from_string(a.method), std::chrono::seconds(a.interval));
  }
  std::clog << json{{"listening", a.host + ":" + std::to_string(a.port)}, {"store", a.store}}.dump() << std::endl;
  http.run(a.host, a.port);
}

struct QueryArgs
{
  std::string store, url, bbox, method, out;
  std::optional<double> from, to;
};

void run_query(const QueryArgs& a)
{
  if (a.store.empty() == a.url.empty())
    throw Error("bad_arguments", "give exactly one of --store and --url");
  if (!a.url.empty()) {
    httplib::Params params;
    if (!a.bbox.empty())
      params.emplace("bbox", a.bbox);
    if (a.from)
      params.emplace("from", io::format_number(*a.from));
    if (a.to)
      params.emplace("to", io::format_number(*a.to));
    if (!a.method.empty())
      params.emplace("method", a.method);
    httplib::Client cli(a.url);
    const auto res = cli.Get("/noise", params, httplib::Headers{});
    if (!res)
      throw Error("unreachable", "no response from " + a.url);
    if (res->status != 200) {
      const json e = io::parse_json(res->body, "server error");
      throw Error(e.value("error", std::string("http_error")), e.value("message", res->body));
    }
    emit(a.out, io::parse_json(res->body, "query result").dump(2) + "\n");
    return;
  }
  if (!std::filesystem::exists(a.store))
    throw Error("unreadable_file", "cannot open " + a.store);
  server::QueryRequest q;
  if (!a.bbox.empty()) {
    const auto b = parse_list(a.bbox);
    if (b.size() != 4)
      throw Error("bad_query", "bbox needs minlat,minlon,maxlat,maxlon");
    q.min_lat = b[0];
    q.min_lon = b[1];
    q.max_lat = b[2];
    q.max_lon = b[3];
  }
  if (a.from)
    q.from = *a.from;
  if (a.to)
    q.to = *a.to;
  if (!a.method.empty())
    q.method = method_from_string(a.method);
  const server::Repository repo(a.store);
  json arr = json::array();
  for (const auto& c : repo.query(q))
    arr.push_back(server::to_json(c));
  emit(a.out, arr.dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"noisemap: calibrated participatory noise mapping"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  ToneArgs tone;
  auto* c_tone = app.add_subcommand("calibrate-tone", "write the 1 kHz five-step calibration tone, or estimate a device offset");
  c_tone->add_option("--write-tone", tone.write_tone, "write the tone as float32 WAV");
  c_tone->add_option("--recording", tone.recording, "device recording of the tone");
  c_tone->add_option("--reference", tone.reference, "reference meter readings, CSV timestamp,laeq_dba");
  c_tone->add_option("--raw-rate", tone.raw_rate, "read --recording as raw float32 at this rate (0 = WAV)");
  c_tone->add_option("--device-id", tone.device_id, "device identifier stored with the offset");
  c_tone->add_option("--estimated-at", tone.estimated_at, "timestamp stored with the offset");
  c_tone->add_option("--out", tone.out, "offset JSON (default stdout)");

  LeqArgs lq;
  auto* c_leq = app.add_subcommand("leq", "A-weighted equivalent levels per interval");
  c_leq->add_option("--wav", lq.wav, "input audio")->required();
  c_leq->add_option("--raw-rate", lq.raw_rate, "read raw float32 at this rate (0 = WAV)");
  c_leq->add_option("--offset", lq.offset, "calibration offset JSON (default delta 0)");
  c_leq->add_option("--interval", lq.interval, "seconds per reading")->check(CLI::PositiveNumber);
  c_leq->add_option("--out", lq.out, "CSV timestamp,laeq_dba,interval_s (default stdout)");

  SpeechArgs sp;
  auto* c_sp = app.add_subcommand("detect-speech", "label audio windows voiced / noise by spectral median");
  c_sp->add_option("--wav", sp.wavs, "audio to classify");
  c_sp->add_option("--model", sp.model, "threshold model JSON");
  c_sp->add_option("--train-voiced", sp.train_voiced, "voiced training audio");
  c_sp->add_option("--train-noise", sp.train_noise, "noise-only training audio");
  c_sp->add_option("--save-model", sp.save_model, "write the trained model JSON");
  c_sp->add_option("--window", sp.window, "window length in seconds")->check(CLI::PositiveNumber);
  c_sp->add_option("--raw-rate", sp.raw_rate, "read raw float32 at this rate (0 = WAV)");
  c_sp->add_option("--out", sp.out, "CSV window_start,feature,label (default stdout)");

  ContextArgs cx;
  auto* c_cx = app.add_subcommand("classify-context", "hand / pocket_or_bag labels from an accelerometer and proximity trace");
  c_cx->add_option("--trace", cx.trace, "trace CSV t,z,prox_state");
  c_cx->add_option("--model", cx.model, "model JSON");
  c_cx->add_option("--train", cx.train, "labelled trace CSV t,z,prox_state,label");
  c_cx->add_option("--save-model", cx.save_model, "write the model JSON");
  c_cx->add_option("--k", cx.k, "neighbours (odd)");
  c_cx->add_option("--feature", cx.feature, "mean | median | p75");
  c_cx->add_option("--threshold", cx.threshold, "proximity triggers that force pocket_or_bag");
  c_cx->add_option("--delta", cx.delta, "window length in seconds")->check(CLI::PositiveNumber);
  c_cx->add_flag("--no-proximity", cx.no_proximity, "accelerometer only");
  c_cx->add_option("--out", cx.out, "CSV window_start,label (default stdout)");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "synthetic truth profile plus pedestrian samples");
  c_sim->add_option("--profile-spec", sim.spec, "spec JSON (object or array of rows)")->required();
  c_sim->add_option("--row", sim.row, "row of an array spec");
  c_sim->add_option("--agents", sim.agents, "pedestrians");
  c_sim->add_option("--contribute-prob", sim.prob, "per-step contribution probability");
  c_sim->add_option("--noise-std", sim.noise_std, "Gaussian sensor noise in dB");
  c_sim->add_option("--v-max", sim.v_max, "walking speed bound in m/s");
  c_sim->add_option("--missing", sim.missing, "uniform mask with this missing fraction instead of agents");
  c_sim->add_option("--seed", sim.seed, "campaign / mask seed");
  c_sim->add_option("--samples-out", sim.samples_out, "SampleSet CSV g,t,laeq (default stdout)");
  c_sim->add_option("--truth-out", sim.truth_out, "truth profile CSV (lattice in <file>.json)");

  ReconArgs rc;
  auto* c_rc = app.add_subcommand("reconstruct", "fill a lattice from sparse samples");
  c_rc->add_option("--samples", rc.samples, "SampleSet CSV g,t,laeq")->required();
  c_rc->add_option("--lattice", rc.lattice, "lattice JSON")->required();
  c_rc->add_option("--method", rc.method, "l1 | li | nni | gpi");
  c_rc->add_option("--eps", rc.eps, "l1 constraint radius (default 1e-6 of the data norm)");
  c_rc->add_option("--max-iter", rc.max_iter, "l1 iteration cap")->check(CLI::PositiveNumber);
  c_rc->add_option("--truth", rc.truth, "truth profile; adds rms_error to the diagnostics");
  c_rc->add_option("--out", rc.out, "profile CSV (default stdout)");
  c_rc->add_option("--diagnostics", rc.diagnostics, "diagnostics JSON (default <out>.diagnostics.json)");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "reconstruction error over missing fractions, trials and methods");
  c_sw->add_option("--config", sw.config, "experiment JSON; flags override its values");
  c_sw->add_option("--truth", sw.truth, "truth profile CSV");
  c_sw->add_option("--lattice", sw.lattice, "lattice JSON for --truth (default <truth>.json)");
  c_sw->add_option("--profile-spec", sw.spec, "synthesise the truth from a spec instead");
  c_sw->add_option("--row", sw.row, "row of an array spec");
  c_sw->add_option("--missing", sw.missing, "comma separated missing fractions");
  c_sw->add_option("--trials", sw.trials, "masks per fraction");
  c_sw->add_option("--methods", sw.methods, "all or a comma separated subset of l1,li,nni,gpi");
  c_sw->add_option("--seed", sw.seed, "mask seed base");
  c_sw->add_option("--workers", sw.workers, "threads (0 = hardware)");
  c_sw->add_option("--out", sw.out, "CSV method,missing_frac,trial,rms_error (default stdout)");

  CompressArgs cp;
  auto* c_cp = app.add_subcommand("analyze-compress", "DCT compressibility of a complete profile");
  c_cp->add_option("--profile", cp.profile, "profile CSV")->required();
  c_cp->add_option("--lattice", cp.lattice, "lattice JSON (default <profile>.json)");
  c_cp->add_option("--target", cp.targets, "RMS targets in dBA")->delimiter(',');
  c_cp->add_option("--layout", cp.layout, "flat | separable");
  c_cp->add_option("--out", cp.out, "report JSON (default stdout)");
  c_cp->add_option("--magnitudes", cp.magnitudes, "CSV rank,magnitude of sorted coefficients");

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "HTTP ingestion and map server");
  c_sv->add_option("--host", sv.host, "bind address");
  c_sv->add_option("--port", sv.port, "port (env NOISEMAP_PORT)");
  c_sv->add_option("--store", sv.store, "JSON-lines store, empty = memory only (env NOISEMAP_STORE)");
  c_sv->add_option("--window", sv.window, "lattice JSON reconstructed on a schedule");
  c_sv->add_option("--method", sv.method, "scheduled method");
  c_sv->add_option("--interval", sv.interval, "seconds between scheduled runs");

  QueryArgs qa;
  auto* c_q = app.add_subcommand("query", "read published map cells from a store or a running server");
  c_q->add_option("--store", qa.store, "store file");
  c_q->add_option("--url", qa.url, "server, e.g. http://127.0.0.1:8080");
  c_q->add_option("--bbox", qa.bbox, "minlat,minlon,maxlat,maxlon");
  c_q->add_option("--from", qa.from, "start time");
  c_q->add_option("--to", qa.to, "end time");
  c_q->add_option("--method", qa.method, "only maps made with this method");
  c_q->add_option("--out", qa.out, "JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << io::error_json("bad_arguments", e.what()).dump() << std::endl;
    return 2;
  }

  try {
    if (c_tone->parsed()) run_calibrate(tone);
    else if (c_leq->parsed()) run_leq(lq);
    else if (c_sp->parsed()) run_speech(sp);
    else if (c_cx->parsed()) run_context(cx, *c_cx);
    else if (c_sim->parsed()) run_simulate(sim);
    else if (c_rc->parsed()) run_reconstruct(rc);
    else if (c_sw->parsed()) run_sweep(sw, *c_sw);
    else if (c_cp->parsed()) run_compress(cp);
    else if (c_sv->parsed()) run_serve(sv, *c_sv);
    else if (c_q->parsed()) run_query(qa);
  } catch (const Error& e) {
    std::cerr << io::error_json(e.code(), e.what()).dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << io::error_json("internal_error", e.what()).dump() << std::endl;
    return 1;
  }
  return 0;
}
