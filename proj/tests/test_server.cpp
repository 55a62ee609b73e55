#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "noisemap/server.hpp"
#include "noisemap/simulate.hpp"

using namespace noisemap;
using namespace noisemap::server;

namespace {

Lattice window(std::size_t n_s = 4, std::size_t n_t = 5)
{
  Lattice l;
  l.n_s = n_s;
  l.n_t = n_t;
  l.t0 = 1000.0;
  l.origin = geo::latlon_to_mgrs(-27.6225, 152.9565, 10);
  return l;
}

NoiseProfile truth_on(const Lattice& l)
{
  NoiseProfile p(l);
  for (std::size_t i = 0; i < p.values.size(); ++i)
    p.values[i] = 55.0 + 0.5 * double(i % 11);
  return p;
}

std::string store_path(const std::string& name)
{
  const auto dir = std::filesystem::temp_directory_path() / "noisemap_server_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p.string();
}

} // namespace

TEST(Ingest, StoresFactUnderMgrsKey)
{
  Repository repo;
  const SampleRecord r{1000.4, -27.6225, 152.9565, 62.0, "d1"};
  const auto res = repo.ingest(r);
  EXPECT_EQ(res.accepted, 1u);
  EXPECT_EQ(repo.fact_level(1000, geo::latlon_to_mgrs(r.lat, r.lon, 10).to_string()), 62.0);
}

TEST(Ingest, RejectsOutOfBand)
{
  Repository repo;
  const auto res = repo.ingest(SampleRecord{1.0, 0.0, 3.0, 500.0, ""});
  EXPECT_EQ(res.accepted, 0u);
  ASSERT_EQ(res.rejected.size(), 1u);
  EXPECT_EQ(repo.fact_count(), 0u);
  EXPECT_EQ(repo.ingest(SampleRecord{1.0, 95.0, 3.0, 50.0, ""}).rejected.size(), 1u);
}

TEST(Ingest, SameCellSecondMergesEnergetically)
{
  Repository repo;
  const auto l = window();
  const auto c = l.cell_center(2);
  std::vector<SampleRecord> rs = {{1001.1, c.lat, c.lon, 60.0, ""}, {1001.7, c.lat, c.lon, 70.0, ""}};
  repo.ingest(rs);
  const auto lvl = repo.fact_level(1001, l.cell_mgrs(2).to_string());
  ASSERT_TRUE(lvl);
  EXPECT_NEAR(*lvl, 10.0 * std::log10((1e6 + 1e7) / 2.0), 1e-12);
  EXPECT_NEAR(*lvl, 67.40, 0.005);
}

TEST(Ingest, ReplayingStreamIsIdempotent)
{
  const auto l = window();
  const auto recs = records_from_samples(mask_uniform(truth_on(l), 0.3, 1));
  Repository a;
  a.ingest(recs);
  const auto again = a.ingest(recs);
  EXPECT_EQ(again.accepted, 0u);
  EXPECT_EQ(again.duplicates, recs.size());
  Repository b;
  b.ingest(recs);
  EXPECT_EQ(a.fact_count(), b.fact_count());
  EXPECT_EQ(a.window_samples(l).values(), b.window_samples(l).values());
}

TEST(Reconstruction, FullCoverageEqualsBinnedData)
{
  Repository repo;
  const auto l = window();
  const auto truth = truth_on(l);
  repo.ingest(records_from_samples(sample_set_from_profile(truth)));
  for (Method m : kAllMethods) {
    const auto v = repo.run_reconstruction(l, m);
    EXPECT_FALSE(v->failed);
    EXPECT_EQ(v->profile.values, truth.values) << to_string(m);
  }
}

TEST(Reconstruction, EmptyWindowIsPreconditionError)
{
  Repository repo;
  try {
    repo.run_reconstruction(window(), Method::L1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_window");
  }
  EXPECT_TRUE(repo.versions().empty());
}

TEST(Reconstruction, FailedVersionKeepsRawData)
{
  Repository repo;
  const auto l = window();
  const auto c = l.cell_center(1);
  repo.ingest(SampleRecord{1000.5, c.lat, c.lon, 60.0, ""});
  ReconOptions opt;
  opt.gp.fixed = GpHyper{-1.0, 1.0, 1.0, 0.1, 0.0, 0.0};
  const auto v = repo.run_reconstruction(l, Method::GaussianProcess, opt);
  EXPECT_TRUE(v->failed);
  EXPECT_EQ(v->profile.at(1, 1), 60.0);
  EXPECT_EQ(repo.fact_count(), 1u);
  EXPECT_TRUE(repo.query({}).empty());
}

TEST(Reconstruction, FortyPercentMissingWithinThreeDb)
{
  ProfileSpec spec;
  auto l = window(6, 600);
  const auto truth = synth_profile(spec, l).profile;
  Repository repo;
  repo.ingest(records_from_samples(mask_uniform(truth, 0.4, 1)));
  const auto v = repo.run_reconstruction(l, Method::L1);
  ASSERT_FALSE(v->failed);
  EXPECT_LE(rms_error(v->profile, truth), 3.0);
}

TEST(Reconstruction, RerunIsIdenticalAndVersionsIncrease)
{
  Repository repo;
  const auto l = window();
  repo.ingest(records_from_samples(mask_uniform(truth_on(l), 0.5, 2)));
  const auto a = repo.run_reconstruction(l, Method::NearestNeighbor);
  const auto b = repo.run_reconstruction(l, Method::NearestNeighbor);
  EXPECT_LT(a->version, b->version);
  EXPECT_EQ(a->profile.values, b->profile.values);
  EXPECT_EQ(repo.query({}).front().version, b->version);
}

TEST(Query, ProvenanceTags)
{
  Repository repo;
  const auto l = window();
  const auto s = mask_uniform(truth_on(l), 0.45, 3);
  repo.ingest(records_from_samples(s));
  repo.run_reconstruction(l, Method::Linear);
  const auto cells = repo.query({});
  ASSERT_EQ(cells.size(), l.size());
  std::size_t measured = 0;
  for (const auto& c : cells)
    measured += c.measured;
  EXPECT_EQ(measured, s.size());
  EXPECT_EQ(cells.size() - measured, l.size() - s.size());

  QueryRequest outside;
  outside.from = 0.0;
  outside.to = 999.0;
  EXPECT_TRUE(repo.query(outside).empty());
  QueryRequest far;
  far.min_lat = 10.0;
  far.max_lat = 11.0;
  EXPECT_TRUE(repo.query(far).empty());
  QueryRequest other;
  other.method = Method::GaussianProcess;
  EXPECT_TRUE(repo.query(other).empty());
}

TEST(Query, FullyMeasuredRegion)
{
  Repository repo;
  const auto l = window(2, 3);
  repo.ingest(records_from_samples(sample_set_from_profile(truth_on(l))));
  repo.run_reconstruction(l, Method::L1);
  for (const auto& c : repo.query({}))
    EXPECT_TRUE(c.measured);
}

TEST(Query, DoesNotMutate)
{
  Repository repo;
  const auto l = window();
  repo.ingest(records_from_samples(mask_uniform(truth_on(l), 0.5, 4)));
  repo.run_reconstruction(l, Method::Linear);
  const auto before = repo.versions().size();
  const auto q1 = repo.query({});
  const auto q2 = repo.query({});
  EXPECT_EQ(repo.versions().size(), before);
  ASSERT_EQ(q1.size(), q2.size());
  for (std::size_t i = 0; i < q1.size(); ++i)
    EXPECT_EQ(q1[i].laeq, q2[i].laeq);
}

TEST(Store, ReplayRestoresState)
{
  const auto path = store_path("replay.jsonl");
  const auto l = window();
  std::vector<double> levels;
  std::uint64_t last = 0;
  {
    Repository repo(path);
    repo.ingest(records_from_samples(mask_uniform(truth_on(l), 0.5, 5)));
    repo.run_reconstruction(l, Method::Linear);
    last = repo.run_reconstruction(l, Method::NearestNeighbor)->version;
    for (const auto& c : repo.query({}))
      levels.push_back(c.laeq);
  }
  Repository again(path);
  EXPECT_EQ(again.versions().size(), 2u);
  std::vector<double> replayed;
  for (const auto& c : again.query({}))
    replayed.push_back(c.laeq);
  EXPECT_EQ(replayed, levels);
  EXPECT_EQ(again.run_reconstruction(l, Method::Linear)->version, last + 1);
}

TEST(Http, EndToEnd)
{
  Repository repo;
  HttpServer srv(repo);
  const int port = srv.start();
  httplib::Client cli("127.0.0.1", port);

  const auto l = window();
  const auto s = mask_uniform(truth_on(l), 0.5, 6);
  auto res = cli.Post("/records", io::records_jsonl(records_from_samples(s)), "application/x-ndjson");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["accepted"], s.size());

  res = cli.Post("/records", "{\"t\":1,\"lat\":0,\"lon\":3,\"laeq\":500}\nnot json\n", "application/x-ndjson");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["rejected"].size(), 2u);

  json empty_req = {{"window", io::to_json(window(2, 2))}, {"method", "li"}};
  empty_req["window"]["t0"] = 0.0;
  res = cli.Post("/reconstruct", empty_req.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"], "empty_window");

  res = cli.Post("/reconstruct", json{{"window", io::to_json(l)}, {"method", "nni"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto summary = json::parse(res->body);
  EXPECT_EQ(summary["measured_cells"], s.size());

  res = cli.Get("/noise?from=1000&to=1002");
  ASSERT_TRUE(res);
  const auto arr = json::parse(res->body);
  ASSERT_EQ(arr.size(), 3u * l.n_s);
  for (const auto& c : arr) {
    for (const char* k : {"mgrs", "lat", "lon", "laeq", "source", "version"})
      EXPECT_TRUE(c.contains(k)) << k;
  }

  res = cli.Get("/noise?bbox=1,2,3");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Get("/maps/" + std::to_string(summary["version"].get<std::uint64_t>()));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, io::profile_csv(repo.versions().back()->profile));
  srv.stop();
}
