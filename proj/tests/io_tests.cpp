#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "bngd/io.hpp"

using namespace bngd;

TEST_CASE("17-digit formatting round-trips doubles exactly") {
  for (double x : {0.1, 1.0 / 3.0, 1e300, -2.5e-17, 3.141592653589793, 0.0}) {
    CHECK(std::stod(fmt17(x)) == x);
  }
}

TEST_CASE("trajectory CSV has the documented columns and is deterministic") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 2.0, 8), UMode::hu_normalized, 1);
  RunConfig cfg;
  cfg.eps = 0.01;
  cfg.eps_a = 1.0;
  cfg.w0 = *p.w0_hint;
  cfg.max_iters = 50;
  const std::string csv1 = trajectory_csv(run(p, cfg, Mode::bngd));
  const std::string csv2 = trajectory_csv(run(p, cfg, Mode::bngd));
  CHECK(csv1 == csv2);
  std::istringstream in(csv1);
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,a,w_norm_sq,sigma,y,eps_hat,e_h_norm,q,beta,delta,loss");
}

TEST_CASE("sweep output is independent of the worker count") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 2.0, 10), UMode::hu_normalized, 2);
  Vec ea = {1.99e-3, 1.99e-1, 1.0};
  Vec ee = {1e-2, 1.0, 1e2, 1e4};
  SweepGrid g1 = sweep(p, ea, ee, *p.w0_hint, 0.0, 200, 1);
  SweepGrid g8 = sweep(p, ea, ee, *p.w0_hint, 0.0, 200, 8);
  CHECK(sweep_csv(g1) == sweep_csv(g8));
}

TEST_CASE("checksums change with content") {
  CHECK(fnv1a("abc") != fnv1a("abd"));
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
}

TEST_CASE("output directory writes artifacts and a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "bngd_io_test";
  std::filesystem::remove_all(dir);
  {
    OutputDir out(dir);
    out.add("data.csv", "a,b\n1,2\n");
    out.finish(json{{"kind", "run"}, {"seed", 3}});
  }
  CHECK(std::filesystem::exists(dir / "data.csv"));
  json manifest = json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["schema_version"] == 1);
  CHECK(manifest["config"]["seed"] == 3);
  CHECK(manifest["checksums"].contains("data.csv"));
  CHECK(manifest["wall_time_seconds"].get<double>() >= 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("grid and spectrum config parsing") {
  Vec g = parse_grid(json{{"kind", "logspace"}, {"lo", -2.0}, {"hi", 0.0}, {"count", 3}});
  CHECK(g == Vec{0.01, 0.1, 1.0});
  Vec scaled = parse_grid(
      json{{"kind", "logspace"}, {"lo", 0.0}, {"hi", 1.0}, {"count", 2}, {"scale", 1.99}});
  CHECK(scaled[0] == doctest::Approx(1.99));
  CHECK(scaled[1] == doctest::Approx(19.9));
  Vec lin = parse_grid(json{{"kind", "linspace"}, {"lo", 1.0}, {"hi", 3.0}, {"count", 3}});
  CHECK(lin == Vec{1.0, 2.0, 3.0});
  Vec expl = parse_grid(json::array({0.5, 2.5}));
  CHECK(expl == Vec{0.5, 2.5});
  CHECK_THROWS_AS(parse_grid(json::array()), std::domain_error);

  SpectrumSpec s = parse_spectrum(json{{"kind", "spiked"}, {"count", 4}, {"spike", 100.0}});
  CHECK(s.build() == Vec{1.0, 1.0, 1.0, 100.0});
  CHECK(spectrum_to_json(s)["kind"] == "spiked");
  CHECK_THROWS_AS(parse_spectrum(json{{"kind", "nope"}}), std::domain_error);

  SpectrumSpec round = parse_spectrum(spectrum_to_json(SpectrumSpec::logspace(0.0, 5.0, 100)));
  CHECK(round.build().back() == doctest::Approx(1e5));
}

TEST_CASE("trajectory summary JSON carries outcome and invariant counts") {
  ProblemInstance p = make_instance(SpectrumSpec::logspace(0.0, 1.0, 5), UMode::hu_normalized, 4);
  RunConfig cfg;
  cfg.eps = 0.05;
  cfg.w0 = *p.w0_hint;
  cfg.max_iters = 200;
  cfg.verify = true;
  json j = trajectory_summary_json(run(p, cfg, Mode::bngd));
  CHECK(j.contains("outcome"));
  CHECK(j.contains("final"));
  CHECK(j["invariants"]["all_pass"] == true);
}
