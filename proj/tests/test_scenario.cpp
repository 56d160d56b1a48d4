#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lsm/scenario.hpp"

using namespace lsm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("lsmtest-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(dir, ec); }
  static int& counter() { static int c = 0; return c; }
  std::string file(const std::string& name, const std::string& body) const {
    fs::path p = dir / name;
    std::ofstream(p) << body;
    return p.string();
  }
};

std::string expect_config_error(const std::string& path) {
  try {
    load_scenario(path);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("the template config parses") {
  TempDir td;
  std::string p = td.file("template.json", scenario_template());
  Scenario sc = load_scenario(p);
  CHECK(sc.model.L >= 4);
  CHECK(sc.theta_steps >= 64);
  CHECK(sc.model.coupling == "heisenberg");
}

TEST_CASE("config errors are anchored and specific") {
  TempDir td;

  std::string odd = expect_config_error(td.file("odd.json",
      "{\n  \"model\": {\n    \"L\": 5\n  }\n}\n"));
  CHECK(odd.find("L must be even") != std::string::npos);
  CHECK(odd.find("odd.json:3") != std::string::npos);  // line of the "L" key

  std::string unk = expect_config_error(td.file("unk.json",
      "{\n  \"model\": { \"L\": 4 },\n  \"bogus\": 1\n}\n"));
  CHECK(unk.find("unknown key") != std::string::npos);
  CHECK(unk.find("bogus") != std::string::npos);
  CHECK(unk.find("unk.json:3") != std::string::npos);

  CHECK(expect_config_error(td.file("geo.json",
      "{ \"model\": { \"geometry\": \"torus\", \"L\": 4 } }"))
            .find("geometry") != std::string::npos);

  CHECK(expect_config_error(td.file("coup.json",
      "{ \"model\": { \"L\": 4, \"coupling\": \"random\" } }"))
            .find("coupling") != std::string::npos);

  CHECK(expect_config_error(td.file("spin.json",
      "{ \"model\": { \"L\": 4, \"spin\": 0.3 } }"))
            .find("spin") != std::string::npos);

  CHECK(expect_config_error(td.file("edges.json",
      "{ \"model\": { \"L\": 4, \"coupling\": \"coupled\" } }"))
            .find("edges") != std::string::npos);

  CHECK(expect_config_error(td.file("steps.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"theta_steps\": 32 } }"))
            .find("theta_steps must be at least 64") != std::string::npos);

  CHECK(expect_config_error(td.file("samples.json",
      "{ \"model\": { \"L\": 4 },"
      " \"overrides\": { \"theta_steps\": 64, \"samples\": 65 } }"))
            .find("samples") != std::string::npos);

  CHECK(expect_config_error(td.file("backend.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"filter_backend\": \"x\" } }"))
            .find("filter_backend must be spectral or quadrature") !=
        std::string::npos);

  CHECK(expect_config_error(td.file("block.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"sector_blocking\": \"x\" } }"))
            .find("sector_blocking") != std::string::npos);

  CHECK(expect_config_error(td.file("mtol.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"margin_tolerance\": 0 } }"))
            .find("margin_tolerance must be positive") != std::string::npos);

  CHECK(expect_config_error(td.file("aneg.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"a\": -0.5 } }"))
            .find("a must be positive") != std::string::npos);

  CHECK(expect_config_error(td.file("m.json",
      "{ \"model\": { \"L\": 4 }, \"overrides\": { \"m\": 9 } }"))
            .find("m must lie in [1, L]") != std::string::npos);

  CHECK(expect_config_error(td.file("pipe.json",
      "{ \"model\": { \"L\": 4 }, \"pipelines\": [\"meditate\"] }"))
            .find("unknown pipeline") != std::string::npos);

  CHECK(expect_config_error(td.file("sweepodd.json",
      "{ \"model\": { \"L\": 4 }, \"sweep\": { \"L\": [4, 5] } }"))
            .find("L must be even") != std::string::npos);

  std::string cs = expect_config_error(td.file("sweepcoup.json",
      "{ \"model\": { \"L\": 4, \"coupling\": \"coupled\","
      " \"edges\": [[0, 1, 1.0], [1, 2, 1.0], [2, 3, 1.0], [0, 3, 1.0]] },"
      " \"sweep\": { \"L\": [6] } }"));
  CHECK(cs.find("translation-built coupling") != std::string::npos);

  CHECK(expect_config_error(td.file("tpts.json",
      "{ \"model\": { \"L\": 4 }, \"checks\": { \"t_points\": 0 } }"))
            .find("t_points must be at least 2") != std::string::npos);

  CHECK(expect_config_error(td.file("tmax.json",
      "{ \"model\": { \"L\": 4 }, \"checks\": { \"t_max\": -2 } }"))
            .find("t_max must be positive") != std::string::npos);

  CHECK(expect_config_error(td.file("bsite.json",
      "{ \"model\": { \"L\": 4 }, \"checks\": { \"a_site\": 1, \"b_site\": 1 } }"))
            .find("b_site") != std::string::npos);

  CHECK(expect_config_error(td.file("threads.json",
      "{ \"model\": { \"L\": 4 }, \"threads\": 0 }"))
            .find("threads must be at least 1") != std::string::npos);

  CHECK(expect_config_error(td.file("dmd.json",
      "{ \"model\": { \"L\": 4 }, \"dense_max_dim\": 1 }"))
            .find("dense_max_dim must be at least 2") != std::string::npos);

  CHECK(expect_config_error(td.file("nojson.json", "not json at all"))
            .find("nojson.json") != std::string::npos);

  CHECK(expect_config_error("/nonexistent/nowhere.json")
            .find("cannot open") != std::string::npos);
}

TEST_CASE("seventeen significant digits round-trip") {
  for (double x : {1.0 / 3.0, 0.1, 3.141592653589793, 1e-308, -2.5e17,
                   0.6847416490235392}) {
    std::string s = format_sig(x, 17);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(format_sig(std::nan(""), 17) == "nan");
  CHECK(format_sig(std::numeric_limits<double>::infinity(), 17) == "inf");
  CHECK(format_sig(0.25, 9) == "0.25");
}

TEST_CASE("spectrum pipeline on the smallest ring") {
  Scenario sc;
  sc.model.L = 4;
  PipelineOutputs out = run_pipeline(sc, "spectrum");
  REQUIRE(out.sweep_rows.size() == 1);
  CHECK(out.sweep_rows[0].rfind("4,16,-2,1,", 0) == 0);
  CHECK(out.failed.empty());

  // determinism: the serialized document is reproducible
  PipelineOutputs again = run_pipeline(sc, "spectrum");
  CHECK(out.results_json == again.results_json);

  // the CSV row is a projection of the JSON document
  nlohmann::json doc = nlohmann::json::parse(out.results_json);
  const auto& row = doc["results"]["entries"][0]["sweep_row"];
  CHECK(row["L"].get<int>() == 4);
  CHECK(row["dim"].get<int>() == 16);
  CHECK(row["E0"].get<double>() == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(row["gamma"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(row["delta_e"].is_null());  // nan projects to null
  CHECK(doc["scenario"]["model"]["L"].get<int>() == 4);
  CHECK(doc["command"].get<std::string>() == "spectrum");
  CHECK(doc["checks"]["all_passed"].get<bool>());
  const auto& entry = doc["results"]["entries"][0];
  CHECK(entry["translation_eigenvalue"]["re"].get<double>() ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(!entry["degenerate"].get<bool>());
}

TEST_CASE("unknown pipeline is a config error") {
  Scenario sc;
  CHECK_THROWS_AS(run_pipeline(sc, "frobnicate"), ConfigError);
}

TEST_CASE("structural preconditions surface as typed errors") {
  Scenario ladder;
  ladder.model.geometry = Geometry::ladder;
  ladder.model.legs = 2;
  ladder.model.L = 4;
  try {
    run_pipeline(ladder, "lsm-run");
    CHECK(false);
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("LSM4") != std::string::npos);
  }

  Scenario ferro;
  ferro.model.J = -1.0;
  ferro.model.L = 4;
  ferro.theta_steps = 64;
  try {
    run_pipeline(ferro, "lsm-run");
    CHECK(false);
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("LSM5") != std::string::npos);
  }
}

TEST_CASE("output files land atomically") {
  TempDir td;
  Scenario sc;
  sc.model.L = 4;
  sc.out_dir = (td.dir / "run").string();
  PipelineOutputs out = run_pipeline(sc, "spectrum");
  write_outputs(sc, out);
  for (const char* name : {"results.json", "sweep.csv", "bounds.csv",
                           "flow_theta.csv"})
    CHECK(fs::exists(fs::path(sc.out_dir) / name));
  int leftovers = 0;
  for (const auto& e : fs::directory_iterator(sc.out_dir))
    if (e.path().extension() == ".tmp") ++leftovers;
  CHECK(leftovers == 0);

  // the sweep written here reads back with its nan markers intact
  std::vector<SweepRow> rows =
      read_sweep_csv((fs::path(sc.out_dir) / "sweep.csv").string());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].L == 4);
  CHECK(rows[0].dim == 16);
  CHECK(rows[0].e0 == -2.0);
  CHECK(rows[0].gamma == 1.0);
  CHECK(std::isnan(rows[0].delta_e));

  std::string bad = td.file("bad.csv", "a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(read_sweep_csv(bad), ConfigError);
}

TEST_CASE("gap fit against synthetic data") {
  std::vector<SweepRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    int L = 4 + 2 * i;
    rows[i].L = L;
    rows[i].dim = int64_t(1) << L;
    rows[i].log_l_over_l = std::log(double(L)) / L;
    rows[i].gamma = 2.0 * rows[i].log_l_over_l;
  }
  FitReport fr = fit_sweep(rows);
  CHECK(fr.C == doctest::Approx(2.0).epsilon(1e-12));
  REQUIRE(fr.ratios.size() == 3);
  for (double r : fr.ratios) CHECK(r == doctest::Approx(2.0).epsilon(1e-12));
  for (size_t i = 0; i < fr.fitted.size(); ++i)
    CHECK(fr.fitted[i] == doctest::Approx(rows[i].gamma).epsilon(1e-12));
  CHECK(!fr.table.empty());

  // a row without a finite gap is ignored
  SweepRow nan_row;
  nan_row.L = 12;
  nan_row.gamma = std::nan("");
  rows.push_back(nan_row);
  CHECK(fit_sweep(rows).C == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_sweep({rows[0]}), ConfigError);

  TempDir td;
  write_fit(fr, td.dir.string());
  CHECK(fs::exists(td.dir / "fit.csv"));
  CHECK(fs::exists(td.dir / "report.json"));
}
