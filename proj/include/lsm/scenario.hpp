#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsm/lattice.hpp"
#include "lsm/model.hpp"

namespace lsm {

// bad or inconsistent configuration; the runner exits with code 2
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// a model fails one of the structural conditions LSM1-LSM6; exit code 3.
// The message starts with the violated condition's name.
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  Geometry geometry = Geometry::ring;
  int L = 4;
  int legs = 1;
  double spin = 0.5;
  std::string coupling = "heisenberg";  // heisenberg | xxz | dimerized | coupled
  double J = 1.0;
  double J2 = 1.0;    // dimerized: strength of the even bonds
  double delta = 1.0; // xxz anisotropy
  std::vector<std::array<double, 3>> edges;  // coupled: {site a, site b, strength}
  double lambda = 1.0;  // decay-function weight
  double power = 0;     // decay power; <= 0 picks dim_label + 1

  Lattice lattice(int L_override = 0) const;
  Interaction interaction(const Lattice& lat) const;
  DecayFunction decay(const Lattice& lat) const;
};

// operators and grids for the bound-check pipelines
struct CheckSpec {
  int a_site = 0;
  int b_site = -1;    // -1: first site of the column opposite a_site's
  double t_max = -1;  // time grid edge; -1: 2.0 for lr-check, the admissible
                      // clustering window for cluster-check
  int t_points = 9;
  double theta = 3.141592653589793;  // twist angle for the restriction check
};

struct Scenario {
  ModelSpec model;
  std::vector<std::string> pipelines;  // informative; the subcommand picks one

  // overrides; non-positive a/T/M mean "derive from the model"
  double a = -1, T_cut = -1, M = -1;
  std::optional<int> m_override;
  int theta_steps = 512;
  int samples = 16;
  std::string filter_backend = "spectral";
  std::string sector_blocking = "auto";  // auto | always | never
  double margin_tolerance = 1e-9;        // bound rows fail below -tol*scale
  bool diagnostics = false;

  std::vector<double> thetas;             // twist-scan spectra angles
  std::vector<double> derivative_thetas;  // twist-scan derivative angles
  CheckSpec checks;
  std::vector<int> sweep_L;  // lsm-run / spectrum sizes; empty: {model.L}

  std::string out_dir = ".";
  uint64_t seed = 1;
  int64_t dense_max_dim = 8192;
  int threads = 1;
};

// Parse and validate a config file. Comments (// and /* */) are allowed.
// Error messages are anchored as "<path>:<line>: <what>".
Scenario load_scenario(const std::string& config_path);

// commented default config, itself parseable by load_scenario
std::string scenario_template();

struct PipelineOutputs {
  std::string results_json;             // full document, serialized
  std::vector<std::string> sweep_rows;  // CSV rows without headers
  std::vector<std::string> bound_rows;
  std::vector<std::string> flow_rows;
  std::vector<std::string> failed;  // names of bound rows that failed
};

// Known pipelines: spectrum, twist-scan, lsm-run, lr-check, cluster-check.
PipelineOutputs run_pipeline(const Scenario& sc, const std::string& pipeline);

// results.json, sweep.csv, bounds.csv, flow_theta.csv under sc.out_dir,
// each written to a temporary file first and renamed into place
void write_outputs(const Scenario& sc, const PipelineOutputs& out);

// one sweep.csv row; nan marks columns the producing pipeline left empty
struct SweepRow {
  int L = 0;
  int64_t dim = 0;
  double e0 = 0, gamma = 0, a = 0, t_cut = 0, delta_e = 0, overlap = 0, refined = 0,
         log_l_over_l = 0;
};

std::vector<SweepRow> read_sweep_csv(const std::string& path);

struct FitReport {
  double C = 0;  // least-squares gamma = C log(L)/L through the origin
  std::vector<SweepRow> rows;   // the rows with finite gamma, as fitted
  std::vector<double> ratios;   // gamma * L / log(L)
  std::vector<double> fitted;   // C log(L)/L
  std::string table;            // printable summary
};

// needs at least two rows with finite gamma
FitReport fit_sweep(const std::vector<SweepRow>& rows);

// fit.csv and report.json under out_dir
void write_fit(const FitReport& fr, const std::string& out_dir);

// "%.<digits>g" with nan/inf spelled out; digits = 17 round-trips exactly
std::string format_sig(double x, int digits);

}  // namespace lsm
