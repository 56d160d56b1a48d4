#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "lsm/scenario.hpp"

using lsm::ConfigError;
using lsm::PreconditionError;
using lsm::Scenario;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<uint64_t> seed;
  std::optional<int64_t> dense_max_dim;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "scenario config file (JSON, comments allowed)")
      ->required();
  sub->add_option("--out", f.out, "output directory (overrides the config)");
  sub->add_option("--threads", f.threads, "Eigen thread count")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "seed for the iterative eigensolver");
  sub->add_option("--dense-max-dim", f.dense_max_dim,
                  "largest dimension diagonalized densely (default 8192)")
      ->check(CLI::PositiveNumber);
}

int run(const std::string& pipeline, const CommonFlags& f) {
  Scenario sc = lsm::load_scenario(f.config);
  if (f.out) sc.out_dir = *f.out;
  if (f.threads) sc.threads = *f.threads;
  if (f.seed) sc.seed = *f.seed;
  if (f.dense_max_dim) sc.dense_max_dim = *f.dense_max_dim;
  Eigen::setNbThreads(sc.threads);
  lsm::PipelineOutputs out = lsm::run_pipeline(sc, pipeline);
  lsm::write_outputs(sc, out);
  std::cout << pipeline << ": wrote " << sc.out_dir << "/results.json ("
            << out.sweep_rows.size() << " sweep rows, " << out.bound_rows.size()
            << " bound rows)\n";
  if (!out.failed.empty()) {
    std::cerr << "bound violation:";
    for (const auto& name : out.failed) std::cerr << " " << name;
    std::cerr << "\n";
    return 5;
  }
  return 0;
}

int run_report(const std::vector<std::string>& paths, const std::optional<std::string>& out) {
  std::string out_dir = out ? *out : ".";
  std::vector<std::string> inputs = paths;
  if (inputs.empty()) inputs.push_back(out_dir + "/sweep.csv");
  std::vector<lsm::SweepRow> rows;
  for (const auto& p : inputs) {
    std::vector<lsm::SweepRow> r = lsm::read_sweep_csv(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  lsm::FitReport fr = lsm::fit_sweep(rows);
  std::cout << fr.table;
  lsm::write_fit(fr, out_dir);
  std::cout << "wrote " << out_dir << "/fit.csv and " << out_dir << "/report.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral-flow laboratory for twisted spin Hamiltonians"};
  app.require_subcommand(0, 1);
  bool want_template = false;
  app.add_flag("--template", want_template,
               "print a commented scenario config template and exit");

  CommonFlags flags;
  CLI::App* spectrum = app.add_subcommand("spectrum", "ground state, gap, sector spectra");
  CLI::App* twist = app.add_subcommand("twist-scan", "twisted-spectrum and energy checks");
  CLI::App* lsm_run = app.add_subcommand("lsm-run", "spectral flow and gap bounds");
  CLI::App* lr = app.add_subcommand("lr-check", "locality and restriction bounds");
  CLI::App* cluster = app.add_subcommand("cluster-check", "exponential clustering bounds");
  for (CLI::App* sub : {spectrum, twist, lsm_run, lr, cluster}) add_common(sub, flags);

  CLI::App* report = app.add_subcommand("report", "fit gamma_L = C*log(L)/L over sweep rows");
  std::vector<std::string> report_paths;
  std::optional<std::string> report_out;
  report->add_option("paths", report_paths, "sweep.csv files (default <out>/sweep.csv)");
  report->add_option("--out", report_out, "output directory (default .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (want_template && app.get_subcommands().empty()) {
      std::cout << lsm::scenario_template();
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub == report) return run_report(report_paths, report_out);
    return run(sub->get_name(), flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
}
