// Command-line front end: simulate | extract | evaluate | report.

#include <omp.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uwbcount/io.hpp"
#include "uwbcount/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kNumeric = 4 };

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string scenario = "all";
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
  cmd->add_option("--config", o.config, "key=value config file (defaults apply when omitted)");
  auto* out = cmd->add_option("--out", o.out, "output path");
  if (out_required) out->required();
  cmd->add_option("--seed", o.seed, "master seed, overrides the config");
  cmd->add_option("--workers", o.workers, "worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--scenario", o.scenario, "walk3, walk4, queue or all")
      ->check(CLI::IsMember({"walk3", "walk4", "queue", "all"}));
}

uwbcount::PipelineConfig resolve_config(const CommonOptions& o) {
  uwbcount::PipelineConfig cfg = o.config.empty() ? uwbcount::PipelineConfig{} : uwbcount::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

std::vector<uwbcount::Scenario> scenarios(const CommonOptions& o) {
  if (o.scenario == "all") return {};
  return {uwbcount::parse_scenario(o.scenario)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd counting from simulated impulse-radar returns"};
  app.require_subcommand(1);
  app.set_version_flag("--version", uwbcount::version_string());

  CommonOptions sim_o, ext_o, eval_o, rep_o;
  std::string dataset, features, report;

  auto* sim = app.add_subcommand("simulate", "simulate radar records into a record container");
  add_common(sim, sim_o, true);

  auto* ext = app.add_subcommand("extract", "compute hybrid features for every sample of a record container");
  ext->add_option("dataset", dataset, "record container")->required();
  add_common(ext, ext_o, true);

  auto* ev = app.add_subcommand("evaluate", "run the repeated train/test protocol on a feature container");
  ev->add_option("features", features, "feature container")->required();
  add_common(ev, eval_o, true);

  auto* rep = app.add_subcommand("report", "print a JSON report as text tables");
  rep->add_option("report", report, "report JSON")->required();
  add_common(rep, rep_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (sim->parsed()) {
      if (sim_o.workers > 0) omp_set_num_threads(sim_o.workers);
      uwbcount::cmd_simulate(resolve_config(sim_o), sim_o.out, scenarios(sim_o));
      std::cerr << "wrote " << sim_o.out << "\n";
    } else if (ext->parsed()) {
      if (ext_o.workers > 0) omp_set_num_threads(ext_o.workers);
      uwbcount::cmd_extract(dataset, resolve_config(ext_o), ext_o.out, scenarios(ext_o));
      std::cerr << "wrote " << ext_o.out << " and " << uwbcount::csv_path_for(ext_o.out) << "\n";
    } else if (ev->parsed()) {
      if (eval_o.workers > 0) omp_set_num_threads(eval_o.workers);
      const auto r = uwbcount::cmd_evaluate(features, resolve_config(eval_o), eval_o.out, scenarios(eval_o));
      std::cout << uwbcount::render_report(r);
    } else if (rep->parsed()) {
      const std::string text = uwbcount::cmd_report(report);
      if (rep_o.out.empty())
        std::cout << text;
      else
        uwbcount::write_text(rep_o.out, text);
    }
  } catch (const uwbcount::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const uwbcount::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const uwbcount::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
