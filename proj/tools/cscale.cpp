// Command-line front end for batch jobs.
//   cscale <spectrum|resonances|numrange|weyl|resolvent|ichinose|all> --config FILE [--out DIR] [--seed N]
// Exit status: 0 all pass, 2 some tolerance failed, 1 error.

#include <CLI11.hpp>

#include <iostream>

#include "cscale/job.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Complex-scaling spectral analysis jobs"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  for (const auto& name : cscale::analysis_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " analysis only");
    sub->add_option("--config", config_path, "job config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "seed for random batteries (overrides seed)");
  }
  auto* all = app.add_subcommand("all", "run every analysis listed in the config");
  all->add_option("--config", config_path, "job config (JSON)")->required()->check(CLI::ExistingFile);
  all->add_option("--out", out_dir, "output directory (overrides output_dir)");
  all->add_option("--seed", seed, "seed for random batteries (overrides seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const CLI::App* chosen = app.get_subcommands().front();
    cscale::json j;
    {
      std::ifstream in(config_path);
      j = cscale::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw cscale::ConfigError("config " + config_path + ": not valid JSON");
    }
    if (chosen->get_name() != "all") j["analyses"] = {chosen->get_name()};
    if (chosen->count("--seed")) j["seed"] = seed;
    if (chosen->count("--out")) j["output_dir"] = out_dir;
    const cscale::JobConfig cfg = cscale::parse_config(j);
    cscale::ensure_writable(cfg.output_dir);

    const cscale::RunReport rep = cscale::run_job(cfg);
    cscale::export_report(rep, cfg.output_dir, cscale::ExportFormat::Csv);
    cscale::export_report(rep, cfg.output_dir, cscale::ExportFormat::Json);
    for (const auto& [name, res] : rep.analyses) {
      std::cout << name << ": " << cscale::to_string(res.status);
      if (!res.message.empty()) std::cout << " (" << res.message << ")";
      std::cout << "\n";
    }
    switch (rep.overall()) {
      case cscale::Status::Pass: return 0;
      case cscale::Status::Fail: return 2;
      case cscale::Status::Error: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
