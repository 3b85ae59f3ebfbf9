// smplab: drive shaping policies, privacy metrics, and attacker probes
// over smart-meter load traces from experiment config files.
//
// Subcommands:
//   simulate  one policy run (plus optional masked aggregation records)
//   sweep     records across a sweep axis (alpha | b_max | p_e)
//   ba        privacy-power curve over a budget grid
//   attack    detection-exponent experiment
//   report    rewrite a JSON records file as csv/json
//
// Exit codes: 0 success, 2 config error, 3 at least one infeasible point.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "smp/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* c = cmd->add_option("--config", args.config_path, "experiment config file");
  if (config_required) c->required();
  cmd->add_option("--out", args.out_path, "output file (default: stdout)");
  cmd->add_option("--format", args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

void emit(const smp::harness::RunOutput& out, const CommonArgs& args) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!args.out_path.empty()) {
    file.open(args.out_path, std::ios::binary);
    if (!file) throw smp::ConfigError("cannot write output file: " + args.out_path);
    os = &file;
  }
  if (args.format == "json")
    smp::io::write_records_json(*os, out.records);
  else
    smp::io::write_records_csv(*os, out.records);
}

smp::harness::ExperimentConfig load(const CommonArgs& args) {
  auto cfg = smp::harness::load_experiment_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smart-meter privacy laboratory"};
  app.require_subcommand(1);

  CommonArgs sim_args, sweep_args, ba_args, attack_args, report_args;

  auto* sim = app.add_subcommand("simulate", "run the configured policy once");
  add_common(sim, sim_args);
  auto* sweep = app.add_subcommand("sweep", "run the configured sweep");
  add_common(sweep, sweep_args);
  auto* ba = app.add_subcommand("ba", "privacy-power curve over a budget grid");
  add_common(ba, ba_args);
  auto* attack = app.add_subcommand("attack", "detection error-exponent experiment");
  add_common(attack, attack_args);
  auto* report = app.add_subcommand("report", "rewrite a JSON records file");
  add_common(report, report_args);

  CLI11_PARSE(app, argc, argv);

  try {
    smp::harness::RunOutput out;
    CommonArgs* args = nullptr;
    if (sim->parsed()) {
      args = &sim_args;
      auto cfg = load(*args);
      out = smp::harness::run(cfg);
      if (cfg.raw.contains("aggregation")) {
        const auto trace = smp::harness::resolve_trace(cfg);
        auto agg = smp::harness::run_aggregation(cfg.raw.at("aggregation"), trace,
                                                 args->config_path + ".aggregation");
        for (auto& r : agg.records) out.records.push_back(std::move(r));
      }
    } else if (sweep->parsed()) {
      args = &sweep_args;
      auto cfg = load(*args);
      if (cfg.raw.contains("pe_sweep")) {
        auto pc = smp::harness::pe_sweep_from_json(cfg.raw.at("pe_sweep"),
                                                   args->config_path + ".pe_sweep");
        if (args->seed_set) pc.seed = args->seed;
        out = smp::harness::sweep_pe(pc);
      } else {
        out = smp::harness::run(cfg);
      }
    } else if (ba->parsed()) {
      args = &ba_args;
      const auto cfg = smp::io::parse_json_file(args->config_path);
      if (!cfg.contains("ba"))
        throw smp::ConfigError(args->config_path + ": missing 'ba' block");
      out = smp::harness::run_ba(cfg.at("ba"), args->config_path + ".ba");
    } else if (attack->parsed()) {
      args = &attack_args;
      const auto cfg = smp::io::parse_json_file(args->config_path);
      if (!cfg.contains("attack_exponents"))
        throw smp::ConfigError(args->config_path + ": missing 'attack_exponents' block");
      out = smp::harness::run_attack_exponents(cfg.at("attack_exponents"),
                                               args->config_path + ".attack_exponents");
    } else {
      args = &report_args;
      const auto records = smp::io::records_from_json(
          smp::io::parse_json_file(args->config_path), args->config_path);
      out.records = records;
    }
    emit(out, *args);
    return out.any_infeasible ? 3 : 0;
  } catch (const smp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const smp::FeasibilityError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const smp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
