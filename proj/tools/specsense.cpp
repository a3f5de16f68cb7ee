// specsense: runs spectrum-sensing decoding experiments and writes
// results.csv, summary.csv and manifest.txt.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specsense/config.hpp"
#include "specsense/error.hpp"
#include "specsense/harness.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDecode = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) specsense::fail(specsense::ErrorKind::InvalidConfig, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) specsense::fail(specsense::ErrorKind::InvalidConfig, "cannot write '" + path.string() + "'");
  out << body;
}

struct Arguments {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Leftover arguments: an optional config path plus `--key value` or
// `--key=value` overrides.
Arguments split_arguments(const std::vector<std::string>& extras) {
  Arguments out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) {
      if (!out.config_path.empty())
        specsense::fail(specsense::ErrorKind::InvalidConfig, "unexpected argument '" + arg + "'");
      out.config_path = arg;
      continue;
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= extras.size())
        specsense::fail(specsense::ErrorKind::InvalidConfig, "missing value for '" + arg + "'");
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    out.overrides.emplace_back(key, value);
  }
  return out;
}

specsense::ExperimentConfig resolve_config(const Arguments& args) {
  specsense::ExperimentConfig config;
  if (!args.config_path.empty()) config = specsense::parse_config(read_file(args.config_path));
  for (const auto& [key, value] : args.overrides) {
    try {
      specsense::apply_setting(config, key, value);
    } catch (const specsense::Error& e) {
      specsense::fail(e.kind(), "override --" + key + ": " + e.what());
    }
  }
  return config;
}

std::string manifest(const specsense::ExperimentConfig& config, const std::string& source, int threads) {
  std::ostringstream os;
  os << "# specsense run manifest\n";
  os << "version = " << kVersion << "\n";
  os << "config_source = " << (source.empty() ? "(defaults)" : source) << "\n";
  os << "master_seed = " << config.seed << "\n";
  os << "seed_rule = trial seed = splitmix64 chain of (master_seed, exp_id, trial); "
        "streams per trial keyed by geometry, fading, filters, noise, erasure, occupancy\n";
  os << "snr_anchor = noise std = RMS of the nonzero noiseless reports * 10^(-snr_db/20), "
        "added per report before erasure\n";
  os << "noise_level_used_by_decoders = injected noise std (oracle)\n";
  os << "threads = " << threads << "\n";
  os << "\n# resolved configuration\n";
  os << specsense::dump_config(config);
  return os.str();
}

void print_summary(const std::vector<specsense::CellSummary>& summary) {
  std::printf("%-6s %-12s %4s %3s %6s %9s %7s %15s %15s %15s %5s\n", "exp", "decoder", "p", "s", "rate",
              "snr_db", "trials", "POD", "FAR", "MDR", "fail");
  for (const auto& s : summary) {
    const std::string snr = s.cell.snr_db ? specsense::format_number(*s.cell.snr_db) : "noiseless";
    std::printf("%-6d %-12s %4d %3d %6.3f %9s %7d %7.4f+-%.4f %7.4f+-%.4f %7.4f+-%.4f %5d\n", s.cell.exp_id,
                specsense::to_string(s.decoder), s.cell.plan.p, s.cell.s, s.cell.rate, snr.c_str(), s.trials,
                s.pod.mean, s.pod.se, s.far.mean, s.far.se, s.mdr.mean, s.mdr.se, s.failures);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative spectrum sensing decoders and experiment harness"};
  app.usage("specsense run [config] [--key value]... [--out dir] [--threads N] [--keep-going]");
  app.set_version_flag("--version", kVersion);
  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "Print every config key with its default value");

  auto* run = app.add_subcommand("run", "Run an experiment grid");
  std::string out_dir = ".";
  bool keep_going = false;
  bool timing = false;
  int threads = 1;
  bool run_dump = false;
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--keep-going", keep_going, "Exit 0 even if some trial fails to decode");
  run->add_option("--threads", threads, "Worker threads (0 = auto)");
  run->add_flag("--timing", timing, "Fill the runtime_ms column (output no longer reproducible)");
  run->add_flag("--dump-defaults", run_dump, "Print the resolved config and exit");
  run->allow_extras();

  auto* scenario_cmd = app.add_subcommand("scenario", "Print the generated scenario of one trial");
  int exp_id = 0;
  int trial = 0;
  scenario_cmd->add_option("--exp-id", exp_id, "Cell index");
  scenario_cmd->add_option("--trial", trial, "Trial index");
  scenario_cmd->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (dump_defaults && !run->parsed()) {
      std::cout << specsense::dump_config(specsense::ExperimentConfig{});
      return kExitOk;
    }

    if (scenario_cmd->parsed()) {
      auto config = resolve_config(split_arguments(scenario_cmd->remaining()));
      config.validate();
      const auto cells = specsense::enumerate_cells(config);
      if (exp_id < 0 || exp_id >= static_cast<int>(cells.size()))
        specsense::fail(specsense::ErrorKind::InvalidConfig, "--exp-id out of range");
      const auto data = specsense::generate_trial(config, cells[static_cast<std::size_t>(exp_id)], trial);
      std::cout << specsense::scenario_to_text(data.scenario);
      return kExitOk;
    }

    if (!run->parsed()) {
      std::cout << app.help();
      return kExitConfig;
    }

    const Arguments args = split_arguments(run->remaining());
    auto config = resolve_config(args);
    if (run_dump || dump_defaults) {
      std::cout << specsense::dump_config(config);
      return kExitOk;
    }
    config.validate();

    const auto result = specsense::run_experiment(config, {threads, timing});

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "results.csv", specsense::results_csv(result.records));
    write_file(dir / "summary.csv", specsense::summary_csv(result.summary));
    write_file(dir / "manifest.txt", manifest(config, args.config_path, threads));
    print_summary(result.summary);

    if (result.any_failure()) {
      for (const auto& r : result.records)
        if (r.decode_failure)
          std::fprintf(stderr, "decode failure: exp %d trial %d (%s): %s\n", r.exp_id, r.trial,
                       specsense::to_string(r.decoder), r.failure_message.c_str());
      if (!keep_going) return kExitDecode;
    }
    return kExitOk;
  } catch (const specsense::Error& e) {
    std::fprintf(stderr, "specsense: %s: %s\n", specsense::to_string(e.kind()), e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specsense: %s\n", e.what());
    return kExitConfig;
  }
}
