#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crsfl/config.hpp"
#include "crsfl/engine.hpp"
#include "crsfl/metrics.hpp"
#include "crsfl/privacy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRefused = 1;  // config or certificate refusal
constexpr int kExitRuntime = 2;  // divergence or other runtime failure

std::string config_help() {
  std::string out = "Config file keys (key = value, '#' comments):\n";
  for (const crsfl::ConfigKeyDoc& k : crsfl::config_keys()) {
    out += "  " + k.key + " (" + k.type + (k.required ? ", required" : "") +
           "): " + k.doc + "\n";
  }
  return out;
}

struct RunOutcome {
  int exit_code = kExitOk;
  double final_accuracy = 0.0;
  double ot = 0.0;
  std::string error;
};

RunOutcome execute_run(const crsfl::ExperimentConfig& cfg,
                       const std::string& out_path) {
  RunOutcome outcome;
  try {
    crsfl::RunResult result = crsfl::run_experiment(cfg);
    if (result.certificate.issued && result.certificate.weak_delta) {
      std::cerr << "warning: " << result.certificate.reason << " (delta = "
                << result.certificate.delta_bound << ", 1/d = "
                << 1.0 / static_cast<double>(result.certificate.d) << ")\n";
    }
    outcome.ot = crsfl::overall_transmission(result.history);
    outcome.final_accuracy = result.final_accuracy;
    if (!out_path.empty()) {
      crsfl::emit_csv(result.history, out_path);
    }
  } catch (const crsfl::CertificateRefused& e) {
    outcome.exit_code = kExitRefused;
    outcome.error = e.what();
  } catch (const crsfl::ConfigError& e) {
    outcome.exit_code = kExitRefused;
    outcome.error = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitRuntime;
    outcome.error = e.what();
  }
  return outcome;
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  crsfl::ExperimentConfig cfg;
  try {
    cfg = crsfl::parse_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRefused;
  }
  std::string out_path = !out_flag.empty() ? out_flag : cfg.output;
  if (out_path.empty()) {
    std::cerr << "no output path: pass --out or set 'output' in the config\n";
    return kExitRefused;
  }
  RunOutcome outcome = execute_run(cfg, out_path);
  if (outcome.exit_code != kExitOk) {
    std::cerr << outcome.error << "\n";
    return outcome.exit_code;
  }
  std::printf("final_accuracy=%.6f ot_bytes=%.17g acc_per_ot_mib=%.9g csv=%s\n",
              outcome.final_accuracy, outcome.ot,
              outcome.ot > 0
                  ? crsfl::accuracy_per_ot(outcome.final_accuracy, outcome.ot)
                  : 0.0,
              out_path.c_str());
  return kExitOk;
}

int cmd_privacy(double epsilon, std::uint64_t d, std::optional<double> p,
                std::optional<std::uint64_t> k) {
  try {
    double p_max = crsfl::max_sampling_probability(epsilon);
    std::printf("epsilon     = %.9g\n", epsilon);
    std::printf("d           = %llu\n", static_cast<unsigned long long>(d));
    std::printf("p_max       = %.9g\n", p_max);
    if (!p) return kExitOk;
    std::printf("p           = %.9g\n", *p);
    std::uint64_t k_max = crsfl::max_sampling_size(epsilon, *p, d);
    std::printf("K_max       = %llu\n", static_cast<unsigned long long>(k_max));
    if (!k) return kExitOk;
    std::printf("K           = %llu\n", static_cast<unsigned long long>(*k));
    crsfl::PrivacyCertificate cert =
        crsfl::issue_certificate(epsilon, *p, *k, d);
    if (cert.issued) {
      std::printf("log_delta   = %.9g\n", cert.log_delta_bound);
      std::printf("delta_bound = %.9g\n", cert.delta_bound);
      std::printf("1/d         = %.9g\n", 1.0 / static_cast<double>(d));
      std::printf("delta<<1/d  = %s\n", cert.weak_delta ? "no" : "yes");
      std::printf("status      = issued%s\n",
                  cert.weak_delta ? " (warning: delta bound not below 1/d)"
                                  : "");
    } else {
      std::printf("status      = refused: %s\n", cert.reason.c_str());
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRefused;
  }
}

int cmd_sweep(const std::string& config_path, const std::string& key,
              const std::vector<std::string>& values,
              const std::string& out_dir) {
  crsfl::ExperimentConfig base;
  try {
    base = crsfl::parse_config(config_path);
    if (values.empty()) throw crsfl::ConfigError("sweep: empty value list");
    if (key != "K" && key != "epsilon" && key != "clients") {
      throw crsfl::ConfigError("sweep: key must be K, epsilon or clients");
    }
    std::filesystem::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRefused;
  }

  std::string summary = key + ",final_accuracy,ot_bytes,acc_per_ot_mib,status\n";
  bool any_failed = false;
  for (const std::string& raw : values) {
    crsfl::ExperimentConfig cfg = base;
    std::string error;
    try {
      if (key == "K") {
        double v = std::stod(raw);
        if (v <= 0) throw crsfl::ConfigError("sweep: K must be positive");
        if (v < 1.0) {  // fractional values are sampling ratios
          cfg.sampling_ratio = v;
          cfg.k = 0;
        } else {
          cfg.k = static_cast<std::uint32_t>(v);
          cfg.sampling_ratio = 0.0;
        }
      } else if (key == "epsilon") {
        cfg.epsilon = std::stod(raw);
      } else {
        cfg.clients = static_cast<std::uint32_t>(std::stoul(raw));
      }
    } catch (const std::exception& e) {
      error = e.what();
    }

    std::string csv_path = out_dir + "/run_" + key + "_" + raw + ".csv";
    if (error.empty()) {
      RunOutcome outcome = execute_run(cfg, csv_path);
      if (outcome.exit_code == kExitOk) {
        char line[256];
        std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%.17g,ok\n",
                      raw.c_str(), outcome.final_accuracy, outcome.ot,
                      outcome.ot > 0 ? crsfl::accuracy_per_ot(
                                           outcome.final_accuracy, outcome.ot)
                                     : 0.0);
        summary += line;
        std::printf("sweep %s=%s: final_accuracy=%.6f ot_bytes=%.17g\n",
                    key.c_str(), raw.c_str(), outcome.final_accuracy,
                    outcome.ot);
        continue;
      }
      error = outcome.error;
    }
    any_failed = true;
    std::string safe = error;
    for (char& ch : safe) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    summary += raw + ",,,,failed: " + safe + "\n";
    std::fprintf(stderr, "sweep %s=%s failed: %s\n", key.c_str(), raw.c_str(),
                 error.c_str());
  }

  std::ofstream out(out_dir + "/summary.csv", std::ios::binary);
  out << summary;
  if (!out) {
    std::cerr << "cannot write " << out_dir << "/summary.csv\n";
    return kExitRuntime;
  }
  return any_failed ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRS-FL simulator: conditional-random-sampling gradient "
               "compression with local differential privacy accounting"};
  app.require_subcommand(1);
  app.footer(config_help() +
             "\nEnvironment:\n  CRSFL_THREADS caps per-round client "
             "parallelism (results are identical for any value).\n"
             "Exit codes: 0 success, 1 config or certificate refusal, "
             "2 runtime failure.");

  auto* run = app.add_subcommand("run", "Run one experiment from a config");
  std::string run_config, run_out;
  run->add_option("--config", run_config, "config file path")->required();
  run->add_option("--out", run_out,
                  "metrics CSV path (overrides the config's 'output')");

  auto* privacy = app.add_subcommand(
      "privacy", "Inspect the admissible (epsilon, p, K) region");
  double pv_epsilon = 0.0;
  std::uint64_t pv_d = 0;
  double pv_p = -1.0;
  std::int64_t pv_k = -1;
  privacy->add_option("--epsilon", pv_epsilon, "privacy budget")->required();
  privacy->add_option("--d", pv_d, "model dimension")->required();
  privacy->add_option("--p", pv_p, "coordinate sampling probability");
  privacy->add_option("--K", pv_k, "sampling size");

  auto* sweep = app.add_subcommand(
      "sweep", "Run one experiment per value of K, epsilon or clients");
  std::string sw_config, sw_key, sw_out_dir;
  std::vector<std::string> sw_values;
  sweep->add_option("--config", sw_config, "base config file")->required();
  sweep->add_option("--key", sw_key, "K, epsilon or clients")->required();
  sweep
      ->add_option("--values", sw_values,
                   "comma-separated values; K values below 1 are sampling "
                   "ratios")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out-dir", sw_out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(run_config, run_out);
  if (privacy->parsed()) {
    return cmd_privacy(
        pv_epsilon, pv_d,
        pv_p >= 0 ? std::optional<double>(pv_p) : std::nullopt,
        pv_k >= 0 ? std::optional<std::uint64_t>(
                        static_cast<std::uint64_t>(pv_k))
                  : std::nullopt);
  }
  return cmd_sweep(sw_config, sw_key, sw_values, sw_out_dir);
}
