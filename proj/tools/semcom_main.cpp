// Command-line front end: scenario runs, DP calibration tables, detection
// curves and BLEU sweeps. Exit codes: 0 success, 2 config error, 3 runtime
// abort.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "semcom/auth.hpp"
#include "semcom/bleu.hpp"
#include "semcom/dp.hpp"
#include "semcom/errors.hpp"
#include "semcom/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_run(const std::string& config_path) {
  semcom::sim::ScenarioConfig cfg = semcom::sim::load_config(config_path);
  const semcom::sim::RunReport report = semcom::sim::run_scenario(cfg);
  semcom::sim::emit_report(report, cfg.out_csv, cfg.out_json);
  std::cout << "wrote " << cfg.out_csv << " (" << report.rows.size() << " rows)\n";
  if (!cfg.out_json.empty()) std::cout << "wrote " << cfg.out_json << "\n";
  return kExitOk;
}

int cmd_dp_calibrate(double epsilon, double delta, double sigma_model,
                     double sigma_channel, double sensitivity, size_t symbols,
                     const std::string& mode) {
  semcom::dp::PrivacyBudget target{epsilon, delta};
  semcom::dp::NoiseProfile profile;
  profile.sigma_model = sigma_model;
  profile.sigma_channel = sigma_channel;
  if (sensitivity <= 0.0) sensitivity = semcom::dp::sensitivity_bound(symbols);

  std::printf("eps_model,eps_channel,sigma_dp,eps_hat,delta_total\n");
  auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  if (mode == "composition") {
    try {
      const auto res = semcom::dp::calibrate(target, profile, sensitivity, symbols);
      std::printf("%s,%s,%.12g,%.12g,%.12g\n", opt(res.eps_model).c_str(),
                  opt(res.eps_channel).c_str(), res.sigma_dp, res.composed.epsilon_hat,
                  res.composed.delta_total);
    } catch (const semcom::UnachievableError& e) {
      std::printf(",,inf,inf,\n");
      std::cerr << "unachievable: " << e.what() << "\n";
    }
  } else {
    const double total_needed = semcom::dp::analytic_gaussian_sigma(target, sensitivity);
    const double chan = profile.effective_sigma_channel();
    const double have = sigma_model * sigma_model + chan * chan;
    const double sigma_dp = std::sqrt(std::max(0.0, total_needed * total_needed - have));
    const double eps =
        semcom::dp::aggregate_variance_budget(profile, sigma_dp, sensitivity, delta);
    std::printf(",,%.12g,%.12g,%.12g\n", sigma_dp, eps, delta);
  }
  return kExitOk;
}

int cmd_detect_curve(uint64_t n, uint64_t x, const std::string& range, uint64_t trials,
                     uint64_t seed) {
  uint64_t i_min = 0, i_max = 0;
  const size_t dots = range.find("..");
  if (dots == std::string::npos) {
    i_min = i_max = std::stoull(range);
  } else {
    i_min = std::stoull(range.substr(0, dots));
    i_max = std::stoull(range.substr(dots + 2));
  }
  if (i_min < 1 || i_max < i_min || i_max > n)
    throw semcom::OutOfRangeError("index range must satisfy 1 <= min <= max <= N");

  semcom::Rng rng(seed);
  std::printf("n,x,i,analytic,empirical,trials\n");
  for (uint64_t i = i_min; i <= i_max; ++i) {
    const double analytic = semcom::auth::detection_probability(n, x, i);
    uint64_t hits = 0;
    for (uint64_t t = 0; t < trials; ++t) {
      const auto sampled = semcom::auth::sample_indices(n, i, rng);
      const auto modified = semcom::auth::sample_indices(n, x, rng);
      bool overlap = false;
      for (uint32_t a : sampled.indices)
        if (std::binary_search(modified.indices.begin(), modified.indices.end(), a)) {
          overlap = true;
          break;
        }
      if (overlap) ++hits;
    }
    std::printf("%llu,%llu,%llu,%.6f,%.6f,%llu\n", (unsigned long long)n,
                (unsigned long long)x, (unsigned long long)i, analytic,
                static_cast<double>(hits) / static_cast<double>(trials),
                (unsigned long long)trials);
  }
  return kExitOk;
}

int cmd_bleu_sweep(const std::string& config_path) {
  semcom::sim::ScenarioConfig cfg = semcom::sim::load_config(config_path);
  semcom::sim::Simulation sim(cfg);
  sim.run_update_phase();
  sim.run_sync_phase();
  sim.run_communication_phase();
  const auto& report = sim.report();
  std::string csv = "config_hash,seed,channel,snr_db,kb_prefix,feature_keep,metric,value\n";
  for (const auto& row : report.rows) {
    if (row.phase != "communication" || row.metric.rfind("bleu", 0) != 0) continue;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%llu,%s,%.6g,%ld,%.6g,%s,%.12g\n",
                  report.config_hash.c_str(), (unsigned long long)report.seed,
                  row.channel.c_str(), row.snr_db, row.kb_prefix, row.feature_keep,
                  row.metric.c_str(), row.value);
    csv += buf;
  }
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secure distributed semantic communication simulator"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute a scenario config end to end");
  run->add_option("config", config_path, "scenario config file")->required();

  double epsilon = 1.0, delta = 1e-5, sigma_model = 0.0, sigma_channel = 0.0;
  double sensitivity = 0.0;
  size_t symbols = 1;
  std::string mode = "composition";
  auto* dp = app.add_subcommand("dp-calibrate", "joint model-channel noise calibration");
  dp->add_option("--epsilon", epsilon, "target epsilon")->required();
  dp->add_option("--delta", delta, "target delta")->required();
  dp->add_option("--sigma-model", sigma_model, "model noise std per real coordinate");
  dp->add_option("--sigma-channel", sigma_channel, "channel noise std per real coordinate");
  dp->add_option("--sensitivity", sensitivity, "L2 sensitivity (default 2*sqrt(symbols))");
  dp->add_option("--symbols", symbols, "symbol count for the default sensitivity");
  dp->add_option("--mode", mode, "composition or aggregate")
      ->check(CLI::IsMember({"composition", "aggregate"}));

  uint64_t n = 128, x = 8, trials = 10000, seed = 1;
  std::string range = "1..16";
  auto* detect = app.add_subcommand("detect-curve",
                                    "analytic vs Monte-Carlo detection probability");
  detect->add_option("--n", n, "payload length")->required();
  detect->add_option("--x", x, "modified positions")->required();
  detect->add_option("--i", range, "index set size or MIN..MAX range")->required();
  detect->add_option("--trials", trials, "Monte-Carlo trials per point");
  detect->add_option("--seed", seed, "rng seed");

  std::string sweep_config;
  auto* sweep = app.add_subcommand("bleu-sweep", "BLEU over the SNR and pruning grid");
  sweep->add_option("config", sweep_config, "scenario config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (dp->parsed())
      return cmd_dp_calibrate(epsilon, delta, sigma_model, sigma_channel, sensitivity,
                              symbols, mode);
    if (detect->parsed()) return cmd_detect_curve(n, x, range, trials, seed);
    if (sweep->parsed()) return cmd_bleu_sweep(sweep_config);
  } catch (const semcom::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
