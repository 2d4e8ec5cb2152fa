#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/auth.hpp"
#include "semcom/codec.hpp"
#include "semcom/dp.hpp"
#include "semcom/signal.hpp"

namespace semcom::sim {

// Per-device capability profile. Lists in the config are cycled across the
// device count, so heterogeneous fleets stay easy to express.
struct DeviceProfile {
  std::string id;
  uint64_t max_symbols = 1 << 16;  // M
  uint32_t kb_use = 0;             // P_use, 0 means "all of P"
  bool semantic_transport = true;  // model transfer over the semantic channel
};

struct TrainingSchedule {
  uint32_t semantic_steps = 0;
  uint32_t channel_steps = 0;
  uint32_t kb_steps = 0;
  uint32_t whole_steps = 400;
  double learning_rate = 1e-2;
  double snr_db = std::numeric_limits<double>::infinity();

  bool operator==(const TrainingSchedule&) const = default;
};

struct AdversarySpec {
  bool enabled = false;
  uint32_t tamper_count = 8;  // x
  auth::TamperMagnitude magnitude = auth::TamperMagnitude::AboveThreshold;
  double fraction = 0.5;  // share of communication transmissions attacked

  bool operator==(const AdversarySpec&) const = default;
};

struct DpSpec {
  bool enabled = false;
  double epsilon = 2.0;
  double delta = 1e-5;
  double sigma_model = 0.0;
  bool composition_accounting = true;  // false: aggregate-variance accounting
  double h_min = 0.5;                  // worst-case |h| for fading accounting

  bool operator==(const DpSpec&) const = default;
};

struct VerificationSpec {
  uint32_t index_size = 8;  // |I|
  uint32_t calibration_trials = 1000;
  auth::ReleaseMode release = auth::ReleaseMode::Delayed;
  auth::DiffMode diff_mode = auth::DiffMode::SumL1;

  bool operator==(const VerificationSpec&) const = default;
};

struct EvaluationSpec {
  uint32_t sentences = 200;
  std::vector<uint32_t> kb_prefix_grid;      // empty: just P
  std::vector<double> feature_keep_grid;     // fractions of rows, default {1.0}

  bool operator==(const EvaluationSpec&) const = default;
};

struct ScenarioConfig {
  // run
  uint64_t seed = 1;
  std::string out_csv = "report.csv";
  std::string out_json = "report.json";
  std::string ledger_file;  // optional append-only ledger dump

  // codec (defaults follow the reference shapes: 8 knowledge vectors of 128)
  uint32_t feature_dim = 128;
  uint32_t kb_vectors = 8;
  uint32_t channel_dim = 16;

  TrainingSchedule training;

  signal::ChannelModel channel = signal::ChannelModel::awgn();
  std::vector<double> snr_grid_db = {0.0, 6.0, 12.0, 18.0};

  // federation
  std::string channel_id = "text";
  uint32_t federation_rounds = 1;
  bool kb_only = false;
  double update_snr_db = 12.0;  // link quality for semantic blob transport

  uint32_t device_count = 3;
  uint32_t late_joiners = 0;
  std::vector<uint64_t> max_symbols = {1 << 16};
  std::vector<uint32_t> kb_use;  // empty: all devices use all of P
  std::vector<bool> semantic_transport = {true};

  VerificationSpec verification;
  AdversarySpec adversary;
  DpSpec dp;
  EvaluationSpec evaluation;

  bool operator==(const ScenarioConfig&) const = default;

  DeviceProfile device_profile(uint32_t index) const;
};

// Flat sectioned key=value text; a leading '{' switches to the JSON reading
// of the same schema. Unknown sections or keys are rejected with the line.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

// Canonical text form; parse(serialize(c)) == c.
std::string serialize_config(const ScenarioConfig& cfg);

// First 16 hex chars of sha256 over the canonical text.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace semcom::sim
