#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semcom/config.hpp"
#include "semcom/ledger.hpp"
#include "semcom/train.hpp"

namespace semcom::sim {

// One metric point. Unused dimensions stay at their sentinels and serialize
// as empty CSV fields.
struct MetricRow {
  std::string phase;
  std::string metric;
  std::string channel;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  long kb_prefix = -1;
  double feature_keep = -1.0;
  std::string device;
  double value = 0.0;
};

struct RunReport {
  std::string config_hash;
  uint64_t seed = 0;
  std::vector<MetricRow> rows;
};

std::string report_csv(const RunReport& report);
std::string report_json(const RunReport& report);

// Writes CSV and JSON (paths may be empty to skip one of them).
void emit_report(const RunReport& report, const std::string& csv_path,
                 const std::string& json_path);

struct Device {
  DeviceProfile profile;
  chain::Identity identity;
  codec::TrainState train;
  std::vector<codec::Sentence> shard;
  bool late = false;
};

// Deterministic single-process orchestration of the three phases: update,
// synchronization, communication. Device actions run in round-robin order.
class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& cfg);

  void run_update_phase();
  void run_sync_phase();
  void run_communication_phase();

  const RunReport& report() const { return report_; }
  const chain::LedgerState& ledger() const { return ledger_; }
  const std::vector<Device>& devices() const { return devices_; }
  const codec::Vocabulary& vocabulary() const { return vocab_; }

 private:
  Device make_device(uint32_t index, bool late);
  void train_device(Device& dev);
  uint64_t transfer_blob(const Device& dev, const std::vector<uint8_t>& blob,
                         Rng& rng, double* accept_out);
  void push(MetricRow row) { report_.rows.push_back(std::move(row)); }

  ScenarioConfig cfg_;
  codec::Vocabulary vocab_;
  std::vector<codec::Sentence> corpus_;
  codec::CodecParams shared_init_;
  chain::KeyAuthority authority_;
  chain::LedgerState ledger_;
  std::vector<Device> devices_;
  Rng rng_;
  uint64_t update_rng_seed_ = 0;
  uint64_t comm_rng_seed_ = 0;
  uint64_t calib_rng_seed_ = 0;
  std::vector<uint64_t> device_seeds_;
  uint64_t tx_nonce_ = 0;
  bool synced_ = false;
  RunReport report_;
};

// Full run: update -> sync -> communication, then the report.
RunReport run_scenario(const ScenarioConfig& cfg);

// Byte model for conventional transport: blob length plus 5% framing.
uint64_t conventional_bytes(size_t blob_len);

// Byte model for semantic transport of one payload of `float_count` doubles:
// complex symbols at two 8-byte coordinates each, plus the auth bundle on the
// control channel.
uint64_t semantic_payload_bytes(size_t float_count, size_t bundle_bytes);

}  // namespace semcom::sim
