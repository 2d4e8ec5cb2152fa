#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semcom/crypto.hpp"
#include "semcom/rng.hpp"
#include "semcom/signal.hpp"

namespace semcom::auth {

// Strictly increasing sample positions into a payload of length N.
struct IndexSet {
  std::vector<uint32_t> indices;

  size_t size() const { return indices.size(); }
};

// Uniform sample of `count` distinct positions out of [0, n), sorted.
IndexSet sample_indices(size_t n, size_t count, Rng& rng);

// Canonical signing message: u32 count, indices as u32 little-endian
// ascending, values as f64 little-endian. Injective over (values, indices).
std::vector<uint8_t> canonical_serialize(std::span<const double> sampled,
                                         const IndexSet& indices);

// Sampled values plus a detached signature over the canonical serialization.
struct AuthBundle {
  std::vector<double> sampled;  // W_I, in index order
  IndexSet indices;             // I
  std::vector<uint8_t> signature;
  std::string signer;
};

AuthBundle sign_bundle(std::span<const double> payload, const IndexSet& indices,
                       const crypto::SecretKey& sk, std::string signer);

enum class DiffMode {
  SumL1,   // ||a-b||_1 + ||a-b||_inf, the metric as printed
  MeanL1,  // mean absolute deviation + ||a-b||_inf
};

// Acceptance statistic for lossy payloads.
double diff_metric(std::span<const double> a, std::span<const double> b,
                   DiffMode mode = DiffMode::SumL1);

enum class ReleaseMode { Delayed, Encrypted };

struct VerificationPolicy {
  double diff_threshold = 0.0;
  ReleaseMode release = ReleaseMode::Delayed;
  DiffMode diff_mode = DiffMode::SumL1;
};

struct VerifyOutcome {
  bool accepted = false;
  double diff = 0.0;
  std::string reason;  // empty when accepted
};

// Checks the signature, samples the received payload at the bundle's indices,
// and accepts iff the diff is below the policy threshold. The diff value is
// reported either way. Throws SignatureInvalidError only for malformed input
// sizes; a failing signature is an outcome, not an exception.
VerifyOutcome verify_bundle(std::span<const double> received, const AuthBundle& bundle,
                            const crypto::PublicKey& pk, const VerificationPolicy& policy);

// Probability that sampling I positions out of N hits at least one of x
// modified positions: 1 - C(N-x, I) / C(N, I), evaluated in exact integer
// arithmetic.
double detection_probability(uint64_t n, uint64_t x, uint64_t i);

enum class TamperMagnitude {
  AboveThreshold,  // per-element deviation large enough that any sampled hit rejects
  BelowThreshold,  // total deviation stays under the threshold by construction
};

// Perturbs exactly `count` distinct positions of the payload.
std::vector<double> tamper(std::span<const double> payload, size_t count,
                           TamperMagnitude magnitude, double threshold, Rng& rng);

// Bundle wire format: canonical_serialize bytes, then u32 signature length
// (64), signature, u32 signer-id length, signer id. No trailing bytes.
std::vector<uint8_t> encode_bundle(const AuthBundle& bundle);
AuthBundle decode_bundle(std::span<const uint8_t> wire);

// Index-release bookkeeping for one transmission. In delayed mode the index
// set may leave the sender only after the receiver acknowledged the payload;
// in encrypted mode it leaves immediately inside an opaque envelope that only
// the receiver can open (modeled, not implemented cryptographically).
class IndexReleaseSchedule {
 public:
  explicit IndexReleaseSchedule(ReleaseMode mode) : mode_(mode) {}

  void mark_payload_delivered() { delivered_ = true; }
  void mark_acknowledged() { acknowledged_ = true; }

  struct Release {
    IndexSet indices;
    bool encrypted = false;
  };

  // Throws PrematureReleaseError in delayed mode before the acknowledgment.
  Release request_release(const IndexSet& indices) const;

  ReleaseMode mode() const { return mode_; }
  bool acknowledged() const { return acknowledged_; }

 private:
  ReleaseMode mode_;
  bool delivered_ = false;
  bool acknowledged_ = false;
};

// Honest-transmission calibration: threshold = mean(diff) + 3 * std(diff)
// over `trials` simulated transmissions of a payload with `payload_len` real
// coordinates sampled at `index_count` positions, under the given channel and
// SNR relative to `signal_power`. The diff of an honest transmission depends
// only on the equalized noise.
double calibrate_threshold(size_t payload_len, size_t index_count,
                           const signal::ChannelModel& model, double snr_db,
                           size_t trials, Rng& rng, DiffMode mode = DiffMode::SumL1,
                           double signal_power = 1.0);

}  // namespace semcom::auth
