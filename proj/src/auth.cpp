#include "semcom/auth.hpp"

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <numeric>

#include "semcom/bytes.hpp"
#include "semcom/errors.hpp"

namespace semcom::auth {

IndexSet sample_indices(size_t n, size_t count, Rng& rng) {
  if (count < 1 || count > n) throw OutOfRangeError("index count must be in [1, N]");
  std::vector<uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (size_t k = 0; k < count; ++k) {
    const size_t other = k + static_cast<size_t>(rng.below(n - k));
    std::swap(pool[k], pool[other]);
  }
  IndexSet out;
  out.indices.assign(pool.begin(), pool.begin() + static_cast<long>(count));
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

std::vector<uint8_t> canonical_serialize(std::span<const double> sampled,
                                         const IndexSet& indices) {
  if (sampled.empty()) throw LengthMismatchError("empty sample forbidden");
  if (sampled.size() != indices.size())
    throw LengthMismatchError("sample and index counts differ");
  for (size_t k = 1; k < indices.indices.size(); ++k)
    if (indices.indices[k] <= indices.indices[k - 1])
      throw OutOfRangeError("indices must be strictly increasing");
  ByteWriter w;
  w.u32(static_cast<uint32_t>(indices.size()));
  for (uint32_t ix : indices.indices) w.u32(ix);
  for (double v : sampled) w.f64(v);
  return w.take();
}

AuthBundle sign_bundle(std::span<const double> payload, const IndexSet& indices,
                       const crypto::SecretKey& sk, std::string signer) {
  AuthBundle b;
  b.indices = indices;
  b.sampled.reserve(indices.size());
  for (uint32_t ix : indices.indices) {
    if (ix >= payload.size()) throw OutOfRangeError("index beyond payload length");
    b.sampled.push_back(payload[ix]);
  }
  const auto message = canonical_serialize(b.sampled, b.indices);
  const auto sig = crypto::sign(message, sk);
  b.signature.assign(sig.begin(), sig.end());
  b.signer = std::move(signer);
  return b;
}

double diff_metric(std::span<const double> a, std::span<const double> b,
                   DiffMode mode) {
  if (a.size() != b.size() || a.empty())
    throw LengthMismatchError("diff_metric needs equal nonempty vectors");
  double l1 = 0.0, linf = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double d = std::abs(a[k] - b[k]);
    l1 += d;
    linf = std::max(linf, d);
  }
  if (mode == DiffMode::MeanL1) l1 /= static_cast<double>(a.size());
  return l1 + linf;
}

VerifyOutcome verify_bundle(std::span<const double> received, const AuthBundle& bundle,
                            const crypto::PublicKey& pk,
                            const VerificationPolicy& policy) {
  if (bundle.sampled.size() != bundle.indices.size())
    throw LengthMismatchError("bundle sample and index counts differ");
  const auto message = canonical_serialize(bundle.sampled, bundle.indices);
  VerifyOutcome out;
  if (!crypto::verify(message, bundle.signature, pk)) {
    out.reason = "signature";
    return out;
  }
  std::vector<double> received_sample;
  received_sample.reserve(bundle.indices.size());
  for (uint32_t ix : bundle.indices.indices) {
    if (ix >= received.size())
      throw LengthMismatchError("received payload shorter than signed indices");
    received_sample.push_back(received[ix]);
  }
  out.diff = diff_metric(bundle.sampled, received_sample, policy.diff_mode);
  if (out.diff < policy.diff_threshold) {
    out.accepted = true;
  } else {
    out.reason = "diff";
  }
  return out;
}

double detection_probability(uint64_t n, uint64_t x, uint64_t i) {
  if (x > n) throw OutOfRangeError("modified count exceeds payload length");
  if (i < 1 || i > n) throw OutOfRangeError("index count must be in [1, N]");
  if (x == 0) return 0.0;
  if (i > n - x) return 1.0;  // C(n-x, i) = 0
  using boost::multiprecision::cpp_int;
  cpp_int num = 1, den = 1;
  for (uint64_t k = 0; k < i; ++k) {
    num *= cpp_int(n - x - k);
    den *= cpp_int(n - k);
  }
  const boost::multiprecision::cpp_rational miss(num, den);
  return 1.0 - miss.convert_to<double>();
}

std::vector<double> tamper(std::span<const double> payload, size_t count,
                           TamperMagnitude magnitude, double threshold, Rng& rng) {
  if (count < 1 || count > payload.size())
    throw OutOfRangeError("tamper count must be in [1, N]");
  if (!(threshold > 0.0)) throw OutOfRangeError("threshold must be positive");
  std::vector<double> out(payload.begin(), payload.end());
  const IndexSet positions = sample_indices(payload.size(), count, rng);
  double step = 0.0;
  if (magnitude == TamperMagnitude::AboveThreshold) {
    // A single sampled hit contributes 2 * step >= threshold on its own.
    step = 2.0 * threshold;
  } else {
    // Even if every modified position is sampled, L1 + Linf stays below
    // 0.9 * threshold.
    step = 0.45 * threshold / static_cast<double>(count);
  }
  for (uint32_t ix : positions.indices) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    out[ix] += sign * step;
  }
  return out;
}

std::vector<uint8_t> encode_bundle(const AuthBundle& bundle) {
  ByteWriter w;
  const auto canonical = canonical_serialize(bundle.sampled, bundle.indices);
  w.raw(canonical);
  w.u32(static_cast<uint32_t>(bundle.signature.size()));
  w.raw(bundle.signature);
  w.lp_str(bundle.signer);
  return w.take();
}

AuthBundle decode_bundle(std::span<const uint8_t> wire) {
  ByteReader r(wire);
  const uint32_t count = r.u32();
  if (count == 0) throw DecodeError("empty bundle");
  AuthBundle b;
  b.indices.indices.resize(count);
  for (auto& ix : b.indices.indices) ix = r.u32();
  for (size_t k = 1; k < count; ++k)
    if (b.indices.indices[k] <= b.indices.indices[k - 1])
      throw DecodeError("bundle indices not strictly increasing");
  b.sampled.resize(count);
  for (auto& v : b.sampled) v = r.f64();
  const uint32_t sig_len = r.u32();
  if (sig_len != 64) throw DecodeError("unexpected signature length");
  auto sig = r.raw(sig_len);
  b.signature.assign(sig.begin(), sig.end());
  b.signer = r.lp_str();
  r.expect_end();
  return b;
}

IndexReleaseSchedule::Release IndexReleaseSchedule::request_release(
    const IndexSet& indices) const {
  if (mode_ == ReleaseMode::Delayed && !acknowledged_)
    throw PrematureReleaseError("index set requested before payload acknowledgment");
  return {indices, mode_ == ReleaseMode::Encrypted};
}

double calibrate_threshold(size_t payload_len, size_t index_count,
                           const signal::ChannelModel& model, double snr_db,
                           size_t trials, Rng& rng, DiffMode mode,
                           double signal_power) {
  if (index_count < 1 || index_count > payload_len)
    throw OutOfRangeError("index count must be in [1, N]");
  if (trials < 2) throw OutOfRangeError("need at least two calibration trials");
  const double n0 = signal::snr_db_to_noise_power(snr_db, signal_power);
  const double sigma = std::sqrt(n0 / 2.0);
  std::vector<double> diffs(trials);
  std::vector<double> zero(index_count, 0.0), noise(index_count);
  for (size_t t = 0; t < trials; ++t) {
    const auto h = signal::draw_gain(model, rng);
    const double scale = sigma / std::abs(h);
    for (auto& v : noise) v = scale * rng.gaussian();
    diffs[t] = diff_metric(noise, zero, mode);
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  var /= static_cast<double>(trials);
  // Floor keeps the policy invariant (threshold > 0) on noiseless channels.
  return std::max(mean + 3.0 * std::sqrt(var), 1e-9);
}

}  // namespace semcom::auth
