#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "semcom/auth.hpp"
#include "semcom/errors.hpp"

using namespace semcom;
using namespace semcom::auth;

namespace {

crypto::KeyPair test_keys(uint64_t seed = 1) {
  Rng rng(seed);
  return crypto::generate_keypair(rng);
}

std::vector<double> random_payload(size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.gaussian();
  return w;
}

}  // namespace

TEST_CASE("sample_indices covers the documented cases") {
  Rng rng(3);
  const auto all = sample_indices(5, 5, rng);
  CHECK(all.indices == std::vector<uint32_t>{0, 1, 2, 3, 4});

  CHECK_THROWS_AS(sample_indices(5, 0, rng), OutOfRangeError);
  CHECK_THROWS_AS(sample_indices(5, 6, rng), OutOfRangeError);

  Rng a(9), b(9);
  CHECK(sample_indices(100, 10, a).indices == sample_indices(100, 10, b).indices);
}

TEST_CASE("single-index sampling is uniform within 3 sigma") {
  Rng rng(11);
  const size_t n = 16;
  const int draws = 10000;
  std::vector<int> counts(n, 0);
  for (int k = 0; k < draws; ++k) ++counts[sample_indices(n, 1, rng).indices[0]];
  const double expect = static_cast<double>(draws) / n;
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / n));
  for (size_t ix = 0; ix < n; ++ix)
    CHECK(std::abs(counts[ix] - expect) < 3.0 * sigma + 1.0);
}

TEST_CASE("canonical serialization is strict and injective") {
  IndexSet ix{{1, 4, 7}};
  const std::vector<double> w{0.5, -0.25, 3.0};
  const auto bytes = canonical_serialize(w, ix);
  CHECK(bytes.size() == 4 + 3 * 4 + 3 * 8);

  CHECK_THROWS_AS(canonical_serialize({}, IndexSet{}), LengthMismatchError);
  CHECK_THROWS_AS(canonical_serialize(w, IndexSet{{1, 4}}), LengthMismatchError);
  CHECK_THROWS_AS(canonical_serialize(w, IndexSet{{4, 1, 7}}), OutOfRangeError);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    IndexSet i1 = sample_indices(64, 4, rng);
    IndexSet i2 = sample_indices(64, 4, rng);
    auto w1 = random_payload(4, rng);
    auto w2 = random_payload(4, rng);
    if (i1.indices == i2.indices && w1 == w2) continue;
    CHECK(canonical_serialize(w1, i1) != canonical_serialize(w2, i2));
  }
}

TEST_CASE("sign and verify round trip; any corrupted message byte fails") {
  const auto keys = test_keys();
  Rng rng(7);
  const auto payload = random_payload(32, rng);
  const auto ix = sample_indices(32, 6, rng);
  const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");

  VerificationPolicy policy{1e-9, ReleaseMode::Delayed, DiffMode::SumL1};
  const auto ok = verify_bundle(payload, bundle, keys.pk, policy);
  CHECK(ok.accepted);
  CHECK(ok.diff == 0.0);

  const auto message = canonical_serialize(bundle.sampled, bundle.indices);
  for (size_t pos = 0; pos < message.size(); ++pos) {
    auto corrupted = message;
    corrupted[pos] ^= 0xFF;
    CHECK_FALSE(crypto::verify(corrupted, bundle.signature, keys.pk));
  }

  const auto other = test_keys(2);
  const auto bad = verify_bundle(payload, bundle, other.pk, policy);
  CHECK_FALSE(bad.accepted);
  CHECK(bad.reason == "signature");
}

TEST_CASE("diff metric matches the printed form") {
  const std::vector<double> a{1.0, 2.0};
  CHECK(diff_metric(a, a) == 0.0);

  const std::vector<double> b{1.1, 1.8};  // deviations 0.1, -0.2
  CHECK(diff_metric(a, b) == doctest::Approx(0.3 + 0.2).epsilon(1e-12));
  CHECK(diff_metric(b, a) == diff_metric(a, b));

  const std::vector<double> s1{0.0}, s2{0.7};
  CHECK(diff_metric(s1, s2) == doctest::Approx(1.4).epsilon(1e-12));

  CHECK(diff_metric(a, b, DiffMode::MeanL1) == doctest::Approx(0.15 + 0.2).epsilon(1e-12));

  CHECK_THROWS_AS(diff_metric(a, s1), LengthMismatchError);
}

TEST_CASE("diff metric satisfies the triangle-style bound") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_payload(8, rng);
    const auto b = random_payload(8, rng);
    const auto c = random_payload(8, rng);
    CHECK(diff_metric(a, c) <= diff_metric(a, b) + diff_metric(b, c) + 1e-12);
  }
}

TEST_CASE("honest transmissions pass a calibrated threshold at least 99 percent") {
  Rng rng(17);
  const size_t n = 128, index_count = 8;
  const auto model = signal::ChannelModel::awgn();
  const double snr = 9.0;
  const double threshold = calibrate_threshold(n, index_count, model, snr, 1000, rng);

  const auto keys = test_keys(3);
  VerificationPolicy policy{threshold, ReleaseMode::Delayed, DiffMode::SumL1};
  const double sigma = std::sqrt(signal::snr_db_to_noise_power(snr) / 2.0);
  int accepted = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto payload = random_payload(n, rng);
    const auto ix = sample_indices(n, index_count, rng);
    const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");
    auto received = payload;
    for (auto& v : received) v += sigma * rng.gaussian();
    if (verify_bundle(received, bundle, keys.pk, policy).accepted) ++accepted;
  }
  CHECK(accepted >= 990);
}

TEST_CASE("detection probability closed form") {
  CHECK(detection_probability(10, 0, 3) == 0.0);
  CHECK(detection_probability(10, 1, 10) == 1.0);
  CHECK(detection_probability(10, 2, 3) == doctest::Approx(1.0 - 56.0 / 120.0).epsilon(1e-12));
  CHECK(detection_probability(10, 9, 1) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK_THROWS_AS(detection_probability(10, 11, 3), OutOfRangeError);
  CHECK_THROWS_AS(detection_probability(10, 2, 0), OutOfRangeError);
  CHECK_THROWS_AS(detection_probability(10, 2, 11), OutOfRangeError);
}

TEST_CASE("detection probability is monotone in x and in the index count") {
  for (uint64_t n : {16ull, 64ull, 200ull}) {
    double prev = -1.0;
    for (uint64_t x = 0; x <= n; x += 4) {
      const double p = detection_probability(n, x, 5);
      CHECK(p >= prev - 1e-15);
      prev = p;
    }
    prev = -1.0;
    for (uint64_t i = 1; i <= n; i += 7) {
      const double p = detection_probability(n, 3, i);
      CHECK(p >= prev - 1e-15);
      prev = p;
    }
  }
}

TEST_CASE("detection probability agrees with sampling") {
  Rng rng(23);
  const uint64_t n = 40, x = 5, index_count = 6;
  const double analytic = detection_probability(n, x, index_count);
  int hits = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const auto sampled = sample_indices(n, index_count, rng);
    const auto modified = sample_indices(n, x, rng);
    bool overlap = false;
    for (uint32_t ix : sampled.indices)
      if (std::binary_search(modified.indices.begin(), modified.indices.end(), ix))
        overlap = true;
    if (overlap) ++hits;
  }
  CHECK(static_cast<double>(hits) / trials == doctest::Approx(analytic).epsilon(0.03));
}

TEST_CASE("tamper above threshold is caught whenever sampled; below passes by construction") {
  Rng rng(31);
  const size_t n = 64;
  const double threshold = 0.5;
  const auto keys = test_keys(4);
  VerificationPolicy policy{threshold, ReleaseMode::Delayed, DiffMode::SumL1};
  const auto payload = random_payload(n, rng);
  const auto ix = sample_indices(n, 8, rng);
  const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");

  SUBCASE("every position tampered above threshold: always detected") {
    const auto tampered = tamper(payload, n, TamperMagnitude::AboveThreshold, threshold, rng);
    CHECK_FALSE(verify_bundle(tampered, bundle, keys.pk, policy).accepted);
  }

  SUBCASE("below-threshold tampering is accepted") {
    for (int trial = 0; trial < 50; ++trial) {
      const auto tampered =
          tamper(payload, 1 + rng.below(n), TamperMagnitude::BelowThreshold, threshold, rng);
      const auto out = verify_bundle(tampered, bundle, keys.pk, policy);
      CHECK(out.accepted);
      CHECK(out.diff < threshold);
    }
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(tamper(payload, 0, TamperMagnitude::AboveThreshold, threshold, rng),
                    OutOfRangeError);
    CHECK_THROWS_AS(tamper(payload, n + 1, TamperMagnitude::AboveThreshold, threshold, rng),
                    OutOfRangeError);
  }
}

TEST_CASE("empirical detection under above-threshold tampering matches the closed form") {
  Rng rng(37);
  const size_t n = 64, x = 6, index_count = 5;
  const double threshold = 0.4;
  const auto keys = test_keys(5);
  VerificationPolicy policy{threshold, ReleaseMode::Delayed, DiffMode::SumL1};
  int detected = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const auto payload = random_payload(n, rng);
    const auto ix = sample_indices(n, index_count, rng);
    const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");
    const auto tampered = tamper(payload, x, TamperMagnitude::AboveThreshold, threshold, rng);
    if (!verify_bundle(tampered, bundle, keys.pk, policy).accepted) ++detected;
  }
  const double analytic = detection_probability(n, x, index_count);
  CHECK(static_cast<double>(detected) / trials == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("bundle wire format round trips and rejects malformation") {
  Rng rng(41);
  const auto keys = test_keys(6);
  const auto payload = random_payload(16, rng);
  const auto ix = sample_indices(16, 4, rng);
  const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");

  const auto wire = encode_bundle(bundle);
  const auto back = decode_bundle(wire);
  CHECK(back.sampled == bundle.sampled);
  CHECK(back.indices.indices == bundle.indices.indices);
  CHECK(back.signature == bundle.signature);
  CHECK(back.signer == bundle.signer);
  CHECK(encode_bundle(back) == wire);

  auto trailing = wire;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_bundle(trailing), DecodeError);
  auto truncated = wire;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_bundle(truncated), DecodeError);
}

TEST_CASE("index release scheduling enforces the delayed order") {
  IndexSet ix{{3, 9}};

  IndexReleaseSchedule delayed(ReleaseMode::Delayed);
  CHECK_THROWS_AS(delayed.request_release(ix), PrematureReleaseError);
  delayed.mark_payload_delivered();
  CHECK_THROWS_AS(delayed.request_release(ix), PrematureReleaseError);
  delayed.mark_acknowledged();
  const auto rel = delayed.request_release(ix);
  CHECK_FALSE(rel.encrypted);
  CHECK(rel.indices.indices == ix.indices);

  IndexReleaseSchedule encrypted(ReleaseMode::Encrypted);
  const auto env = encrypted.request_release(ix);
  CHECK(env.encrypted);
}

TEST_CASE("an adversary that learns the indices only after the ack cannot evade") {
  Rng rng(47);
  const size_t n = 48, x = 6, index_count = 6;
  const double threshold = 0.4;
  const auto keys = test_keys(7);
  VerificationPolicy policy{threshold, ReleaseMode::Delayed, DiffMode::SumL1};

  int detected_blind = 0, detected_informed = 0;
  const int trials = 3000;
  for (int t = 0; t < trials; ++t) {
    const auto payload = random_payload(n, rng);
    const auto ix = sample_indices(n, index_count, rng);
    const auto bundle = sign_bundle(payload, ix, keys.sk, "alice");

    // Delayed release: the adversary modifies before learning the index set.
    const auto blind = tamper(payload, x, TamperMagnitude::AboveThreshold, threshold, rng);
    if (!verify_bundle(blind, bundle, keys.pk, policy).accepted) ++detected_blind;

    // Premature release: the adversary avoids the sampled positions entirely.
    auto informed = payload;
    size_t changed = 0;
    for (size_t pos = 0; pos < n && changed < x; ++pos) {
      if (std::binary_search(ix.indices.begin(), ix.indices.end(), pos)) continue;
      informed[pos] += 2.0 * threshold;
      ++changed;
    }
    if (!verify_bundle(informed, bundle, keys.pk, policy).accepted) ++detected_informed;
  }
  const double analytic = detection_probability(n, x, index_count);
  CHECK(static_cast<double>(detected_blind) / trials == doctest::Approx(analytic).epsilon(0.05));
  CHECK(detected_informed == 0);
}
