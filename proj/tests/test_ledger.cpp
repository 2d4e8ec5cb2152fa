#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "semcom/codec.hpp"
#include "semcom/bytes.hpp"
#include "semcom/errors.hpp"
#include "semcom/ledger.hpp"

using namespace semcom;
using namespace semcom::chain;

namespace {

struct Net {
  KeyAuthority authority{42};
  std::vector<Identity> devices;
  LedgerState ledger{&authority};

  explicit Net(size_t n, const std::string& channel = "text") {
    std::vector<std::string> ids;
    for (size_t k = 0; k < n; ++k) {
      devices.push_back(authority.issue_identity("dev" + std::to_string(k)));
      ids.push_back(devices.back().id);
    }
    ledger.register_channel(channel, ids);
  }

  const Identity& scheduled(const std::string& channel = "text") const {
    const std::string& id = ledger.scheduled_proposer(channel);
    for (const auto& d : devices)
      if (d.id == id) return d;
    throw OutOfRangeError("no such identity");
  }
};

std::vector<uint8_t> tiny_model(uint64_t seed) {
  Rng rng(seed);
  return codec::serialize_model(codec::CodecParams::random_init({8, 4, 2, 2}, rng));
}

std::vector<uint8_t> tiny_kb(uint64_t seed) {
  Rng rng(seed);
  Matrix kb(2, 3);
  for (auto& v : kb.values()) v = rng.gaussian();
  return codec::serialize_kb(kb);
}

}  // namespace

TEST_CASE("identity issuance is unique per device id") {
  KeyAuthority authority(7);
  const Identity a = authority.issue_identity("a");
  const Identity b = authority.issue_identity("b");
  CHECK(a.pk != b.pk);
  CHECK_THROWS_AS(authority.issue_identity("a"), DuplicateIdError);

  const std::vector<uint8_t> msg{1, 2, 3};
  const auto sig = crypto::sign(msg, a.sk);
  CHECK(crypto::verify(msg, sig, a.pk));
  CHECK(crypto::verify(msg, sig, authority.public_key("a")));
  CHECK_FALSE(crypto::verify(msg, sig, b.pk));
}

TEST_CASE("upload transactions validate and catch corruption") {
  Net net(3);
  const auto blob = tiny_model(1);
  const Transaction tx = create_upload_tx(blob, "text", 10, 0, net.devices[0]);
  CHECK(net.ledger.validate_transaction(tx) == TxVerdict::Ok);

  SUBCASE("hash mismatch") {
    Transaction bad = tx;
    bad.content_hash[0] ^= 0xFF;
    CHECK(net.ledger.validate_transaction(bad) == TxVerdict::BadSignature);
    bad = tx;
    bad.blob[40] ^= 0xFF;  // the signature still covers the original bytes
    const auto verdict = net.ledger.validate_transaction(bad);
    CHECK(verdict == TxVerdict::BadSignature);
  }

  SUBCASE("unknown signer") {
    KeyAuthority other(9);
    const Identity stranger = other.issue_identity("stranger");
    const Transaction bad = create_upload_tx(blob, "text", 10, 0, stranger);
    CHECK(net.ledger.validate_transaction(bad) == TxVerdict::UnknownSigner);
  }

  SUBCASE("malformed blob rejected at creation") {
    std::vector<uint8_t> garbage{1, 2, 3, 4};
    CHECK_THROWS_AS(create_upload_tx(garbage, "text", 1, 0, net.devices[0]),
                    MalformedBlobError);
    CHECK_THROWS_AS(create_upload_tx(blob, "text", 0, 0, net.devices[0]), OutOfRangeError);
  }

  SUBCASE("every single-byte corruption of the signed bytes is caught") {
    const Transaction small = create_upload_tx(tiny_kb(2), "text", 3, 1, net.devices[1]);
    const auto wire = small.wire_bytes();
    // Rebuild a transaction from corrupted wire bytes through the block path
    // in the dedicated sweep below; here check the signature directly.
    const auto signing = small.signing_bytes();
    for (size_t pos = 0; pos < signing.size(); pos += 7) {
      auto corrupted = signing;
      corrupted[pos] ^= 0xFF;
      CHECK_FALSE(crypto::verify(corrupted, small.signature,
                                 net.authority.public_key(small.proposer)));
    }
    CHECK(wire.size() == signing.size() + 4 + 64);
  }
}

TEST_CASE("fedavg is a weighted elementwise mean") {
  SUBCASE("single input is the identity") {
    const auto blob = tiny_model(3);
    const std::vector<std::vector<uint8_t>> blobs{blob};
    const std::vector<uint64_t> weights{5};
    const auto out = fedavg(blobs, weights);
    CHECK(out == blob);
  }

  SUBCASE("two knowledge bases with weights 1 and 3") {
    Matrix a(2, 1), b(2, 1);
    a.at(0, 0) = 0.0;
    a.at(1, 0) = 0.0;
    b.at(0, 0) = 1.0;
    b.at(1, 0) = 1.0;
    const std::vector<std::vector<uint8_t>> blobs{codec::serialize_kb(a),
                                                  codec::serialize_kb(b)};
    const std::vector<uint64_t> weights{1, 3};
    const auto out = fedavg(blobs, weights);
    const Matrix avg = codec::parse_kb(out);
    CHECK(avg.at(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(avg.at(1, 0) == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("identical models are a fixed point") {
    const auto blob = tiny_model(4);
    const std::vector<std::vector<uint8_t>> blobs{blob, blob, blob};
    const std::vector<uint64_t> weights{1, 7, 2};
    const auto out = fedavg(blobs, weights);
    const auto a = codec::parse_model(out);
    const auto b = codec::parse_model(blob);
    for (size_t k = 0; k < a.embedding.values().size(); ++k)
      CHECK(a.embedding.values()[k] ==
            doctest::Approx(b.embedding.values()[k]).epsilon(1e-15));
  }

  SUBCASE("matches the scalar-loop oracle") {
    std::vector<std::vector<uint8_t>> blobs{tiny_model(5), tiny_model(6), tiny_model(7)};
    std::vector<uint64_t> weights{2, 9, 4};
    const auto out = fedavg(blobs, weights);

    std::vector<std::vector<double>> floats;
    for (const auto& b : blobs) {
      ByteReader r(std::span<const uint8_t>(b).subspan(20));
      std::vector<double> v;
      while (r.remaining() >= 8) v.push_back(r.f64());
      floats.push_back(std::move(v));
    }
    const auto expect = oracles::scalar_weighted_mean(floats, {weights.begin(), weights.end()});
    ByteReader r(std::span<const uint8_t>(out).subspan(20));
    for (double e : expect) CHECK(r.f64() == doctest::Approx(e).epsilon(1e-12));
  }

  SUBCASE("permutation invariance") {
    std::vector<std::vector<uint8_t>> blobs{tiny_model(8), tiny_model(9), tiny_model(10)};
    std::vector<uint64_t> weights{1, 2, 3};
    const auto a = fedavg(blobs, weights);
    std::vector<std::vector<uint8_t>> rev{blobs[2], blobs[0], blobs[1]};
    std::vector<uint64_t> wrev{3, 1, 2};
    const auto b = fedavg(rev, wrev);
    ByteReader ra(std::span<const uint8_t>(a).subspan(20));
    ByteReader rb(std::span<const uint8_t>(b).subspan(20));
    while (ra.remaining() >= 8) CHECK(ra.f64() == doctest::Approx(rb.f64()).epsilon(1e-12));
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(fedavg({}, {}), EmptyInputError);
    const std::vector<std::vector<uint8_t>> one{tiny_model(1)};
    const std::vector<uint64_t> zero_w{0};
    CHECK_THROWS_AS(fedavg(one, zero_w), OutOfRangeError);
    const std::vector<std::vector<uint8_t>> mixed{tiny_model(1), tiny_kb(1)};
    const std::vector<uint64_t> ones{1, 1};
    CHECK_THROWS_AS(fedavg(mixed, ones), ShapeMismatchError);
  }
}

TEST_CASE("aggregate transactions are validated by recomputation") {
  Net net(4);
  std::vector<Transaction> uploads;
  for (uint64_t k = 0; k < 3; ++k)
    uploads.push_back(
        create_upload_tx(tiny_model(20 + k), "text", 2 + k, k, net.devices[k]));
  Block b1 = net.ledger.propose_block(uploads, net.scheduled());
  net.ledger.endorse_and_commit(std::move(b1), net.devices);

  struct Ref {
    TxId id;
    std::vector<uint8_t> blob;
    uint64_t weight;
  };
  std::vector<Ref> refs;
  for (const auto& tx : uploads) refs.push_back({tx.id(), tx.blob, tx.sample_count});
  std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) { return a.id < b.id; });
  std::vector<TxId> ids;
  std::vector<std::vector<uint8_t>> blobs;
  std::vector<uint64_t> weights;
  for (auto& r : refs) {
    ids.push_back(r.id);
    blobs.push_back(std::move(r.blob));
    weights.push_back(r.weight);
  }
  const auto result = fedavg(blobs, weights);

  SUBCASE("honest aggregate validates and commits") {
    const Transaction agg =
        create_aggregate_tx(ids, weights, result, "text", 10, net.devices[0]);
    CHECK(net.ledger.validate_transaction(agg) == TxVerdict::Ok);
    Block b2 = net.ledger.propose_block(std::span(&agg, 1), net.scheduled());
    net.ledger.endorse_and_commit(std::move(b2), net.devices);
    CHECK(net.ledger.retrieve_latest("text", LedgerState::BlobKind::Model) == result);
  }

  SUBCASE("perturbed result is BadAggregation") {
    auto tampered = result;
    ByteReader peek(std::span<const uint8_t>(tampered).subspan(20, 8));
    const double v = peek.f64();
    ByteWriter w;
    w.f64(v + 1e-3);
    std::copy(w.bytes().begin(), w.bytes().end(), tampered.begin() + 20);
    const Transaction agg =
        create_aggregate_tx(ids, weights, tampered, "text", 11, net.devices[0]);
    CHECK(net.ledger.validate_transaction(agg) == TxVerdict::BadAggregation);
  }

  SUBCASE("wrong weights are BadAggregation") {
    auto bad_weights = weights;
    bad_weights[0] += 1;
    const Transaction agg =
        create_aggregate_tx(ids, bad_weights, result, "text", 12, net.devices[0]);
    CHECK(net.ledger.validate_transaction(agg) == TxVerdict::BadAggregation);
  }

  SUBCASE("missing input is MissingInput") {
    auto bad_ids = ids;
    bad_ids[0][0] ^= 0xFF;
    const Transaction agg =
        create_aggregate_tx(bad_ids, weights, result, "text", 13, net.devices[0]);
    CHECK(net.ledger.validate_transaction(agg) == TxVerdict::MissingInput);
  }
}

TEST_CASE("proposal follows the round-robin schedule") {
  Net net(3);
  const auto blob = tiny_model(30);
  const Transaction tx = create_upload_tx(blob, "text", 1, 0, net.devices[2]);

  CHECK(net.ledger.scheduled_proposer("text") == "dev0");
  CHECK_THROWS_AS(net.ledger.propose_block(std::span(&tx, 1), net.devices[1]),
                  NotProposerError);

  Block block = net.ledger.propose_block(std::span(&tx, 1), net.devices[0]);
  CHECK(block.height == 0);
  CHECK(block.txs.size() == 1);
  net.ledger.endorse_and_commit(std::move(block), net.devices);
  CHECK(net.ledger.scheduled_proposer("text") == "dev1");

  SUBCASE("invalid transactions are excluded") {
    Transaction corrupt = create_upload_tx(tiny_model(31), "text", 1, 1, net.devices[0]);
    corrupt.sample_count += 1;  // breaks the signature
    CHECK_THROWS_AS(net.ledger.propose_block(std::span(&corrupt, 1), net.devices[1]),
                    NoValidTxsError);
  }

  SUBCASE("block hash is sensitive to transaction order") {
    const Transaction t1 = create_upload_tx(tiny_model(32), "text", 1, 2, net.devices[0]);
    const Transaction t2 = create_upload_tx(tiny_model(33), "text", 1, 3, net.devices[1]);
    std::vector<Transaction> ab{t1, t2}, ba{t2, t1};
    Block block_ab = net.ledger.propose_block(ab, net.devices[1]);
    Block block_ba = net.ledger.propose_block(ba, net.devices[1]);
    CHECK(block_ab.hash() != block_ba.hash());
  }
}

TEST_CASE("endorsement quorum is ceil(2n/3)") {
  Net net(4);
  CHECK(net.ledger.quorum("text") == 3);

  const Transaction tx = create_upload_tx(tiny_model(40), "text", 1, 0, net.devices[0]);

  SUBCASE("all honest commits") {
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.devices[0]);
    net.ledger.endorse_and_commit(std::move(block), net.devices);
    CHECK(net.ledger.blocks("text").size() == 1);
    CHECK(net.ledger.blocks("text")[0].endorsements.size() == 4);
  }

  SUBCASE("one crashed validator still commits") {
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.devices[0]);
    const std::vector<std::string> offline{"dev3"};
    net.ledger.endorse_and_commit(std::move(block), net.devices, offline);
    CHECK(net.ledger.blocks("text")[0].endorsements.size() == 3);
  }

  SUBCASE("two crashed validators cannot commit") {
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.devices[0]);
    const std::vector<std::string> offline{"dev2", "dev3"};
    CHECK_THROWS_AS(net.ledger.endorse_and_commit(std::move(block), net.devices, offline),
                    QuorumNotReachedError);
    CHECK(net.ledger.blocks("text").empty());
  }
}

TEST_CASE("verify_chain accepts intact chains and flags broken links") {
  Net net(3);
  CHECK_FALSE(net.ledger.verify_chain("text").has_value());  // empty chain is fine

  for (uint64_t k = 0; k < 3; ++k) {
    const Transaction tx =
        create_upload_tx(tiny_model(50 + k), "text", 1 + k, k, net.devices[k % 3]);
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.scheduled());
    net.ledger.endorse_and_commit(std::move(block), net.devices);
  }
  CHECK_FALSE(net.ledger.verify_chain("text").has_value());
  CHECK(net.ledger.blocks("text").size() == 3);
}

TEST_CASE("single-byte corruption of the persisted ledger is always detected") {
  Net net(3);
  for (uint64_t k = 0; k < 2; ++k) {
    const Transaction tx =
        create_upload_tx(tiny_kb(60 + k), "text", 1 + k, k, net.devices[k % 3]);
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.scheduled());
    net.ledger.endorse_and_commit(std::move(block), net.devices);
  }
  const auto bytes = net.ledger.serialize();
  const std::map<std::string, std::vector<std::string>> channels = {
      {"text", net.ledger.validators("text")}};

  // Clean replay works and agrees bitwise.
  const LedgerState replica = LedgerState::deserialize(bytes, net.authority, channels);
  CHECK(replica.serialize() == bytes);

  // Sparse sweep here; the acceptance suite does the exhaustive one.
  size_t detected = 0, total = 0;
  for (size_t pos = 0; pos < bytes.size(); pos += 11) {
    auto corrupted = bytes;
    corrupted[pos] ^= 0xFF;
    ++total;
    try {
      (void)LedgerState::deserialize(corrupted, net.authority, channels);
    } catch (const Error&) {
      ++detected;
    }
  }
  CHECK(detected == total);
}

TEST_CASE("two replicas applying the same stream agree bitwise") {
  Net net(3);
  for (uint64_t k = 0; k < 3; ++k) {
    const Transaction tx =
        create_upload_tx(tiny_model(70 + k), "text", 1, k, net.devices[k]);
    Block block = net.ledger.propose_block(std::span(&tx, 1), net.scheduled());
    net.ledger.endorse_and_commit(std::move(block), net.devices);
  }
  const auto bytes = net.ledger.serialize();
  const std::map<std::string, std::vector<std::string>> channels = {
      {"text", net.ledger.validators("text")}};
  const LedgerState r1 = LedgerState::deserialize(bytes, net.authority, channels);
  const LedgerState r2 = LedgerState::deserialize(bytes, net.authority, channels);
  CHECK(r1.serialize() == r2.serialize());
  CHECK(r1.serialize() == bytes);
}

TEST_CASE("retrieve_latest returns committed blobs per kind") {
  Net net(3);
  CHECK_THROWS_AS(net.ledger.retrieve_latest("text", LedgerState::BlobKind::Model),
                  NothingCommittedError);

  const auto model = tiny_model(80);
  Transaction tx = create_upload_tx(model, "text", 1, 0, net.devices[0]);
  Block b = net.ledger.propose_block(std::span(&tx, 1), net.devices[0]);
  net.ledger.endorse_and_commit(std::move(b), net.devices);
  CHECK(net.ledger.retrieve_latest("text", LedgerState::BlobKind::Model) == model);
  CHECK_THROWS_AS(net.ledger.retrieve_latest("text", LedgerState::BlobKind::KnowledgeBase),
                  NothingCommittedError);

  const auto kb = tiny_kb(81);
  Transaction tx2 = create_upload_tx(kb, "text", 1, 1, net.devices[1]);
  Block b2 = net.ledger.propose_block(std::span(&tx2, 1), net.devices[1]);
  net.ledger.endorse_and_commit(std::move(b2), net.devices);
  CHECK(net.ledger.retrieve_latest("text", LedgerState::BlobKind::KnowledgeBase) == kb);
  CHECK(net.ledger.retrieve_latest("text", LedgerState::BlobKind::Model) == model);

  // Reads do not mutate the chain.
  const auto before = net.ledger.serialize();
  (void)net.ledger.retrieve_latest("text", LedgerState::BlobKind::Model);
  CHECK(net.ledger.serialize() == before);
}
