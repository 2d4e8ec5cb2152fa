#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semcom/crypto.hpp"
#include "semcom/rng.hpp"

namespace semcom::chain {

struct Identity {
  std::string id;
  crypto::PublicKey pk{};
  crypto::SecretKey sk{};  // holder side only
};

// Trusted key generation center: issues each device id exactly one key pair
// and keeps the public registry validators resolve signers against.
class KeyAuthority {
 public:
  explicit KeyAuthority(uint64_t seed) : rng_(seed) {}

  Identity issue_identity(const std::string& device_id);
  bool known(const std::string& device_id) const;
  const crypto::PublicKey& public_key(const std::string& device_id) const;

 private:
  Rng rng_;
  std::map<std::string, crypto::PublicKey> registry_;
};

enum class TxKind : uint8_t { ModelUpload = 0, Aggregate = 1 };

using TxId = std::array<uint8_t, 32>;

// Ledger record. Retrieval is a local read of the replica, not a transaction.
struct Transaction {
  TxKind kind = TxKind::ModelUpload;
  std::string channel;
  std::string proposer;
  uint64_t nonce = 0;

  // ModelUpload payload
  std::vector<uint8_t> blob;
  crypto::Digest content_hash{};
  uint64_t sample_count = 0;

  // Aggregate payload: referenced committed uploads, their weights, and the
  // recomputable result (in `blob` / `content_hash`).
  std::vector<TxId> inputs;
  std::vector<uint64_t> weights;

  std::vector<uint8_t> signature;

  // Canonical signing message; field order is normative.
  std::vector<uint8_t> signing_bytes() const;
  std::vector<uint8_t> wire_bytes() const;  // signing bytes + signature
  TxId id() const;                          // sha256 of wire bytes
};

Transaction create_upload_tx(std::span<const uint8_t> blob, const std::string& channel,
                             uint64_t sample_count, uint64_t nonce,
                             const Identity& identity);

// Sample-count-weighted elementwise mean of parsed model or knowledge-base
// blobs (all inputs must share kind and dims). Weighted in the given order.
std::vector<uint8_t> fedavg(std::span<const std::vector<uint8_t>> blobs,
                            std::span<const uint64_t> weights);

Transaction create_aggregate_tx(std::span<const TxId> inputs,
                                std::span<const uint64_t> weights,
                                std::span<const uint8_t> result_blob,
                                const std::string& channel, uint64_t nonce,
                                const Identity& identity);

struct Block {
  uint64_t height = 0;
  std::string channel;
  std::array<uint8_t, 32> prev_hash{};
  std::vector<Transaction> txs;
  std::string proposer;

  struct Endorsement {
    std::string validator;
    std::vector<uint8_t> signature;  // over the block hash
  };
  std::vector<Endorsement> endorsements;

  std::vector<uint8_t> canonical_bytes() const;  // without endorsements
  crypto::Digest hash() const;
};

enum class TxVerdict {
  Ok,
  UnknownSigner,
  BadSignature,
  BadHash,
  MalformedBlob,
  BadAggregation,
  MissingInput,
};

const char* to_string(TxVerdict v);

// One replica of the consortium ledger. Mutation happens only through
// commit_block; reads and validation are const.
class LedgerState {
 public:
  explicit LedgerState(const KeyAuthority* authority) : authority_(authority) {}

  // Channels are sub-networks per task, each with a fixed validator set.
  void register_channel(const std::string& channel, std::vector<std::string> validators);
  bool has_channel(const std::string& channel) const;
  const std::vector<std::string>& validators(const std::string& channel) const;

  // Round-robin proposer for the next block of the channel.
  const std::string& scheduled_proposer(const std::string& channel) const;

  TxVerdict validate_transaction(const Transaction& tx) const;

  // Bundles the valid pending transactions into a candidate linked to the
  // tip. Throws NotProposerError / NoValidTxsError.
  Block propose_block(std::span<const Transaction> pending,
                      const Identity& proposer) const;

  // Every listed validator revalidates every transaction and endorses by
  // signing the block hash; the block commits iff endorsements reach
  // ceil(2n/3). `offline` validators abstain (crash-fault simulation).
  // Throws QuorumNotReachedError; on success the block is appended and the
  // latest model/KB pointers advance.
  void endorse_and_commit(Block block, std::span<const Identity> validator_keys,
                          std::span<const std::string> offline = {});

  // Recomputes hash links, heights, endorsement signatures and quorums.
  // Returns the first bad height per channel, or nothing when intact.
  std::optional<uint64_t> verify_chain(const std::string& channel) const;

  enum class BlobKind { Model, KnowledgeBase };
  const std::vector<uint8_t>& retrieve_latest(const std::string& channel,
                                              BlobKind kind) const;

  const std::vector<Block>& blocks(const std::string& channel) const;
  std::optional<Transaction> find_committed(const std::string& channel,
                                            const TxId& id) const;

  size_t quorum(const std::string& channel) const;

  // Append-only persistence of canonical blocks, magic "SLG1".
  std::vector<uint8_t> serialize() const;
  // Rebuilds a replica from the byte stream, revalidating everything.
  static LedgerState deserialize(std::span<const uint8_t> bytes,
                                 const KeyAuthority& authority,
                                 const std::map<std::string, std::vector<std::string>>& channels);

 private:
  struct ChannelState {
    std::vector<std::string> validators;
    std::vector<Block> blocks;
    std::vector<uint8_t> latest_model;
    std::vector<uint8_t> latest_kb;
    std::map<TxId, Transaction> committed;
  };

  const ChannelState& channel_state(const std::string& channel) const;
  TxVerdict validate_upload(const Transaction& tx) const;
  TxVerdict validate_aggregate(const Transaction& tx, const ChannelState& st) const;

  const KeyAuthority* authority_;
  std::map<std::string, ChannelState> channels_;
};

// Elementwise comparison tolerance for recomputed aggregation results.
constexpr double kAggregateTolerance = 1e-12;

}  // namespace semcom::chain
