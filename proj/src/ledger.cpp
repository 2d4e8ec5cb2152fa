#include "semcom/ledger.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/bytes.hpp"
#include "semcom/codec.hpp"
#include "semcom/errors.hpp"

namespace semcom::chain {

// --- identities --------------------------------------------------------------

Identity KeyAuthority::issue_identity(const std::string& device_id) {
  if (registry_.contains(device_id)) throw DuplicateIdError("device id already issued");
  Identity ident;
  ident.id = device_id;
  const auto kp = crypto::generate_keypair(rng_);
  ident.pk = kp.pk;
  ident.sk = kp.sk;
  registry_.emplace(device_id, ident.pk);
  return ident;
}

bool KeyAuthority::known(const std::string& device_id) const {
  return registry_.contains(device_id);
}

const crypto::PublicKey& KeyAuthority::public_key(const std::string& device_id) const {
  auto it = registry_.find(device_id);
  if (it == registry_.end()) throw OutOfRangeError("unknown device id");
  return it->second;
}

// --- transactions ------------------------------------------------------------

std::vector<uint8_t> Transaction::signing_bytes() const {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(kind));
  w.lp_str(channel);
  w.lp_str(proposer);
  w.u64(nonce);
  if (kind == TxKind::ModelUpload) {
    w.lp_bytes(blob);
    w.raw(content_hash);
    w.u64(sample_count);
  } else {
    w.u32(static_cast<uint32_t>(inputs.size()));
    for (const auto& id : inputs) w.raw(id);
    for (uint64_t wt : weights) w.u64(wt);
    w.lp_bytes(blob);
    w.raw(content_hash);
  }
  return w.take();
}

std::vector<uint8_t> Transaction::wire_bytes() const {
  ByteWriter w;
  w.raw(signing_bytes());
  w.u32(static_cast<uint32_t>(signature.size()));
  w.raw(signature);
  return w.take();
}

TxId Transaction::id() const { return crypto::sha256(wire_bytes()); }

namespace {

// Any committed blob must be one of the two codec formats.
void require_parsable_blob(std::span<const uint8_t> blob) {
  if (blob.size() >= 4 && blob[0] == 'S' && blob[1] == 'K' && blob[2] == 'B' &&
      blob[3] == 'K') {
    codec::parse_kb(blob);
  } else {
    codec::parse_model(blob);
  }
}

Transaction parse_tx_wire(std::span<const uint8_t> wire) {
  ByteReader r(wire);
  Transaction tx;
  const uint8_t kind = r.u8();
  if (kind > 1) throw DecodeError("unknown transaction kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.channel = r.lp_str();
  tx.proposer = r.lp_str();
  tx.nonce = r.u64();
  if (tx.kind == TxKind::ModelUpload) {
    tx.blob = r.lp_bytes();
    auto h = r.raw(32);
    std::copy(h.begin(), h.end(), tx.content_hash.begin());
    tx.sample_count = r.u64();
  } else {
    const uint32_t n = r.u32();
    tx.inputs.resize(n);
    for (auto& id : tx.inputs) {
      auto b = r.raw(32);
      std::copy(b.begin(), b.end(), id.begin());
    }
    tx.weights.resize(n);
    for (auto& wt : tx.weights) wt = r.u64();
    tx.blob = r.lp_bytes();
    auto h = r.raw(32);
    std::copy(h.begin(), h.end(), tx.content_hash.begin());
  }
  const uint32_t sig_len = r.u32();
  if (sig_len != 64) throw DecodeError("unexpected signature length");
  auto sig = r.raw(sig_len);
  tx.signature.assign(sig.begin(), sig.end());
  r.expect_end();
  return tx;
}

void sign_tx(Transaction& tx, const Identity& identity) {
  const auto sig = crypto::sign(tx.signing_bytes(), identity.sk);
  tx.signature.assign(sig.begin(), sig.end());
}

}  // namespace

Transaction create_upload_tx(std::span<const uint8_t> blob, const std::string& channel,
                             uint64_t sample_count, uint64_t nonce,
                             const Identity& identity) {
  require_parsable_blob(blob);
  if (sample_count == 0) throw OutOfRangeError("sample count must be positive");
  Transaction tx;
  tx.kind = TxKind::ModelUpload;
  tx.channel = channel;
  tx.proposer = identity.id;
  tx.nonce = nonce;
  tx.blob.assign(blob.begin(), blob.end());
  tx.content_hash = crypto::sha256(blob);
  tx.sample_count = sample_count;
  sign_tx(tx, identity);
  return tx;
}

std::vector<uint8_t> fedavg(std::span<const std::vector<uint8_t>> blobs,
                            std::span<const uint64_t> weights) {
  if (blobs.empty()) throw EmptyInputError("fedavg needs at least one model");
  if (blobs.size() != weights.size())
    throw ShapeMismatchError("model and weight counts differ");
  uint64_t total = 0;
  for (uint64_t w : weights) {
    if (w == 0) throw OutOfRangeError("fedavg weights must be positive");
    total += w;
  }
  require_parsable_blob(blobs[0]);
  const bool kb_only = blobs[0][3] == 'K';
  const size_t header = kb_only ? 4 + 2 * 4 : 4 + 4 * 4;
  for (const auto& b : blobs) {
    if (b.size() != blobs[0].size() ||
        !std::equal(b.begin(), b.begin() + static_cast<long>(header), blobs[0].begin()))
      throw ShapeMismatchError("fedavg inputs have mismatched shapes");
  }
  std::vector<uint8_t> out(blobs[0].begin(), blobs[0].begin() + static_cast<long>(header));
  const size_t floats = (blobs[0].size() - header) / 8;
  ByteWriter w;
  for (size_t k = 0; k < floats; ++k) {
    double acc = 0.0;
    for (size_t m = 0; m < blobs.size(); ++m) {
      ByteReader r(std::span<const uint8_t>(blobs[m]).subspan(header + 8 * k, 8));
      acc += (static_cast<double>(weights[m]) / static_cast<double>(total)) * r.f64();
    }
    w.f64(acc);
  }
  const auto& tail = w.bytes();
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

Transaction create_aggregate_tx(std::span<const TxId> inputs,
                                std::span<const uint64_t> weights,
                                std::span<const uint8_t> result_blob,
                                const std::string& channel, uint64_t nonce,
                                const Identity& identity) {
  if (inputs.empty()) throw EmptyInputError("aggregate needs inputs");
  if (inputs.size() != weights.size())
    throw ShapeMismatchError("input and weight counts differ");
  require_parsable_blob(result_blob);
  Transaction tx;
  tx.kind = TxKind::Aggregate;
  tx.channel = channel;
  tx.proposer = identity.id;
  tx.nonce = nonce;
  tx.inputs.assign(inputs.begin(), inputs.end());
  tx.weights.assign(weights.begin(), weights.end());
  tx.blob.assign(result_blob.begin(), result_blob.end());
  tx.content_hash = crypto::sha256(result_blob);
  sign_tx(tx, identity);
  return tx;
}

// --- blocks ------------------------------------------------------------------

std::vector<uint8_t> Block::canonical_bytes() const {
  ByteWriter w;
  w.u64(height);
  w.lp_str(channel);
  w.raw(prev_hash);
  w.u32(static_cast<uint32_t>(txs.size()));
  for (const auto& tx : txs) w.lp_bytes(tx.wire_bytes());
  w.lp_str(proposer);
  return w.take();
}

crypto::Digest Block::hash() const { return crypto::sha256(canonical_bytes()); }

const char* to_string(TxVerdict v) {
  switch (v) {
    case TxVerdict::Ok: return "ok";
    case TxVerdict::UnknownSigner: return "unknown-signer";
    case TxVerdict::BadSignature: return "bad-signature";
    case TxVerdict::BadHash: return "bad-hash";
    case TxVerdict::MalformedBlob: return "malformed-blob";
    case TxVerdict::BadAggregation: return "bad-aggregation";
    case TxVerdict::MissingInput: return "missing-input";
  }
  return "unknown";
}

// --- ledger state ------------------------------------------------------------

void LedgerState::register_channel(const std::string& channel,
                                   std::vector<std::string> validators) {
  if (channels_.contains(channel)) throw DuplicateIdError("channel already registered");
  if (validators.empty()) throw EmptyInputError("channel needs validators");
  ChannelState st;
  st.validators = std::move(validators);
  channels_.emplace(channel, std::move(st));
}

bool LedgerState::has_channel(const std::string& channel) const {
  return channels_.contains(channel);
}

const LedgerState::ChannelState& LedgerState::channel_state(
    const std::string& channel) const {
  auto it = channels_.find(channel);
  if (it == channels_.end()) throw OutOfRangeError("unknown channel");
  return it->second;
}

const std::vector<std::string>& LedgerState::validators(const std::string& channel) const {
  return channel_state(channel).validators;
}

size_t LedgerState::quorum(const std::string& channel) const {
  const size_t n = channel_state(channel).validators.size();
  return (2 * n + 2) / 3;  // ceil(2n/3)
}

const std::string& LedgerState::scheduled_proposer(const std::string& channel) const {
  const auto& st = channel_state(channel);
  return st.validators[st.blocks.size() % st.validators.size()];
}

TxVerdict LedgerState::validate_upload(const Transaction& tx) const {
  try {
    require_parsable_blob(tx.blob);
  } catch (const MalformedBlobError&) {
    return TxVerdict::MalformedBlob;
  }
  if (tx.sample_count == 0) return TxVerdict::MalformedBlob;
  return TxVerdict::Ok;
}

TxVerdict LedgerState::validate_aggregate(const Transaction& tx,
                                          const ChannelState& st) const {
  if (tx.inputs.empty() || tx.inputs.size() != tx.weights.size())
    return TxVerdict::BadAggregation;
  struct Ref {
    TxId id;
    const Transaction* tx;
    uint64_t weight;
  };
  std::vector<Ref> refs;
  refs.reserve(tx.inputs.size());
  for (size_t k = 0; k < tx.inputs.size(); ++k) {
    auto it = st.committed.find(tx.inputs[k]);
    if (it == st.committed.end() || it->second.kind != TxKind::ModelUpload)
      return TxVerdict::MissingInput;
    if (it->second.sample_count != tx.weights[k]) return TxVerdict::BadAggregation;
    refs.push_back({tx.inputs[k], &it->second, tx.weights[k]});
  }
  // Summation order is normalized: ascending input transaction id.
  std::sort(refs.begin(), refs.end(),
            [](const Ref& a, const Ref& b) { return a.id < b.id; });
  std::vector<std::vector<uint8_t>> blobs;
  std::vector<uint64_t> weights;
  for (const auto& ref : refs) {
    blobs.push_back(ref.tx->blob);
    weights.push_back(ref.weight);
  }
  std::vector<uint8_t> expected;
  try {
    expected = fedavg(blobs, weights);
  } catch (const Error&) {
    return TxVerdict::BadAggregation;
  }
  if (expected.size() != tx.blob.size()) return TxVerdict::BadAggregation;
  const bool kb_only = expected[3] == 'K';
  const size_t header = kb_only ? 12 : 20;
  if (!std::equal(expected.begin(), expected.begin() + static_cast<long>(header),
                  tx.blob.begin()))
    return TxVerdict::BadAggregation;
  // Floats are compared within a tolerance rather than bitwise so a replica
  // with a different (but order-normalized) summation still validates.
  ByteReader re(std::span<const uint8_t>(expected).subspan(header));
  ByteReader rc(std::span<const uint8_t>(tx.blob).subspan(header));
  while (re.remaining() >= 8) {
    if (std::abs(re.f64() - rc.f64()) > kAggregateTolerance)
      return TxVerdict::BadAggregation;
  }
  return TxVerdict::Ok;
}

TxVerdict LedgerState::validate_transaction(const Transaction& tx) const {
  if (!authority_->known(tx.proposer)) return TxVerdict::UnknownSigner;
  if (!crypto::verify(tx.signing_bytes(), tx.signature,
                      authority_->public_key(tx.proposer)))
    return TxVerdict::BadSignature;
  if (crypto::sha256(tx.blob) != tx.content_hash) return TxVerdict::BadHash;
  auto it = channels_.find(tx.channel);
  if (it == channels_.end()) return TxVerdict::MissingInput;
  if (tx.kind == TxKind::ModelUpload) return validate_upload(tx);
  const TxVerdict blob_check = [&] {
    try {
      require_parsable_blob(tx.blob);
      return TxVerdict::Ok;
    } catch (const MalformedBlobError&) {
      return TxVerdict::MalformedBlob;
    }
  }();
  if (blob_check != TxVerdict::Ok) return blob_check;
  return validate_aggregate(tx, it->second);
}

Block LedgerState::propose_block(std::span<const Transaction> pending,
                                 const Identity& proposer) const {
  if (pending.empty()) throw NoValidTxsError("no pending transactions");
  const std::string& channel = pending[0].channel;
  const auto& st = channel_state(channel);
  if (scheduled_proposer(channel) != proposer.id)
    throw NotProposerError("not this round's scheduled proposer");
  Block block;
  block.channel = channel;
  block.height = st.blocks.size();
  if (!st.blocks.empty()) block.prev_hash = st.blocks.back().hash();
  block.proposer = proposer.id;
  for (const auto& tx : pending) {
    if (tx.channel != channel) continue;
    if (st.committed.contains(tx.id())) continue;
    if (validate_transaction(tx) == TxVerdict::Ok) block.txs.push_back(tx);
  }
  if (block.txs.empty()) throw NoValidTxsError("no valid transactions to bundle");
  return block;
}

namespace {

bool blob_is_kb(const std::vector<uint8_t>& blob) {
  return blob.size() >= 4 && blob[3] == 'K';
}

}  // namespace

void LedgerState::endorse_and_commit(Block block,
                                     std::span<const Identity> validator_keys,
                                     std::span<const std::string> offline) {
  auto it = channels_.find(block.channel);
  if (it == channels_.end()) throw OutOfRangeError("unknown channel");
  ChannelState& st = it->second;
  if (block.height != st.blocks.size())
    throw Error("block height does not extend the tip");
  const crypto::Digest tip =
      st.blocks.empty() ? crypto::Digest{} : st.blocks.back().hash();
  if (!std::equal(tip.begin(), tip.end(), block.prev_hash.begin()))
    throw Error("block does not link to the tip");
  if (block.proposer != scheduled_proposer(block.channel))
    throw NotProposerError("block proposer out of schedule");
  if (block.txs.empty()) throw NoValidTxsError("empty block");

  block.endorsements.clear();
  const crypto::Digest digest = block.hash();
  for (const auto& validator : st.validators) {
    if (std::find(offline.begin(), offline.end(), validator) != offline.end())
      continue;
    const Identity* key = nullptr;
    for (const auto& ident : validator_keys)
      if (ident.id == validator) key = &ident;
    if (key == nullptr) continue;
    bool all_valid = true;
    for (const auto& tx : block.txs)
      if (tx.channel != block.channel ||
          validate_transaction(tx) != TxVerdict::Ok) {
        all_valid = false;
        break;
      }
    if (!all_valid) continue;
    const auto sig = crypto::sign(digest, key->sk);
    block.endorsements.push_back({validator, {sig.begin(), sig.end()}});
  }
  if (block.endorsements.size() < quorum(block.channel))
    throw QuorumNotReachedError("endorsements below quorum");

  for (const auto& tx : block.txs) {
    st.committed.emplace(tx.id(), tx);
    if (blob_is_kb(tx.blob))
      st.latest_kb = tx.blob;
    else
      st.latest_model = tx.blob;
  }
  st.blocks.push_back(std::move(block));
}

std::optional<uint64_t> LedgerState::verify_chain(const std::string& channel) const {
  const auto& st = channel_state(channel);
  crypto::Digest prev{};
  for (size_t k = 0; k < st.blocks.size(); ++k) {
    const Block& b = st.blocks[k];
    if (b.height != k) return k;
    if (b.channel != channel) return k;
    if (!std::equal(prev.begin(), prev.end(), b.prev_hash.begin())) return k;
    const crypto::Digest digest = b.hash();
    std::vector<std::string> seen;
    bool ok = b.endorsements.size() >= quorum(channel);
    for (const auto& e : b.endorsements) {
      if (std::find(st.validators.begin(), st.validators.end(), e.validator) ==
              st.validators.end() ||
          std::find(seen.begin(), seen.end(), e.validator) != seen.end() ||
          !authority_->known(e.validator) ||
          !crypto::verify(digest, e.signature, authority_->public_key(e.validator))) {
        ok = false;
        break;
      }
      seen.push_back(e.validator);
    }
    if (!ok) return k;
    prev = digest;
  }
  return std::nullopt;
}

const std::vector<uint8_t>& LedgerState::retrieve_latest(const std::string& channel,
                                                         BlobKind kind) const {
  const auto& st = channel_state(channel);
  const auto& blob = kind == BlobKind::Model ? st.latest_model : st.latest_kb;
  if (blob.empty()) throw NothingCommittedError("nothing committed for this kind");
  return blob;
}

const std::vector<Block>& LedgerState::blocks(const std::string& channel) const {
  return channel_state(channel).blocks;
}

std::optional<Transaction> LedgerState::find_committed(const std::string& channel,
                                                       const TxId& id) const {
  const auto& st = channel_state(channel);
  auto it = st.committed.find(id);
  if (it == st.committed.end()) return std::nullopt;
  return it->second;
}

// --- persistence -------------------------------------------------------------

namespace {
constexpr uint8_t kLedgerMagic[4] = {'S', 'L', 'G', '1'};
}

std::vector<uint8_t> LedgerState::serialize() const {
  ByteWriter w;
  w.raw(kLedgerMagic);
  w.u32(static_cast<uint32_t>(channels_.size()));
  for (const auto& [name, st] : channels_) {
    w.lp_str(name);
    w.u32(static_cast<uint32_t>(st.blocks.size()));
    for (const auto& block : st.blocks) {
      w.lp_bytes(block.canonical_bytes());
      w.u32(static_cast<uint32_t>(block.endorsements.size()));
      for (const auto& e : block.endorsements) {
        w.lp_str(e.validator);
        w.u32(static_cast<uint32_t>(e.signature.size()));
        w.raw(e.signature);
      }
    }
  }
  return w.take();
}

LedgerState LedgerState::deserialize(
    std::span<const uint8_t> bytes, const KeyAuthority& authority,
    const std::map<std::string, std::vector<std::string>>& channels) {
  LedgerState state(&authority);
  for (const auto& [name, validators] : channels)
    state.register_channel(name, validators);

  ByteReader r(bytes);
  auto magic = r.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kLedgerMagic))
    throw DecodeError("bad ledger magic");
  const uint32_t n_channels = r.u32();
  for (uint32_t c = 0; c < n_channels; ++c) {
    const std::string name = r.lp_str();
    auto it = state.channels_.find(name);
    if (it == state.channels_.end()) throw DecodeError("unknown channel in ledger file");
    ChannelState& st = it->second;
    const uint32_t n_blocks = r.u32();
    for (uint32_t k = 0; k < n_blocks; ++k) {
      const auto canonical = r.lp_bytes();
      ByteReader br(canonical);
      Block block;
      block.height = br.u64();
      block.channel = br.lp_str();
      auto prev = br.raw(32);
      std::copy(prev.begin(), prev.end(), block.prev_hash.begin());
      const uint32_t n_txs = br.u32();
      for (uint32_t t = 0; t < n_txs; ++t) block.txs.push_back(parse_tx_wire(br.lp_bytes()));
      block.proposer = br.lp_str();
      br.expect_end();

      const uint32_t n_endorse = r.u32();
      for (uint32_t e = 0; e < n_endorse; ++e) {
        Block::Endorsement en;
        en.validator = r.lp_str();
        const uint32_t sig_len = r.u32();
        if (sig_len != 64) throw DecodeError("unexpected endorsement signature length");
        auto sig = r.raw(sig_len);
        en.signature.assign(sig.begin(), sig.end());
        block.endorsements.push_back(std::move(en));
      }

      // Replay with full checks: link, schedule, endorsements, transactions.
      if (block.channel != name) throw DecodeError("block channel mismatch");
      if (block.height != st.blocks.size()) throw DecodeError("block height out of order");
      const crypto::Digest tip =
          st.blocks.empty() ? crypto::Digest{} : st.blocks.back().hash();
      if (!std::equal(tip.begin(), tip.end(), block.prev_hash.begin()))
        throw DecodeError("broken hash link");
      if (block.proposer != state.scheduled_proposer(name))
        throw DecodeError("block proposer out of schedule");
      const crypto::Digest digest = block.hash();
      if (block.endorsements.size() < state.quorum(name))
        throw DecodeError("endorsements below quorum");
      std::vector<std::string> seen;
      for (const auto& e : block.endorsements) {
        if (std::find(st.validators.begin(), st.validators.end(), e.validator) ==
                st.validators.end() ||
            std::find(seen.begin(), seen.end(), e.validator) != seen.end() ||
            !authority.known(e.validator) ||
            !crypto::verify(digest, e.signature, authority.public_key(e.validator)))
          throw DecodeError("invalid endorsement");
        seen.push_back(e.validator);
      }
      if (block.txs.empty()) throw DecodeError("empty block");
      for (const auto& tx : block.txs) {
        if (tx.channel != name) throw DecodeError("transaction channel mismatch");
        if (state.validate_transaction(tx) != TxVerdict::Ok)
          throw DecodeError("invalid transaction in committed block");
      }
      for (const auto& tx : block.txs) {
        st.committed.emplace(tx.id(), tx);
        if (blob_is_kb(tx.blob))
          st.latest_kb = tx.blob;
        else
          st.latest_model = tx.blob;
      }
      st.blocks.push_back(std::move(block));
    }
  }
  r.expect_end();
  return state;
}

}  // namespace semcom::chain
