#include "semcom/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "semcom/bleu.hpp"
#include "semcom/bytes.hpp"
#include "semcom/errors.hpp"

namespace semcom::sim {

namespace {

std::string channel_name(const signal::ChannelModel& m) {
  switch (m.kind) {
    case signal::FadingKind::Awgn: return "awgn";
    case signal::FadingKind::Rayleigh: return "rayleigh";
    case signal::FadingKind::Rician: return "rician";
  }
  return "?";
}

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

size_t blob_header_size(const std::vector<uint8_t>& blob) {
  return blob.size() >= 4 && blob[3] == 'K' ? 12 : 20;
}

std::vector<double> blob_floats(const std::vector<uint8_t>& blob) {
  const size_t header = blob_header_size(blob);
  ByteReader r(std::span<const uint8_t>(blob).subspan(header));
  std::vector<double> out;
  out.reserve(r.remaining() / 8);
  while (r.remaining() >= 8) out.push_back(r.f64());
  return out;
}

}  // namespace

uint64_t conventional_bytes(size_t blob_len) {
  return blob_len + (blob_len + 19) / 20;  // 5% framing, rounded up
}

uint64_t semantic_payload_bytes(size_t float_count, size_t bundle_bytes) {
  const size_t symbols = (float_count + 1) / 2;
  return 16 * symbols + bundle_bytes;
}

Simulation::Simulation(const ScenarioConfig& cfg)
    : cfg_(cfg),
      vocab_(codec::Vocabulary::from_corpus(codec::bundled_corpus())),
      shared_init_(codec::CodecParams()),
      authority_(0),
      ledger_(&authority_),
      rng_(cfg.seed) {
  for (const auto& line : codec::bundled_corpus())
    corpus_.push_back(vocab_.tokenize(line));

  // Fixed fork order keeps every stream stable across runs.
  Rng init_rng = rng_.fork(1);
  authority_ = chain::KeyAuthority(rng_.fork(2).next_u64());
  update_rng_seed_ = rng_.fork(3).next_u64();
  comm_rng_seed_ = rng_.fork(4).next_u64();
  calib_rng_seed_ = rng_.fork(5).next_u64();
  const uint32_t total_devices = cfg_.device_count + cfg_.late_joiners;
  for (uint32_t k = 0; k < total_devices; ++k)
    device_seeds_.push_back(rng_.fork(100 + k).next_u64());

  codec::CodecDims dims{vocab_.size(), cfg_.feature_dim, cfg_.kb_vectors,
                        cfg_.channel_dim};
  shared_init_ = codec::CodecParams::random_init(dims, init_rng);

  std::vector<std::string> validators;
  for (uint32_t k = 0; k < cfg_.device_count; ++k)
    validators.push_back(cfg_.device_profile(k).id);
  ledger_.register_channel(cfg_.channel_id, validators);

  for (uint32_t k = 0; k < cfg_.device_count; ++k)
    devices_.push_back(make_device(k, false));

  report_.config_hash = config_hash(cfg_);
  report_.seed = cfg_.seed;
}

Device Simulation::make_device(uint32_t index, bool late) {
  DeviceProfile profile = cfg_.device_profile(index);
  Device dev{profile,
             authority_.issue_identity(profile.id),
             codec::TrainState(shared_init_, device_seeds_[index]),
             {},
             late};
  dev.train.channel = cfg_.channel;
  dev.train.snr_db = cfg_.training.snr_db;
  if (!late)
    for (size_t s = index; s < corpus_.size(); s += cfg_.device_count)
      dev.shard.push_back(corpus_[s]);
  return dev;
}

void Simulation::train_device(Device& dev) {
  if (dev.shard.empty()) return;
  const auto& sched = cfg_.training;
  for (uint32_t s = 0; s < sched.semantic_steps; ++s)
    codec::train_step(codec::TrainKind::Semantic, dev.shard, dev.train, sched.learning_rate);
  for (uint32_t s = 0; s < sched.channel_steps; ++s)
    codec::train_step(codec::TrainKind::Channel, dev.shard, dev.train, sched.learning_rate);
  for (uint32_t s = 0; s < sched.kb_steps; ++s)
    codec::train_step(codec::TrainKind::KnowledgeBase, dev.shard, dev.train, sched.learning_rate);
  for (uint32_t s = 0; s < sched.whole_steps; ++s)
    codec::train_step(codec::TrainKind::Whole, dev.shard, dev.train, sched.learning_rate);
}

uint64_t Simulation::transfer_blob(const Device& dev, const std::vector<uint8_t>& blob,
                                   Rng& rng, double* accept_out) {
  if (!dev.profile.semantic_transport) {
    if (accept_out) *accept_out = 1.0;
    return conventional_bytes(blob.size());
  }

  // The payload floats travel over the simulated channel in capability-sized
  // blocks; {W_I, I, sig} goes on the reliable control channel.
  const std::vector<double> payload = blob_floats(blob);
  const size_t n = payload.size();
  double power = 0.0;
  for (size_t a = 0; a + 1 < n; a += 2)
    power += payload[a] * payload[a] + payload[a + 1] * payload[a + 1];
  const size_t symbols = (n + 1) / 2;
  power /= static_cast<double>(symbols);

  std::vector<double> received = payload;
  if (power > 0.0) {
    const double n0 = signal::snr_db_to_noise_power(cfg_.update_snr_db, power);
    const double sigma = std::sqrt(n0 / 2.0);
    const size_t chunk_symbols = std::max<size_t>(1, dev.profile.max_symbols);
    for (size_t start = 0; start < symbols; start += chunk_symbols) {
      const auto h = signal::draw_gain(cfg_.channel, rng);
      const size_t end = std::min(symbols, start + chunk_symbols);
      for (size_t m = start; m < end; ++m) {
        const std::complex<double> noise{sigma * rng.gaussian(), sigma * rng.gaussian()};
        const std::complex<double> eta = noise / h;
        received[2 * m] += eta.real();
        if (2 * m + 1 < n) received[2 * m + 1] += eta.imag();
      }
    }
  }

  const size_t index_count = std::min<size_t>(cfg_.verification.index_size, n);
  const auth::IndexSet indices = auth::sample_indices(n, index_count, rng);
  const auth::AuthBundle bundle =
      auth::sign_bundle(payload, indices, dev.identity.sk, dev.identity.id);

  Rng calib = rng.fork(7);
  auth::VerificationPolicy policy;
  policy.diff_threshold = auth::calibrate_threshold(
      n, index_count, cfg_.channel, cfg_.update_snr_db,
      std::max<uint32_t>(2, cfg_.verification.calibration_trials), calib,
      cfg_.verification.diff_mode, power > 0.0 ? power : 1.0);
  policy.release = cfg_.verification.release;
  policy.diff_mode = cfg_.verification.diff_mode;

  auth::IndexReleaseSchedule schedule(policy.release);
  schedule.mark_payload_delivered();
  schedule.mark_acknowledged();
  schedule.request_release(indices);

  const auth::VerifyOutcome out =
      auth::verify_bundle(received, bundle, dev.identity.pk, policy);
  if (accept_out) *accept_out = out.accepted ? 1.0 : 0.0;
  return semantic_payload_bytes(n, auth::encode_bundle(bundle).size());
}

void Simulation::run_update_phase() {
  Rng rng(update_rng_seed_);
  const std::string& channel = cfg_.channel_id;

  auto identity_of = [&](const std::string& id) -> const chain::Identity& {
    for (const auto& dev : devices_)
      if (dev.identity.id == id) return dev.identity;
    throw OutOfRangeError("no identity for " + id);
  };
  std::vector<chain::Identity> validator_keys;
  for (const auto& dev : devices_)
    if (!dev.late) validator_keys.push_back(dev.identity);

  for (uint32_t round = 0; round < cfg_.federation_rounds; ++round) {
    uint64_t round_bytes = 0;
    std::vector<chain::Transaction> uploads;
    for (auto& dev : devices_) {
      if (dev.late) continue;
      train_device(dev);
      const std::vector<uint8_t> blob = cfg_.kb_only
                                            ? codec::serialize_kb(dev.train.params.kb)
                                            : codec::serialize_model(dev.train.params);
      const uint64_t samples = std::max<uint64_t>(1, dev.shard.size());
      uploads.push_back(chain::create_upload_tx(blob, channel, samples, tx_nonce_++,
                                                dev.identity));
      double accepted = 1.0;
      const uint64_t bytes = transfer_blob(dev, blob, rng, &accepted);
      round_bytes += bytes;
      push({"update", "bytes_upload", "", std::numeric_limits<double>::quiet_NaN(), -1,
            -1.0, dev.identity.id, static_cast<double>(bytes)});
      if (dev.profile.semantic_transport)
        push({"update", "blob_transfer_accept", "",
              std::numeric_limits<double>::quiet_NaN(), -1, -1.0, dev.identity.id,
              accepted});
    }
    if (uploads.empty()) break;

    chain::Block block =
        ledger_.propose_block(uploads, identity_of(ledger_.scheduled_proposer(channel)));
    ledger_.endorse_and_commit(std::move(block), validator_keys);

    // Aggregation over this round's uploads, order normalized by tx id.
    struct Input {
      chain::TxId id;
      std::vector<uint8_t> blob;
      uint64_t weight;
    };
    std::vector<Input> inputs;
    for (const auto& tx : uploads) inputs.push_back({tx.id(), tx.blob, tx.sample_count});
    std::sort(inputs.begin(), inputs.end(),
              [](const Input& a, const Input& b) { return a.id < b.id; });
    std::vector<chain::TxId> ids;
    std::vector<std::vector<uint8_t>> blobs;
    std::vector<uint64_t> weights;
    for (auto& in : inputs) {
      ids.push_back(in.id);
      blobs.push_back(std::move(in.blob));
      weights.push_back(in.weight);
    }
    const std::vector<uint8_t> result = chain::fedavg(blobs, weights);
    const chain::Identity& aggregator = identity_of(ledger_.scheduled_proposer(channel));
    const chain::Transaction agg = chain::create_aggregate_tx(
        ids, weights, result, channel, tx_nonce_++, aggregator);
    chain::Block agg_block = ledger_.propose_block(std::span(&agg, 1), aggregator);
    ledger_.endorse_and_commit(std::move(agg_block), validator_keys);

    push({"update", "bytes_round", "", std::numeric_limits<double>::quiet_NaN(), -1, -1.0,
          "", static_cast<double>(round_bytes)});
  }

  size_t committed = 0;
  for (const auto& b : ledger_.blocks(channel)) committed += b.txs.size();
  push({"update", "committed_txs", "", std::numeric_limits<double>::quiet_NaN(), -1, -1.0,
        "", static_cast<double>(committed)});
  push({"update", "blocks", "", std::numeric_limits<double>::quiet_NaN(), -1, -1.0, "",
        static_cast<double>(ledger_.blocks(channel).size())});
  if (!cfg_.ledger_file.empty()) {
    const auto bytes = ledger_.serialize();
    std::filesystem::path path(cfg_.ledger_file);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

void Simulation::run_sync_phase() {
  const uint32_t total = cfg_.device_count + cfg_.late_joiners;
  for (uint32_t k = static_cast<uint32_t>(devices_.size()); k < total; ++k)
    devices_.push_back(make_device(k, true));

  uint32_t synced = 0;
  for (auto& dev : devices_) {
    bool any = false;
    try {
      const auto& blob =
          ledger_.retrieve_latest(cfg_.channel_id, chain::LedgerState::BlobKind::Model);
      dev.train.params = codec::parse_model(blob);
      if (codec::serialize_model(dev.train.params) != blob)
        throw Error("synced model does not round-trip");
      any = true;
    } catch (const NothingCommittedError&) {
    }
    try {
      const auto& blob = ledger_.retrieve_latest(cfg_.channel_id,
                                                 chain::LedgerState::BlobKind::KnowledgeBase);
      dev.train.params.kb = codec::parse_kb(blob);
      if (codec::serialize_kb(dev.train.params.kb) != blob)
        throw Error("synced knowledge base does not round-trip");
      any = true;
    } catch (const NothingCommittedError&) {
    }
    if (any) ++synced;
  }
  synced_ = true;
  push({"sync", "synced_devices", "", std::numeric_limits<double>::quiet_NaN(), -1, -1.0,
        "", static_cast<double>(synced)});
}

void Simulation::run_communication_phase() {
  if (!synced_) throw Error("communication phase requires a completed sync");
  Rng rng(comm_rng_seed_);
  Rng calib_rng(calib_rng_seed_);
  const std::string chan = channel_name(cfg_.channel);

  std::vector<uint32_t> kb_grid = cfg_.evaluation.kb_prefix_grid;
  if (kb_grid.empty()) kb_grid = {cfg_.kb_vectors};
  std::vector<double> keep_grid = cfg_.evaluation.feature_keep_grid;
  if (keep_grid.empty()) keep_grid = {1.0};

  for (double snr : cfg_.snr_grid_db) {
    const double threshold = auth::calibrate_threshold(
        std::max<size_t>(1, cfg_.verification.index_size), cfg_.verification.index_size,
        cfg_.channel, snr, std::max<uint32_t>(2, cfg_.verification.calibration_trials),
        calib_rng, cfg_.verification.diff_mode);
    auth::VerificationPolicy policy{threshold, cfg_.verification.release,
                                    cfg_.verification.diff_mode};

    const double n0 = signal::snr_db_to_noise_power(snr);
    dp::NoiseProfile profile;
    profile.sigma_model = cfg_.dp.sigma_model;
    profile.sigma_channel = std::sqrt(n0 / 2.0);
    profile.channel_mode = cfg_.channel.kind == signal::FadingKind::Awgn
                               ? dp::ChannelAccounting::AwgnExact
                               : dp::ChannelAccounting::FadingWorstCase;
    profile.h_min = cfg_.dp.h_min;

    for (uint32_t kb_prefix : kb_grid) {
      for (double keep : keep_grid) {
        double bleu1_sum = 0.0, bleu4_sum = 0.0;
        size_t honest = 0, honest_accepted = 0;
        size_t attacked = 0, detected = 0;
        double predicted_sum = 0.0;
        uint64_t symbols_max = 0;
        double sigma_dp_sum = 0.0, eps_agg_sum = 0.0, eps_comp_sum = 0.0;
        double power_db_sum = 0.0;
        size_t dp_points = 0, comp_ok = 0, comp_unachievable = 0;

        for (uint32_t t = 0; t < cfg_.evaluation.sentences; ++t) {
          const codec::Sentence& sentence = corpus_[t % corpus_.size()];
          Device& dev = devices_[t % devices_.size()];
          const auto& params = dev.train.params;

          const size_t i_eff =
              std::min<size_t>(std::max<uint32_t>(2, kb_prefix), dev.profile.kb_use);
          const size_t rows = sentence.size() + i_eff;
          const size_t j_by_capability =
              std::min<size_t>(rows, 2 * dev.profile.max_symbols / cfg_.channel_dim);
          size_t j = static_cast<size_t>(
              std::llround(keep * static_cast<double>(rows)));
          j = std::min({j, rows, j_by_capability});

          double sigma_dp = 0.0;
          if (cfg_.dp.enabled && j > 0) {
            const size_t symbols = j * cfg_.channel_dim / 2;
            const double sens = dp::sensitivity_bound(symbols);
            const dp::PrivacyBudget target{cfg_.dp.epsilon, cfg_.dp.delta};
            ++dp_points;
            if (cfg_.dp.composition_accounting) {
              try {
                const auto res = dp::calibrate(target, profile, sens, symbols);
                sigma_dp = res.sigma_dp;
                eps_comp_sum += res.composed.epsilon_hat;
                ++comp_ok;
              } catch (const UnachievableError&) {
                ++comp_unachievable;
                sigma_dp = 0.0;
              }
            } else {
              const double total_needed = dp::analytic_gaussian_sigma(target, sens);
              const double chan_sq = profile.effective_sigma_channel() *
                                     profile.effective_sigma_channel();
              const double have = profile.sigma_model * profile.sigma_model + chan_sq;
              sigma_dp = std::sqrt(std::max(0.0, total_needed * total_needed - have));
            }
            sigma_dp_sum += sigma_dp;
            const double total_sigma =
                std::sqrt(sigma_dp * sigma_dp + profile.sigma_model * profile.sigma_model +
                          profile.effective_sigma_channel() * profile.effective_sigma_channel());
            if (total_sigma > 0.0) {
              try {
                eps_agg_sum += dp::sigma_to_budget(total_sigma, sens, cfg_.dp.delta);
              } catch (const BudgetOutOfRangeError&) {
                eps_agg_sum += 1000.0;
              }
            }
          }

          const codec::SentencePlan plan = codec::draw_sentence_plan(
              j, cfg_.channel_dim, cfg_.channel, snr, rng, sigma_dp);
          const codec::ForwardTrace trace = codec::run_forward(sentence, params, i_eff, plan);

          bleu1_sum += codec::bleu(trace.decoded.tokens, sentence, 1);
          bleu4_sum += codec::bleu(trace.decoded.tokens, sentence, 4);
          symbols_max = std::max<uint64_t>(symbols_max, j * cfg_.channel_dim / 2);
          if (!trace.transmitted.empty()) {
            double p = 0.0;
            for (size_t m = 0; m + 1 < trace.transmitted.size(); m += 2)
              p += trace.transmitted[m] * trace.transmitted[m] +
                   trace.transmitted[m + 1] * trace.transmitted[m + 1];
            p /= static_cast<double>(trace.transmitted.size() / 2);
            power_db_sum += 10.0 * std::log10(std::max(p, 1e-300));
          }

          if (j > 0) {
            const auto& payload = trace.transmitted;
            const size_t n = payload.size();
            const size_t index_count = std::min<size_t>(cfg_.verification.index_size, n);
            const auth::IndexSet indices = auth::sample_indices(n, index_count, rng);
            const auth::AuthBundle bundle =
                auth::sign_bundle(payload, indices, dev.identity.sk, dev.identity.id);
            auth::IndexReleaseSchedule schedule(policy.release);
            schedule.mark_payload_delivered();
            schedule.mark_acknowledged();
            schedule.request_release(indices);

            std::vector<double> delivered = trace.equalized;
            const bool attack =
                cfg_.adversary.enabled && rng.uniform() < cfg_.adversary.fraction;
            size_t x_eff = 0;
            if (attack) {
              x_eff = std::min<size_t>(std::max<uint32_t>(1, cfg_.adversary.tamper_count), n);
              delivered = auth::tamper(delivered, x_eff, cfg_.adversary.magnitude,
                                       policy.diff_threshold, rng);
            }
            const auth::VerifyOutcome out =
                auth::verify_bundle(delivered, bundle, dev.identity.pk, policy);
            if (attack) {
              ++attacked;
              if (!out.accepted) ++detected;
              predicted_sum += auth::detection_probability(n, x_eff, index_count);
            } else {
              ++honest;
              if (out.accepted) ++honest_accepted;
            }
          }
        }

        const double count = static_cast<double>(cfg_.evaluation.sentences);
        auto row = [&](const std::string& metric, double value) {
          push({"communication", metric, chan, snr, static_cast<long>(kb_prefix), keep,
                "", value});
        };
        row("bleu1", bleu1_sum / count);
        row("bleu4", bleu4_sum / count);
        row("symbols_max", static_cast<double>(symbols_max));
        if (honest > 0)
          row("auth_accept_honest",
              static_cast<double>(honest_accepted) / static_cast<double>(honest));
        if (attacked > 0) {
          row("auth_detect_rate",
              static_cast<double>(detected) / static_cast<double>(attacked));
          row("auth_detect_predicted", predicted_sum / static_cast<double>(attacked));
        }
        if (dp_points > 0) {
          row("dp_sigma", sigma_dp_sum / static_cast<double>(dp_points));
          row("dp_eps_aggregate", eps_agg_sum / static_cast<double>(dp_points));
          if (cfg_.dp.composition_accounting) {
            row("dp_unachievable",
                static_cast<double>(comp_unachievable) / static_cast<double>(dp_points));
            if (comp_ok > 0)
              row("dp_eps_composed", eps_comp_sum / static_cast<double>(comp_ok));
          }
          row("dp_power_db", power_db_sum / count);
        }
      }
    }
  }
}

std::string report_csv(const RunReport& report) {
  std::string out = "config_hash,seed,phase,metric,channel,snr_db,kb_prefix,feature_keep,device,value\n";
  for (const auto& r : report.rows) {
    out += report.config_hash;
    out += ',';
    out += std::to_string(report.seed);
    out += ',';
    out += r.phase;
    out += ',';
    out += r.metric;
    out += ',';
    out += r.channel;
    out += ',';
    if (!std::isnan(r.snr_db)) out += fmt(r.snr_db, "%.6g");
    out += ',';
    if (r.kb_prefix >= 0) out += std::to_string(r.kb_prefix);
    out += ',';
    if (r.feature_keep >= 0.0) out += fmt(r.feature_keep, "%.6g");
    out += ',';
    out += r.device;
    out += ',';
    out += fmt(r.value);
    out += '\n';
  }
  return out;
}

std::string report_json(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["config_hash"] = report.config_hash;
  doc["seed"] = report.seed;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["phase"] = r.phase;
    row["metric"] = r.metric;
    if (!r.channel.empty()) row["channel"] = r.channel;
    if (!std::isnan(r.snr_db)) row["snr_db"] = r.snr_db;
    if (r.kb_prefix >= 0) row["kb_prefix"] = r.kb_prefix;
    if (r.feature_keep >= 0.0) row["feature_keep"] = r.feature_keep;
    if (!r.device.empty()) row["device"] = r.device;
    row["value"] = r.value;
    doc["rows"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

void emit_report(const RunReport& report, const std::string& csv_path,
                 const std::string& json_path) {
  auto write = [](const std::string& path, const std::string& text) {
    if (path.empty()) return;
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write report file: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  };
  write(csv_path, report_csv(report));
  write(json_path, report_json(report));
}

RunReport run_scenario(const ScenarioConfig& cfg) {
  Simulation sim(cfg);
  sim.run_update_phase();
  sim.run_sync_phase();
  sim.run_communication_phase();
  return sim.report();
}

}  // namespace semcom::sim
