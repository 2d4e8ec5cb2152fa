#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "semcom/codec.hpp"
#include "semcom/rng.hpp"
#include "semcom/signal.hpp"

namespace semcom::codec {

// The four local-update steps: semantic codec, channel codec, knowledge base,
// whole system. Each freezes the complementary parameter groups.
enum class TrainKind { Semantic, Channel, KnowledgeBase, Whole };

// Randomness of one sentence transmission, frozen so the loss is a
// deterministic function of the parameters. Gradients treat the gain and both
// noise vectors as constants.
struct SentencePlan {
  size_t feature_prefix = 0;            // j: feature rows transmitted
  std::complex<double> gain{1.0, 0.0};  // block gain h
  double noise_sigma = 0.0;             // channel noise std per real coordinate
  std::vector<double> channel_noise;    // raw noise reals, length j*d
  double dp_sigma = 0.0;                // privacy noise std per real coordinate
  std::vector<double> dp_noise;         // length j*d when dp_sigma > 0
};

struct BatchPlan {
  size_t kb_prefix = 2;  // i: knowledge rows used, shared across the batch
  std::vector<SentencePlan> sentences;
};

// Draws h and the noise reals for one transmission of `feature_prefix` rows.
SentencePlan draw_sentence_plan(size_t feature_prefix, uint32_t channel_dim,
                                const signal::ChannelModel& model, double snr_db,
                                Rng& rng, double dp_sigma = 0.0);

// Random-pruning draws: i uniform in [2, P] once per batch, j uniform in
// [0, L+i] per sentence, then one channel realization per sentence.
BatchPlan draw_random_prune_plan(std::span<const Sentence> batch,
                                 const CodecParams& params,
                                 const signal::ChannelModel& model, double snr_db,
                                 Rng& rng);

// Fixed prefixes: kb_prefix rows of knowledge, and per sentence
// min(feature_keep(rows), rows) feature rows. Used by evaluation sweeps.
BatchPlan fixed_plan(std::span<const Sentence> batch, const CodecParams& params,
                     size_t kb_prefix, double feature_keep_fraction,
                     const signal::ChannelModel& model, double snr_db, Rng& rng,
                     double dp_sigma = 0.0);

// Everything a forward pass produces, kept for the backward pass.
struct ForwardTrace {
  size_t sentence_len = 0;   // L
  size_t kb_prefix = 0;      // i
  size_t feature_prefix = 0; // j
  Matrix embedded;           // L x Q
  Matrix stacked;            // (L+i) x Q, tokens then knowledge rows
  Matrix features;           // (L+i) x Q, the block f
  Matrix encoded;            // j x d before normalization
  double norm_scale = 1.0;   // sqrt(K) / ||g||
  double g_norm2 = 0.0;
  std::vector<double> transmitted;  // x real view incl. privacy noise, length j*d
  std::vector<double> equalized;    // receiver view after zero-forcing
  Matrix features_hat;       // (L+i) x Q; untransmitted rows are decoder bias
  DecodeResult decoded;
  double ce = 0.0;
  double mse = 0.0;
};

ForwardTrace run_forward(const Sentence& s, const CodecParams& params,
                         size_t kb_prefix, const SentencePlan& plan);

struct CodecGrads {
  Matrix embedding, sem_weight;
  std::vector<double> sem_bias;
  Matrix chan_enc, chan_dec;
  std::vector<double> chan_dec_bias;
  Matrix out_proj, kb;

  static CodecGrads zeros(const CodecDims& dims);
};

// Loss of a batch under a frozen plan. Semantic: mean CE. Channel: mean MSE.
// KnowledgeBase: mean CE + Gram penalty (CE only when kb_plain_ce). Whole:
// mean(CE + MSE + (CE + Gram penalty)).
double plan_loss(const CodecParams& params, std::span<const Sentence> batch,
                 const BatchPlan& plan, TrainKind kind, bool kb_plain_ce = false);

// Hand-derived gradient of plan_loss with respect to every parameter group.
CodecGrads plan_grads(const CodecParams& params, std::span<const Sentence> batch,
                      const BatchPlan& plan, TrainKind kind,
                      bool kb_plain_ce = false);

struct TrainState {
  CodecParams params;
  signal::ChannelModel channel = signal::ChannelModel::awgn();
  double snr_db = std::numeric_limits<double>::infinity();
  Rng rng;
  // Literal pseudocode variant of the knowledge-base step: descend the
  // knowledge vectors on CE alone instead of CE + Gram penalty.
  bool kb_step_plain_ce = false;

  TrainState(CodecParams p, uint64_t seed) : params(std::move(p)), rng(seed) {}
};

struct StepResult {
  double loss = 0.0;
  BatchPlan plan;
};

// One gradient-descent step. Draws the Algorithm-style pruning plan, computes
// the kind's loss, and updates only the unfrozen parameter groups. Throws
// NonFiniteLossError (leaving parameters untouched) if the loss is not finite.
StepResult train_step(TrainKind kind, std::span<const Sentence> batch,
                      TrainState& state, double learning_rate);

// Forward propagation with random pruning: the full encode -> prune ->
// channel -> decode pipeline, returning the intermediates losses are built on.
struct PruneForwardResult {
  BatchPlan plan;
  std::vector<ForwardTrace> traces;
};

PruneForwardResult forward_random_prune(std::span<const Sentence> batch,
                                        const CodecParams& params,
                                        const signal::ChannelModel& model,
                                        double snr_db, Rng& rng);

}  // namespace semcom::codec
