#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semcom/matrix.hpp"
#include "semcom/rng.hpp"
#include "semcom/signal.hpp"
#include "semcom/vocab.hpp"

namespace semcom::codec {

struct CodecDims {
  uint32_t vocab_size = 0;   // V
  uint32_t feature_dim = 0;  // Q
  uint32_t kb_vectors = 0;   // P
  uint32_t channel_dim = 0;  // d, even: pairs of reals become complex symbols

  bool operator==(const CodecDims&) const = default;
};

// Full trainable state of the toy codec. The knowledge vectors live here as
// well; they are directly trainable rows in importance order, so a prefix is
// always a usable smaller knowledge base.
struct CodecParams {
  CodecDims dims;
  Matrix embedding;                  // V x Q
  Matrix sem_weight;                 // Q x Q
  std::vector<double> sem_bias;      // Q
  Matrix chan_enc;                   // Q x d
  Matrix chan_dec;                   // d x Q
  std::vector<double> chan_dec_bias; // Q
  Matrix out_proj;                   // Q x V
  Matrix kb;                         // P x Q

  static CodecParams random_init(const CodecDims& dims, Rng& rng);
};

// Knowledge base as an exchange object: importance-ordered vectors for one
// task. Prefixes of the rows are themselves valid knowledge bases.
struct KnowledgeBase {
  std::string task;
  Matrix vectors;  // P x Q
};

// First `prefix` vectors, order preserved. prefix must be in [2, P].
KnowledgeBase prune_kb(const KnowledgeBase& kb, size_t prefix);

// Row l = embedding[token l]. Throws UnknownTokenError for ids >= V.
Matrix embed(const Sentence& s, const CodecParams& p);

// tanh((stack(embedded, kb_prefix)) * W + b) rowwise. kb_prefix needs at
// least 2 rows.
Matrix semantic_encode(const Matrix& embedded, const Matrix& kb_prefix,
                       const CodecParams& p);

// First `prefix` feature rows (position order). prefix <= rows.
Matrix prune_features(const Matrix& features, size_t prefix);

// Rowwise multiply by the channel-encoder weight, flatten row major, pair
// consecutive reals into complex symbols, power normalize.
signal::ComplexSignal channel_encode(const Matrix& features, const CodecParams& p);

// Inverse shape of channel_encode followed by the linear decoder. The signal
// must carry exactly rows * d / 2 symbols.
Matrix channel_decode(const signal::ComplexSignal& received, size_t rows,
                      const CodecParams& p);

struct DecodeResult {
  Matrix probabilities;  // L x V, rows sum to 1
  Sentence tokens;       // argmax per position
};

// Per token position l: logits = (f_hat_l + mean(kb_prefix rows)) * W_out,
// probabilities by softmax. features_hat must have at least sentence_len
// rows; the kb prefix must be nonempty.
DecodeResult semantic_decode(const Matrix& features_hat, size_t sentence_len,
                             const Matrix& kb_prefix, const CodecParams& p);

// Binary cross-entropy summed over positions and vocabulary entries with a
// one-hot target per position. Probabilities are clamped to
// [1e-12, 1 - 1e-12] before the logs.
double ce_loss(const Sentence& original, const Matrix& probabilities);

// Categorical alternative: -sum_l log p_l(w_l).
double categorical_ce_loss(const Sentence& original, const Matrix& probabilities);

// Frobenius norm of f - f_hat (the norm itself, not its square).
double mse_loss(const Matrix& f, const Matrix& f_hat);

// || kb^T kb ||_F
double kb_gram_penalty(const Matrix& kb);

// ce_loss + kb_gram_penalty
double kb_loss(const Sentence& original, const Matrix& probabilities,
               const Matrix& kb);

// ce + mse + kb (the three terms as produced by the operations above).
double total_loss(double ce, double mse, double kb);

constexpr double kProbClamp = 1e-12;

// --- model/KB byte formats (normative) -------------------------------------
//
// Model blob "SKB1": magic, u32 dims (V, Q, P, d) little-endian, then
// row-major f64 little-endian matrices in order E, W_s, bias_s, W_ce, W_cd,
// bias_cd, W_o, kb. This byte layout is what gets hashed, signed and
// federated.
//
// Knowledge-base-only blob "SKBK": magic, u32 (P, Q), then kb rows.

std::vector<uint8_t> serialize_model(const CodecParams& p);
CodecParams parse_model(std::span<const uint8_t> blob);

std::vector<uint8_t> serialize_kb(const Matrix& kb);
Matrix parse_kb(std::span<const uint8_t> blob);

size_t model_blob_size(const CodecDims& dims);
size_t kb_blob_size(uint32_t kb_vectors, uint32_t feature_dim);

}  // namespace semcom::codec
