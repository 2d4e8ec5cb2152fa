#include "semcom/codec.hpp"

#include <cmath>

#include "semcom/bytes.hpp"
#include "semcom/errors.hpp"

namespace semcom::codec {

namespace {

Matrix random_matrix(size_t rows, size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = scale * rng.gaussian();
  return m;
}

}  // namespace

CodecParams CodecParams::random_init(const CodecDims& dims, Rng& rng) {
  if (dims.vocab_size < 5 || dims.feature_dim == 0 || dims.kb_vectors < 2)
    throw ShapeMismatchError("codec dims too small");
  if (dims.channel_dim == 0 || dims.channel_dim % 2 != 0)
    throw ShapeMismatchError("channel_dim must be even and positive");
  const double q = static_cast<double>(dims.feature_dim);
  CodecParams p;
  p.dims = dims;
  p.embedding = random_matrix(dims.vocab_size, dims.feature_dim, 1.0 / std::sqrt(q), rng);
  p.sem_weight = random_matrix(dims.feature_dim, dims.feature_dim, 1.0 / std::sqrt(q), rng);
  p.sem_bias.assign(dims.feature_dim, 0.0);
  p.chan_enc = random_matrix(dims.feature_dim, dims.channel_dim, 1.0 / std::sqrt(q), rng);
  p.chan_dec = random_matrix(dims.channel_dim, dims.feature_dim,
                             1.0 / std::sqrt(static_cast<double>(dims.channel_dim)), rng);
  p.chan_dec_bias.assign(dims.feature_dim, 0.0);
  p.out_proj = random_matrix(dims.feature_dim, dims.vocab_size, 1.0 / std::sqrt(q), rng);
  p.kb = random_matrix(dims.kb_vectors, dims.feature_dim, 1.0 / std::sqrt(q), rng);
  return p;
}

KnowledgeBase prune_kb(const KnowledgeBase& kb, size_t prefix) {
  if (prefix < 2 || prefix > kb.vectors.rows())
    throw OutOfRangeError("knowledge prefix must be in [2, P]");
  return {kb.task, kb.vectors.prefix_rows(prefix)};
}

Matrix embed(const Sentence& s, const CodecParams& p) {
  if (s.ids.empty()) throw EmptySentenceError("cannot embed an empty sentence");
  Matrix out(s.ids.size(), p.dims.feature_dim);
  for (size_t l = 0; l < s.ids.size(); ++l) {
    if (s.ids[l] >= p.dims.vocab_size) throw UnknownTokenError("token id out of vocabulary");
    auto src = p.embedding.row(s.ids[l]);
    std::copy(src.begin(), src.end(), out.row(l).begin());
  }
  return out;
}

Matrix semantic_encode(const Matrix& embedded, const Matrix& kb_prefix,
                       const CodecParams& p) {
  if (kb_prefix.rows() < 2) throw PrefixTooSmallError("knowledge prefix needs >= 2 rows");
  if (embedded.cols() != p.dims.feature_dim || kb_prefix.cols() != p.dims.feature_dim)
    throw ShapeMismatchError("feature width mismatch");
  const size_t rows = embedded.rows() + kb_prefix.rows();
  Matrix stacked(rows, p.dims.feature_dim);
  for (size_t r = 0; r < embedded.rows(); ++r) {
    auto src = embedded.row(r);
    std::copy(src.begin(), src.end(), stacked.row(r).begin());
  }
  for (size_t r = 0; r < kb_prefix.rows(); ++r) {
    auto src = kb_prefix.row(r);
    std::copy(src.begin(), src.end(), stacked.row(embedded.rows() + r).begin());
  }
  Matrix out = matmul(stacked, p.sem_weight);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < p.dims.feature_dim; ++c)
      out.at(r, c) = std::tanh(out.at(r, c) + p.sem_bias[c]);
  return out;
}

Matrix prune_features(const Matrix& features, size_t prefix) {
  if (prefix > features.rows()) throw OutOfRangeError("feature prefix exceeds block height");
  return features.prefix_rows(prefix);
}

signal::ComplexSignal channel_encode(const Matrix& features, const CodecParams& p) {
  if (features.cols() != p.dims.feature_dim) throw ShapeMismatchError("feature width mismatch");
  if (features.rows() == 0) throw ZeroPowerError("no feature rows to transmit");
  Matrix symbols = matmul(features, p.chan_enc);
  signal::ComplexSignal flat;
  flat.symbols.reserve(symbols.rows() * p.dims.channel_dim / 2);
  const auto& v = symbols.values();
  for (size_t i = 0; i + 1 < v.size(); i += 2) flat.symbols.emplace_back(v[i], v[i + 1]);
  return signal::power_normalize(flat);
}

Matrix channel_decode(const signal::ComplexSignal& received, size_t rows,
                      const CodecParams& p) {
  const size_t d = p.dims.channel_dim;
  if (received.symbols.size() * 2 != rows * d)
    throw ShapeMismatchError("symbol count does not match requested rows");
  Matrix reals(rows, d);
  auto& v = reals.values();
  for (size_t i = 0; i < received.symbols.size(); ++i) {
    v[2 * i] = received.symbols[i].real();
    v[2 * i + 1] = received.symbols[i].imag();
  }
  Matrix out = matmul(reals, p.chan_dec);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < p.dims.feature_dim; ++c) out.at(r, c) += p.chan_dec_bias[c];
  return out;
}

DecodeResult semantic_decode(const Matrix& features_hat, size_t sentence_len,
                             const Matrix& kb_prefix, const CodecParams& p) {
  if (kb_prefix.rows() == 0) throw EmptyKbError("decoding requires a nonempty knowledge prefix");
  if (features_hat.rows() < sentence_len)
    throw ShapeMismatchError("recovered features have fewer rows than token positions");
  const size_t q = p.dims.feature_dim;
  std::vector<double> kb_mean(q, 0.0);
  for (size_t r = 0; r < kb_prefix.rows(); ++r)
    for (size_t c = 0; c < q; ++c) kb_mean[c] += kb_prefix.at(r, c);
  for (auto& v : kb_mean) v /= static_cast<double>(kb_prefix.rows());

  DecodeResult res;
  res.probabilities = Matrix(sentence_len, p.dims.vocab_size);
  res.tokens.ids.resize(sentence_len);
  std::vector<double> logits(p.dims.vocab_size);
  for (size_t l = 0; l < sentence_len; ++l) {
    for (size_t vtok = 0; vtok < p.dims.vocab_size; ++vtok) {
      double s = 0.0;
      for (size_t c = 0; c < q; ++c)
        s += (features_hat.at(l, c) + kb_mean[c]) * p.out_proj.at(c, vtok);
      logits[vtok] = s;
    }
    double max_logit = logits[0];
    for (double z : logits) max_logit = std::max(max_logit, z);
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - max_logit);
    uint32_t best = 0;
    for (size_t vtok = 0; vtok < p.dims.vocab_size; ++vtok) {
      const double prob = std::exp(logits[vtok] - max_logit) / denom;
      res.probabilities.at(l, vtok) = prob;
      if (prob > res.probabilities.at(l, best)) best = static_cast<uint32_t>(vtok);
    }
    res.tokens.ids[l] = best;
  }
  return res;
}

double ce_loss(const Sentence& original, const Matrix& probabilities) {
  if (original.size() != probabilities.rows())
    throw ShapeMismatchError("probability rows must match sentence length");
  double loss = 0.0;
  for (size_t l = 0; l < original.size(); ++l) {
    for (size_t v = 0; v < probabilities.cols(); ++v) {
      const double p = std::clamp(probabilities.at(l, v), kProbClamp, 1.0 - kProbClamp);
      const double q = (original.ids[l] == v) ? 1.0 : 0.0;
      loss -= q * std::log(p) + (1.0 - q) * std::log(1.0 - p);
    }
  }
  return loss;
}

double categorical_ce_loss(const Sentence& original, const Matrix& probabilities) {
  if (original.size() != probabilities.rows())
    throw ShapeMismatchError("probability rows must match sentence length");
  double loss = 0.0;
  for (size_t l = 0; l < original.size(); ++l) {
    if (original.ids[l] >= probabilities.cols())
      throw UnknownTokenError("token id out of vocabulary");
    const double p = std::clamp(probabilities.at(l, original.ids[l]), kProbClamp,
                                1.0 - kProbClamp);
    loss -= std::log(p);
  }
  return loss;
}

double mse_loss(const Matrix& f, const Matrix& f_hat) {
  if (!f.same_shape(f_hat)) throw ShapeMismatchError("mse_loss blocks differ in shape");
  double s = 0.0;
  for (size_t i = 0; i < f.values().size(); ++i) {
    const double d = f.values()[i] - f_hat.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double kb_gram_penalty(const Matrix& kb) {
  return frobenius_norm(matmul_tn(kb, kb));
}

double kb_loss(const Sentence& original, const Matrix& probabilities, const Matrix& kb) {
  return ce_loss(original, probabilities) + kb_gram_penalty(kb);
}

double total_loss(double ce, double mse, double kb) { return ce + mse + kb; }

// --- serialization ----------------------------------------------------------

namespace {

constexpr uint8_t kModelMagic[4] = {'S', 'K', 'B', '1'};
constexpr uint8_t kKbMagic[4] = {'S', 'K', 'B', 'K'};

void write_matrix(ByteWriter& w, const Matrix& m) {
  for (double v : m.values()) w.f64(v);
}

void write_vector(ByteWriter& w, const std::vector<double>& v) {
  for (double x : v) w.f64(x);
}

Matrix read_matrix(ByteReader& r, size_t rows, size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = r.f64();
  return m;
}

std::vector<double> read_vector(ByteReader& r, size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

}  // namespace

std::vector<uint8_t> serialize_model(const CodecParams& p) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(p.dims.vocab_size);
  w.u32(p.dims.feature_dim);
  w.u32(p.dims.kb_vectors);
  w.u32(p.dims.channel_dim);
  write_matrix(w, p.embedding);
  write_matrix(w, p.sem_weight);
  write_vector(w, p.sem_bias);
  write_matrix(w, p.chan_enc);
  write_matrix(w, p.chan_dec);
  write_vector(w, p.chan_dec_bias);
  write_matrix(w, p.out_proj);
  write_matrix(w, p.kb);
  return w.take();
}

CodecParams parse_model(std::span<const uint8_t> blob) {
  try {
    ByteReader r(blob);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kModelMagic))
      throw MalformedBlobError("bad model magic");
    CodecParams p;
    p.dims.vocab_size = r.u32();
    p.dims.feature_dim = r.u32();
    p.dims.kb_vectors = r.u32();
    p.dims.channel_dim = r.u32();
    if (p.dims.vocab_size == 0 || p.dims.feature_dim == 0 || p.dims.kb_vectors == 0 ||
        p.dims.channel_dim == 0 || p.dims.channel_dim % 2 != 0)
      throw MalformedBlobError("bad model dims");
    const size_t v = p.dims.vocab_size, q = p.dims.feature_dim;
    const size_t kb = p.dims.kb_vectors, d = p.dims.channel_dim;
    // Guard against length-field corruption before allocating.
    if (blob.size() != model_blob_size(p.dims))
      throw MalformedBlobError("model blob length mismatch");
    p.embedding = read_matrix(r, v, q);
    p.sem_weight = read_matrix(r, q, q);
    p.sem_bias = read_vector(r, q);
    p.chan_enc = read_matrix(r, q, d);
    p.chan_dec = read_matrix(r, d, q);
    p.chan_dec_bias = read_vector(r, q);
    p.out_proj = read_matrix(r, q, v);
    p.kb = read_matrix(r, kb, q);
    r.expect_end();
    ByteReader scan(blob.subspan(4 + 4 * 4));
    while (scan.remaining() >= 8)
      if (!std::isfinite(scan.f64())) throw MalformedBlobError("non-finite model entry");
    return p;
  } catch (const DecodeError& e) {
    throw MalformedBlobError(e.what());
  }
}

std::vector<uint8_t> serialize_kb(const Matrix& kb) {
  ByteWriter w;
  w.raw(kKbMagic);
  w.u32(static_cast<uint32_t>(kb.rows()));
  w.u32(static_cast<uint32_t>(kb.cols()));
  write_matrix(w, kb);
  return w.take();
}

Matrix parse_kb(std::span<const uint8_t> blob) {
  try {
    ByteReader r(blob);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kKbMagic))
      throw MalformedBlobError("bad knowledge-base magic");
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    if (rows == 0 || cols == 0 || blob.size() != kb_blob_size(rows, cols))
      throw MalformedBlobError("knowledge-base blob length mismatch");
    Matrix kb = read_matrix(r, rows, cols);
    r.expect_end();
    for (double x : kb.values())
      if (!std::isfinite(x)) throw MalformedBlobError("non-finite knowledge entry");
    return kb;
  } catch (const DecodeError& e) {
    throw MalformedBlobError(e.what());
  }
}

size_t model_blob_size(const CodecDims& dims) {
  const size_t v = dims.vocab_size, q = dims.feature_dim;
  const size_t kb = dims.kb_vectors, d = dims.channel_dim;
  const size_t floats =
      v * q + q * q + q + q * d + d * q + q + q * v + kb * q;
  return 4 + 4 * 4 + 8 * floats;
}

size_t kb_blob_size(uint32_t kb_vectors, uint32_t feature_dim) {
  return 4 + 4 * 2 + 8 * static_cast<size_t>(kb_vectors) * feature_dim;
}

}  // namespace semcom::codec
