#include "semcom/train.hpp"

#include <cmath>
#include <limits>

#include "semcom/errors.hpp"

namespace semcom::codec {

namespace {

struct LossWeights {
  double ce = 0.0;
  double mse = 0.0;
  double gram = 0.0;
};

LossWeights weights_for(TrainKind kind, bool kb_plain_ce) {
  switch (kind) {
    case TrainKind::Semantic:
      return {1.0, 0.0, 0.0};
    case TrainKind::Channel:
      return {0.0, 1.0, 0.0};
    case TrainKind::KnowledgeBase:
      return {1.0, 0.0, kb_plain_ce ? 0.0 : 1.0};
    case TrainKind::Whole:
      // ce + mse + (ce + gram)
      return {2.0, 1.0, 1.0};
  }
  throw Error("unreachable train kind");
}

std::vector<double> gaussian_vector(size_t n, double sigma, Rng& rng) {
  std::vector<double> v(n, 0.0);
  if (sigma > 0.0)
    for (auto& x : v) x = sigma * rng.gaussian();
  return v;
}

}  // namespace

SentencePlan draw_sentence_plan(size_t feature_prefix, uint32_t channel_dim,
                                const signal::ChannelModel& model, double snr_db,
                                Rng& rng, double dp_sigma) {
  SentencePlan plan;
  plan.feature_prefix = feature_prefix;
  plan.gain = signal::draw_gain(model, rng);
  const double n0 = signal::snr_db_to_noise_power(snr_db);
  plan.noise_sigma = std::sqrt(n0 / 2.0);
  const size_t reals = feature_prefix * channel_dim;
  plan.dp_sigma = dp_sigma;
  plan.dp_noise = gaussian_vector(dp_sigma > 0.0 ? reals : 0, dp_sigma, rng);
  plan.channel_noise = gaussian_vector(reals, plan.noise_sigma, rng);
  return plan;
}

BatchPlan draw_random_prune_plan(std::span<const Sentence> batch,
                                 const CodecParams& params,
                                 const signal::ChannelModel& model, double snr_db,
                                 Rng& rng) {
  BatchPlan plan;
  plan.kb_prefix = static_cast<size_t>(rng.range(2, params.dims.kb_vectors));
  plan.sentences.reserve(batch.size());
  for (const auto& s : batch) {
    const size_t rows = s.size() + plan.kb_prefix;
    const size_t j = static_cast<size_t>(rng.range(0, static_cast<int64_t>(rows)));
    plan.sentences.push_back(
        draw_sentence_plan(j, params.dims.channel_dim, model, snr_db, rng));
  }
  return plan;
}

BatchPlan fixed_plan(std::span<const Sentence> batch, const CodecParams& params,
                     size_t kb_prefix, double feature_keep_fraction,
                     const signal::ChannelModel& model, double snr_db, Rng& rng,
                     double dp_sigma) {
  if (kb_prefix < 2 || kb_prefix > params.dims.kb_vectors)
    throw OutOfRangeError("knowledge prefix must be in [2, P]");
  BatchPlan plan;
  plan.kb_prefix = kb_prefix;
  plan.sentences.reserve(batch.size());
  for (const auto& s : batch) {
    const size_t rows = s.size() + kb_prefix;
    auto j = static_cast<size_t>(
        std::llround(feature_keep_fraction * static_cast<double>(rows)));
    j = std::min(j, rows);
    plan.sentences.push_back(
        draw_sentence_plan(j, params.dims.channel_dim, model, snr_db, rng, dp_sigma));
  }
  return plan;
}

ForwardTrace run_forward(const Sentence& s, const CodecParams& params,
                         size_t kb_prefix, const SentencePlan& plan) {
  if (kb_prefix < 2 || kb_prefix > params.dims.kb_vectors)
    throw OutOfRangeError("knowledge prefix must be in [2, P]");
  ForwardTrace t;
  t.sentence_len = s.size();
  t.kb_prefix = kb_prefix;
  t.feature_prefix = plan.feature_prefix;

  t.embedded = embed(s, params);
  const Matrix kb_rows = params.kb.prefix_rows(kb_prefix);
  t.features = semantic_encode(t.embedded, kb_rows, params);
  const size_t n_rows = t.features.rows();
  if (plan.feature_prefix > n_rows)
    throw OutOfRangeError("feature prefix exceeds block height");

  // Rebuild the stacked input; semantic_encode consumed it internally.
  t.stacked = Matrix(n_rows, params.dims.feature_dim);
  for (size_t r = 0; r < t.embedded.rows(); ++r) {
    auto src = t.embedded.row(r);
    std::copy(src.begin(), src.end(), t.stacked.row(r).begin());
  }
  for (size_t r = 0; r < kb_prefix; ++r) {
    auto src = kb_rows.row(r);
    std::copy(src.begin(), src.end(), t.stacked.row(t.embedded.rows() + r).begin());
  }

  const size_t j = plan.feature_prefix;
  const size_t d = params.dims.channel_dim;
  const size_t q = params.dims.feature_dim;

  t.features_hat = Matrix(n_rows, q);
  for (size_t r = 0; r < n_rows; ++r)
    for (size_t c = 0; c < q; ++c) t.features_hat.at(r, c) = params.chan_dec_bias[c];

  if (j > 0) {
    t.encoded = matmul(t.features.prefix_rows(j), params.chan_enc);
    const auto& g = t.encoded.values();
    t.g_norm2 = 0.0;
    for (double v : g) t.g_norm2 += v * v;
    if (t.g_norm2 <= 0.0) throw ZeroPowerError("encoded block has zero power");
    const double symbols = static_cast<double>(j * d) / 2.0;
    t.norm_scale = std::sqrt(symbols / t.g_norm2);

    t.transmitted.resize(j * d);
    for (size_t a = 0; a < g.size(); ++a) t.transmitted[a] = t.norm_scale * g[a];
    if (plan.dp_sigma > 0.0) {
      if (plan.dp_noise.size() != t.transmitted.size())
        throw ShapeMismatchError("privacy noise length mismatch");
      for (size_t a = 0; a < t.transmitted.size(); ++a)
        t.transmitted[a] += plan.dp_noise[a];
    }

    if (plan.channel_noise.size() != t.transmitted.size())
      throw ShapeMismatchError("channel noise length mismatch");
    if (std::abs(plan.gain) < 1e-12) throw SingularGainError("channel gain too small");
    t.equalized.resize(j * d);
    for (size_t m = 0; m < j * d / 2; ++m) {
      const std::complex<double> noise{plan.channel_noise[2 * m],
                                       plan.channel_noise[2 * m + 1]};
      const std::complex<double> eta = noise / plan.gain;
      t.equalized[2 * m] = t.transmitted[2 * m] + eta.real();
      t.equalized[2 * m + 1] = t.transmitted[2 * m + 1] + eta.imag();
    }

    // Linear decode of the j received rows; padding rows keep the bias.
    Matrix reals(j, d);
    std::copy(t.equalized.begin(), t.equalized.end(), reals.values().begin());
    Matrix head = matmul(reals, params.chan_dec);
    for (size_t r = 0; r < j; ++r)
      for (size_t c = 0; c < q; ++c)
        t.features_hat.at(r, c) = head.at(r, c) + params.chan_dec_bias[c];
  }

  t.decoded = semantic_decode(t.features_hat, s.size(), kb_rows, params);
  t.ce = ce_loss(s, t.decoded.probabilities);
  t.mse = mse_loss(t.features, t.features_hat);
  return t;
}

CodecGrads CodecGrads::zeros(const CodecDims& dims) {
  CodecGrads g;
  g.embedding = Matrix(dims.vocab_size, dims.feature_dim);
  g.sem_weight = Matrix(dims.feature_dim, dims.feature_dim);
  g.sem_bias.assign(dims.feature_dim, 0.0);
  g.chan_enc = Matrix(dims.feature_dim, dims.channel_dim);
  g.chan_dec = Matrix(dims.channel_dim, dims.feature_dim);
  g.chan_dec_bias.assign(dims.feature_dim, 0.0);
  g.out_proj = Matrix(dims.feature_dim, dims.vocab_size);
  g.kb = Matrix(dims.kb_vectors, dims.feature_dim);
  return g;
}

namespace {

// Backward pass for one sentence. w_ce / w_mse already include the 1/batch
// factor. Mirrors run_forward step by step, in reverse.
void accumulate_grads(const Sentence& s, const CodecParams& params,
                      const SentencePlan& plan, const ForwardTrace& t, double w_ce,
                      double w_mse, CodecGrads& grads) {
  const size_t L = t.sentence_len;
  const size_t i = t.kb_prefix;
  const size_t j = t.feature_prefix;
  const size_t q = params.dims.feature_dim;
  const size_t v_sz = params.dims.vocab_size;
  const size_t d = params.dims.channel_dim;
  const size_t n_rows = t.features.rows();

  std::vector<double> kb_mean(q, 0.0);
  for (size_t r = 0; r < i; ++r)
    for (size_t c = 0; c < q; ++c) kb_mean[c] += params.kb.at(r, c);
  for (auto& x : kb_mean) x /= static_cast<double>(i);

  Matrix d_fhat(n_rows, q);
  std::vector<double> d_kb_mean(q, 0.0);

  if (w_ce != 0.0) {
    std::vector<double> dp(v_sz), dz(v_sz);
    for (size_t l = 0; l < L; ++l) {
      double dot = 0.0;
      for (size_t v = 0; v < v_sz; ++v) {
        const double p = t.decoded.probabilities.at(l, v);
        if (p <= kProbClamp || p >= 1.0 - kProbClamp) {
          dp[v] = 0.0;  // clamped region: flat in p
        } else {
          const double qv = (s.ids[l] == v) ? 1.0 : 0.0;
          dp[v] = w_ce * (-qv / p + (1.0 - qv) / (1.0 - p));
        }
        dot += dp[v] * p;
      }
      for (size_t v = 0; v < v_sz; ++v)
        dz[v] = t.decoded.probabilities.at(l, v) * (dp[v] - dot);

      for (size_t c = 0; c < q; ++c) {
        const double t_c = t.features_hat.at(l, c) + kb_mean[c];
        double dt_c = 0.0;
        for (size_t v = 0; v < v_sz; ++v) {
          grads.out_proj.at(c, v) += t_c * dz[v];
          dt_c += params.out_proj.at(c, v) * dz[v];
        }
        d_kb_mean[c] += dt_c;
        d_fhat.at(l, c) += dt_c;
      }
    }
  }

  Matrix d_features(n_rows, q);
  if (w_mse != 0.0 && t.mse > 0.0) {
    const double coeff = w_mse / t.mse;
    for (size_t r = 0; r < n_rows; ++r)
      for (size_t c = 0; c < q; ++c) {
        const double diff = t.features.at(r, c) - t.features_hat.at(r, c);
        d_features.at(r, c) += coeff * diff;
        d_fhat.at(r, c) -= coeff * diff;
      }
  }

  for (size_t r = 0; r < i; ++r)
    for (size_t c = 0; c < q; ++c)
      grads.kb.at(r, c) += d_kb_mean[c] / static_cast<double>(i);

  // Padding rows are the decoder bias verbatim.
  for (size_t r = j; r < n_rows; ++r)
    for (size_t c = 0; c < q; ++c) grads.chan_dec_bias[c] += d_fhat.at(r, c);

  if (j > 0) {
    Matrix reals(j, d);
    std::copy(t.equalized.begin(), t.equalized.end(), reals.values().begin());

    Matrix d_r(j, d);
    for (size_t r = 0; r < j; ++r)
      for (size_t c = 0; c < q; ++c) {
        const double df = d_fhat.at(r, c);
        if (df == 0.0) continue;
        grads.chan_dec_bias[c] += df;
        for (size_t dc = 0; dc < d; ++dc) {
          grads.chan_dec.at(dc, c) += reals.at(r, dc) * df;
          d_r.at(r, dc) += df * params.chan_dec.at(dc, c);
        }
      }

    // Through the power normalization: x = c * g with c = sqrt(K)/||g||.
    const auto& g = t.encoded.values();
    const auto& du = d_r.values();
    double du_dot_g = 0.0;
    for (size_t a = 0; a < g.size(); ++a) du_dot_g += du[a] * g[a];
    Matrix d_g(j, d);
    for (size_t a = 0; a < g.size(); ++a)
      d_g.values()[a] = t.norm_scale * (du[a] - g[a] * du_dot_g / t.g_norm2);

    for (size_t r = 0; r < j; ++r)
      for (size_t c = 0; c < q; ++c) {
        double acc = 0.0;
        for (size_t dc = 0; dc < d; ++dc) {
          grads.chan_enc.at(c, dc) += t.features.at(r, c) * d_g.at(r, dc);
          acc += d_g.at(r, dc) * params.chan_enc.at(c, dc);
        }
        d_features.at(r, c) += acc;
      }
  }

  // tanh layer and the stacked input.
  for (size_t r = 0; r < n_rows; ++r) {
    for (size_t c = 0; c < q; ++c) {
      const double f = t.features.at(r, c);
      const double da = d_features.at(r, c) * (1.0 - f * f);
      if (da == 0.0) continue;
      grads.sem_bias[c] += da;
      for (size_t c1 = 0; c1 < q; ++c1) {
        grads.sem_weight.at(c1, c) += t.stacked.at(r, c1) * da;
        const double dz = da * params.sem_weight.at(c1, c);
        if (r < L)
          grads.embedding.at(s.ids[r], c1) += dz;
        else
          grads.kb.at(r - L, c1) += dz;
      }
    }
  }
  (void)plan;
}

void add_gram_grad(const CodecParams& params, double w_gram, CodecGrads& grads) {
  if (w_gram == 0.0) return;
  Matrix gram = matmul_tn(params.kb, params.kb);
  const double nrm = frobenius_norm(gram);
  if (nrm <= 0.0) return;
  Matrix kg = matmul(params.kb, gram);
  add_scaled(grads.kb, kg, 2.0 * w_gram / nrm);
}

}  // namespace

double plan_loss(const CodecParams& params, std::span<const Sentence> batch,
                 const BatchPlan& plan, TrainKind kind, bool kb_plain_ce) {
  if (batch.empty()) throw EmptyInputError("empty batch");
  if (plan.sentences.size() != batch.size())
    throw ShapeMismatchError("plan does not cover the batch");
  const LossWeights w = weights_for(kind, kb_plain_ce);
  double acc = 0.0;
  for (size_t n = 0; n < batch.size(); ++n) {
    const ForwardTrace t = run_forward(batch[n], params, plan.kb_prefix, plan.sentences[n]);
    acc += w.ce * t.ce + w.mse * t.mse;
  }
  double loss = acc / static_cast<double>(batch.size());
  if (w.gram != 0.0) loss += w.gram * kb_gram_penalty(params.kb);
  return loss;
}

CodecGrads plan_grads(const CodecParams& params, std::span<const Sentence> batch,
                      const BatchPlan& plan, TrainKind kind, bool kb_plain_ce) {
  if (batch.empty()) throw EmptyInputError("empty batch");
  if (plan.sentences.size() != batch.size())
    throw ShapeMismatchError("plan does not cover the batch");
  const LossWeights w = weights_for(kind, kb_plain_ce);
  const double scale = 1.0 / static_cast<double>(batch.size());
  CodecGrads grads = CodecGrads::zeros(params.dims);
  for (size_t n = 0; n < batch.size(); ++n) {
    const ForwardTrace t = run_forward(batch[n], params, plan.kb_prefix, plan.sentences[n]);
    accumulate_grads(batch[n], params, plan.sentences[n], t, w.ce * scale,
                     w.mse * scale, grads);
  }
  add_gram_grad(params, w.gram, grads);
  return grads;
}

namespace {

void axpy(std::vector<double>& dst, const std::vector<double>& src, double a) {
  for (size_t k = 0; k < dst.size(); ++k) dst[k] += a * src[k];
}

void apply_update(CodecParams& p, const CodecGrads& g, TrainKind kind, double lr) {
  const bool sem = kind == TrainKind::Semantic || kind == TrainKind::Whole;
  const bool chan = kind == TrainKind::Channel || kind == TrainKind::Whole;
  const bool kb = kind == TrainKind::KnowledgeBase || kind == TrainKind::Whole;
  if (sem) {
    add_scaled(p.embedding, g.embedding, -lr);
    add_scaled(p.sem_weight, g.sem_weight, -lr);
    axpy(p.sem_bias, g.sem_bias, -lr);
    add_scaled(p.out_proj, g.out_proj, -lr);
  }
  if (chan) {
    add_scaled(p.chan_enc, g.chan_enc, -lr);
    add_scaled(p.chan_dec, g.chan_dec, -lr);
    axpy(p.chan_dec_bias, g.chan_dec_bias, -lr);
  }
  if (kb) add_scaled(p.kb, g.kb, -lr);
}

}  // namespace

StepResult train_step(TrainKind kind, std::span<const Sentence> batch,
                      TrainState& state, double learning_rate) {
  if (learning_rate < 0.0) throw OutOfRangeError("learning rate must be >= 0");
  StepResult out;
  out.plan = draw_random_prune_plan(batch, state.params, state.channel,
                                    state.snr_db, state.rng);
  out.loss = plan_loss(state.params, batch, out.plan, kind, state.kb_step_plain_ce);
  if (!std::isfinite(out.loss)) throw NonFiniteLossError("training loss is not finite");
  if (learning_rate == 0.0) return out;
  const CodecGrads grads =
      plan_grads(state.params, batch, out.plan, kind, state.kb_step_plain_ce);
  apply_update(state.params, grads, kind, learning_rate);
  return out;
}

PruneForwardResult forward_random_prune(std::span<const Sentence> batch,
                                        const CodecParams& params,
                                        const signal::ChannelModel& model,
                                        double snr_db, Rng& rng) {
  PruneForwardResult res;
  res.plan = draw_random_prune_plan(batch, params, model, snr_db, rng);
  res.traces.reserve(batch.size());
  for (size_t n = 0; n < batch.size(); ++n)
    res.traces.push_back(
        run_forward(batch[n], params, res.plan.kb_prefix, res.plan.sentences[n]));
  return res;
}

}  // namespace semcom::codec
