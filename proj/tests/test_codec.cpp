#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "semcom/codec.hpp"
#include "semcom/errors.hpp"
#include "semcom/vocab.hpp"

using namespace semcom;
using namespace semcom::codec;

namespace {

CodecParams small_params(uint64_t seed = 1) {
  Rng rng(seed);
  return CodecParams::random_init({8, 4, 3, 4}, rng);
}

}  // namespace

TEST_CASE("vocabulary reserves the four special ids") {
  const auto vocab = Vocabulary::from_corpus(bundled_corpus());
  CHECK(vocab.id("<pad>") == Vocabulary::kPad);
  CHECK(vocab.id("<start>") == Vocabulary::kStart);
  CHECK(vocab.id("<end>") == Vocabulary::kEnd);
  CHECK(vocab.id("<unk>") == Vocabulary::kUnknown);
  CHECK(vocab.id("definitely-not-a-token") == Vocabulary::kUnknown);
  CHECK(vocab.size() > 50);

  const Sentence s = vocab.tokenize("the sensor sends a short report");
  CHECK(s.size() == 6);
  CHECK(vocab.detokenize(s) == "the sensor sends a short report");
}

TEST_CASE("embed looks rows up and rejects bad ids") {
  const auto p = small_params();
  Sentence one{{5}};
  const Matrix e = embed(one, p);
  REQUIRE(e.rows() == 1);
  for (size_t c = 0; c < 4; ++c) CHECK(e.at(0, c) == p.embedding.at(5, c));

  Sentence repeated{{2, 2, 2}};
  const Matrix r = embed(repeated, p);
  for (size_t c = 0; c < 4; ++c) {
    CHECK(r.at(0, c) == r.at(1, c));
    CHECK(r.at(1, c) == r.at(2, c));
  }

  CHECK_THROWS_AS(embed(Sentence{{8}}, p), UnknownTokenError);
  CHECK_THROWS_AS(embed(Sentence{{}}, p), EmptySentenceError);
}

TEST_CASE("embedding shape over the whole corpus") {
  const auto vocab = Vocabulary::from_corpus(bundled_corpus());
  Rng rng(3);
  const auto p = CodecParams::random_init({vocab.size(), 6, 2, 4}, rng);
  for (const auto& line : bundled_corpus()) {
    const Sentence s = vocab.tokenize(line);
    const Matrix e = embed(s, p);
    CHECK(e.rows() == s.size());
    CHECK(e.cols() == 6);
  }
}

TEST_CASE("semantic_encode stacks tokens and knowledge rows") {
  auto p = small_params();
  Sentence s{{1, 2}};
  const Matrix e = embed(s, p);

  SUBCASE("zero weights give tanh(0) = 0") {
    p.sem_weight = Matrix(4, 4);
    p.sem_bias.assign(4, 0.0);
    const Matrix f = semantic_encode(e, p.kb.prefix_rows(2), p);
    for (double v : f.values()) CHECK(v == 0.0);
  }

  SUBCASE("full prefix keeps L + P rows") {
    const Matrix f = semantic_encode(e, p.kb.prefix_rows(3), p);
    CHECK(f.rows() == 5);
    CHECK(f.cols() == 4);
  }

  SUBCASE("prefix below two is rejected") {
    CHECK_THROWS_AS(semantic_encode(e, p.kb.prefix_rows(1), p), PrefixTooSmallError);
  }

  SUBCASE("bit-identical across runs") {
    const Matrix a = semantic_encode(e, p.kb.prefix_rows(2), p);
    const Matrix b = semantic_encode(e, p.kb.prefix_rows(2), p);
    CHECK(a.values() == b.values());
  }
}

TEST_CASE("channel_encode pairs reals and normalizes") {
  Rng rng(2);
  auto p = CodecParams::random_init({8, 4, 2, 2}, rng);  // d = 2: one symbol/row
  Matrix one_row(1, 4);
  for (size_t c = 0; c < 4; ++c) one_row.at(0, c) = 0.3 + 0.1 * static_cast<double>(c);
  const auto sig = channel_encode(one_row, p);
  CHECK(sig.size() == 1);
  CHECK(signal::mean_symbol_power(sig) == doctest::Approx(1.0).epsilon(1e-9));

  auto p4 = small_params();
  Matrix rows(5, 4, 0.25);
  const auto sig4 = channel_encode(rows, p4);
  CHECK(sig4.size() == 5 * 4 / 2);
  CHECK(signal::mean_symbol_power(sig4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("channel_decode reshapes and applies bias") {
  auto p = small_params();
  p.chan_dec_bias = {0.5, -1.0, 0.25, 2.0};

  signal::ComplexSignal zeros;
  zeros.symbols.assign(6, {0.0, 0.0});  // 3 rows at d = 4
  const Matrix out = channel_decode(zeros, 3, p);
  REQUIRE(out.rows() == 3);
  for (size_t r = 0; r < 3; ++r)
    for (size_t c = 0; c < 4; ++c) CHECK(out.at(r, c) == p.chan_dec_bias[c]);

  CHECK_THROWS_AS(channel_decode(zeros, 2, p), ShapeMismatchError);
}

TEST_CASE("semantic_decode produces normalized rows and argmax tokens") {
  auto p = small_params();
  Sentence s{{1, 2, 3}};
  Matrix f_hat(5, 4, 0.1);

  SUBCASE("zero projection gives the uniform distribution") {
    p.out_proj = Matrix(4, 8);
    const auto res = semantic_decode(f_hat, 3, p.kb.prefix_rows(2), p);
    for (size_t l = 0; l < 3; ++l)
      for (size_t v = 0; v < 8; ++v)
        CHECK(res.probabilities.at(l, v) == doctest::Approx(1.0 / 8).epsilon(1e-12));
  }

  SUBCASE("probability rows sum to one") {
    const auto res = semantic_decode(f_hat, 3, p.kb.prefix_rows(3), p);
    for (size_t l = 0; l < 3; ++l) {
      double sum = 0.0;
      for (size_t v = 0; v < 8; ++v) sum += res.probabilities.at(l, v);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(res.tokens.size() == 3);
  }

  SUBCASE("an empty knowledge prefix is rejected") {
    CHECK_THROWS_AS(semantic_decode(f_hat, 3, Matrix(0, 4), p), EmptyKbError);
  }

  SUBCASE("fewer feature rows than positions is rejected") {
    CHECK_THROWS_AS(semantic_decode(Matrix(2, 4), 3, p.kb.prefix_rows(2), p),
                    ShapeMismatchError);
  }
}

TEST_CASE("prune_kb keeps importance-ordered prefixes") {
  KnowledgeBase kb{"task", Matrix(5, 3)};
  for (size_t r = 0; r < 5; ++r)
    for (size_t c = 0; c < 3; ++c) kb.vectors.at(r, c) = static_cast<double>(r * 10 + c);

  const auto full = prune_kb(kb, 5);
  CHECK(full.vectors.values() == kb.vectors.values());

  const auto two = prune_kb(kb, 2);
  CHECK(two.vectors.rows() == 2);
  CHECK(two.vectors.at(1, 2) == 12.0);

  const auto composed = prune_kb(prune_kb(kb, 4), 3);
  const auto direct = prune_kb(kb, 3);
  CHECK(composed.vectors.values() == direct.vectors.values());

  CHECK_THROWS_AS(prune_kb(kb, 1), OutOfRangeError);
  CHECK_THROWS_AS(prune_kb(kb, 6), OutOfRangeError);
}

TEST_CASE("prune_features keeps leading rows") {
  Matrix f(4, 3);
  for (size_t r = 0; r < 4; ++r)
    for (size_t c = 0; c < 3; ++c) f.at(r, c) = static_cast<double>(r + 1);

  CHECK(prune_features(f, 4).values() == f.values());
  CHECK(prune_features(f, 0).rows() == 0);
  CHECK(prune_features(f, 2).rows() == 2);
  CHECK_THROWS_AS(prune_features(f, 5), OutOfRangeError);
}

TEST_CASE("ce_loss matches the printed binary form") {
  SUBCASE("perfect prediction is (numerically) zero") {
    Sentence s{{0}};
    Matrix probs(1, 2);
    probs.at(0, 0) = 1.0;
    probs.at(0, 1) = 0.0;
    CHECK(ce_loss(s, probs) < 1e-9);
  }

  SUBCASE("single position at one half") {
    Sentence s{{0}};
    Matrix probs(1, 1);
    probs.at(0, 0) = 0.5;
    CHECK(ce_loss(s, probs) == doctest::Approx(0.6931471805599453).epsilon(1e-10));
  }

  SUBCASE("matches the scalar-loop oracle on random inputs") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const size_t len = 1 + rng.below(5);
      const size_t vocab = 2 + rng.below(7);
      Sentence s;
      Matrix probs(len, vocab);
      for (size_t l = 0; l < len; ++l) {
        s.ids.push_back(static_cast<uint32_t>(rng.below(vocab)));
        double sum = 0.0;
        for (size_t v = 0; v < vocab; ++v) {
          probs.at(l, v) = rng.uniform_pos();
          sum += probs.at(l, v);
        }
        for (size_t v = 0; v < vocab; ++v) probs.at(l, v) /= sum;
      }
      CHECK(ce_loss(s, probs) == doctest::Approx(oracles::scalar_ce(s, probs)).epsilon(1e-10));
    }
  }
}

TEST_CASE("mse_loss is the Frobenius norm of the difference") {
  Matrix a(1, 2), b(1, 2);
  CHECK(mse_loss(a, b) == 0.0);
  a.at(0, 0) = 3.0;
  a.at(0, 1) = 4.0;
  CHECK(mse_loss(a, b) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(mse_loss(b, a) >= 0.0);
  CHECK_THROWS_AS(mse_loss(a, Matrix(2, 2)), ShapeMismatchError);
}

TEST_CASE("kb_loss adds the Gram-matrix penalty") {
  Sentence s{{0}};
  Matrix probs(1, 2);
  probs.at(0, 0) = 0.7;
  probs.at(0, 1) = 0.3;

  Matrix zero_kb(2, 2);
  CHECK(kb_gram_penalty(zero_kb) == 0.0);
  CHECK(kb_loss(s, probs, zero_kb) == doctest::Approx(ce_loss(s, probs)));

  Matrix eye(2, 2);
  eye.at(0, 0) = 1.0;
  eye.at(1, 1) = 1.0;
  CHECK(kb_gram_penalty(eye) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(kb_loss(s, probs, eye) >= ce_loss(s, probs));
}

TEST_CASE("total_loss is the plain sum") {
  CHECK(total_loss(0.0, 0.0, 0.0) == 0.0);
  CHECK(total_loss(1.25, 0.5, 2.0) == doctest::Approx(3.75));
}

TEST_CASE("model serialization round trips bit-exactly") {
  Rng rng(31);
  const auto p = CodecParams::random_init({9, 5, 4, 6}, rng);
  const auto blob = serialize_model(p);
  CHECK(blob.size() == model_blob_size(p.dims));

  const auto q = parse_model(blob);
  CHECK(q.dims == p.dims);
  CHECK(q.embedding.values() == p.embedding.values());
  CHECK(q.sem_weight.values() == p.sem_weight.values());
  CHECK(q.sem_bias == p.sem_bias);
  CHECK(q.chan_enc.values() == p.chan_enc.values());
  CHECK(q.chan_dec.values() == p.chan_dec.values());
  CHECK(q.chan_dec_bias == p.chan_dec_bias);
  CHECK(q.out_proj.values() == p.out_proj.values());
  CHECK(q.kb.values() == p.kb.values());
  CHECK(serialize_model(q) == blob);

  auto corrupt = blob;
  corrupt[0] ^= 0xFF;
  CHECK_THROWS_AS(parse_model(corrupt), MalformedBlobError);
  auto truncated = blob;
  truncated.pop_back();
  CHECK_THROWS_AS(parse_model(truncated), MalformedBlobError);
}

TEST_CASE("knowledge-base blobs round trip") {
  Rng rng(37);
  Matrix kb(4, 7);
  for (auto& v : kb.values()) v = rng.gaussian();
  const auto blob = serialize_kb(kb);
  CHECK(blob.size() == kb_blob_size(4, 7));
  const Matrix back = parse_kb(blob);
  CHECK(back.values() == kb.values());
  CHECK(back.rows() == 4);

  auto corrupt = blob;
  corrupt[5] ^= 0x01;  // dims field
  CHECK_THROWS_AS(parse_kb(corrupt), MalformedBlobError);
}
