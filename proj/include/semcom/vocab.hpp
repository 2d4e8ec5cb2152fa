#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace semcom::codec {

struct Sentence {
  std::vector<uint32_t> ids;

  size_t size() const { return ids.size(); }
  bool operator==(const Sentence&) const = default;
};

// Whitespace token <-> id mapping with the four reserved ids up front.
class Vocabulary {
 public:
  static constexpr uint32_t kPad = 0;
  static constexpr uint32_t kStart = 1;
  static constexpr uint32_t kEnd = 2;
  static constexpr uint32_t kUnknown = 3;

  Vocabulary();

  static Vocabulary from_corpus(std::span<const std::string> lines);

  uint32_t size() const { return static_cast<uint32_t>(tokens_.size()); }

  // kUnknown for tokens not in the vocabulary.
  uint32_t id(const std::string& token) const;
  const std::string& token(uint32_t id) const;

  Sentence tokenize(const std::string& line) const;
  std::string detokenize(const Sentence& s) const;

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, uint32_t> index_;
};

// The bundled 50-sentence training corpus (English-like and French-like word
// lists, whitespace tokenized).
std::span<const std::string> bundled_corpus();

}  // namespace semcom::codec
