#include "semcom/vocab.hpp"

#include <sstream>

#include "semcom/errors.hpp"

namespace semcom::codec {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<start>");
  add("<end>");
  add("<unk>");
}

void Vocabulary::add(const std::string& token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<uint32_t>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_corpus(std::span<const std::string> lines) {
  Vocabulary v;
  for (const auto& line : lines) {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) v.add(tok);
  }
  return v;
}

uint32_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(uint32_t id) const {
  if (id >= tokens_.size()) throw UnknownTokenError("token id out of range");
  return tokens_[id];
}

Sentence Vocabulary::tokenize(const std::string& line) const {
  Sentence s;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) s.ids.push_back(id(tok));
  return s;
}

std::string Vocabulary::detokenize(const Sentence& s) const {
  std::string out;
  for (size_t i = 0; i < s.ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += token(s.ids[i]);
  }
  return out;
}

}  // namespace semcom::codec
