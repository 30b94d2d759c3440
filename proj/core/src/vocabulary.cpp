#include "tailorsum/vocabulary.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tailorsum {

bool is_control_surface(std::string_view token) {
  return token.size() >= 3 && token.front() == '<' && token.back() == '>';
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnkToken);
  add(kStartToken);
  add(kStopToken);
}

TokenId Vocabulary::add(std::string_view token) {
  if (token.empty()) throw std::invalid_argument("vocabulary: empty token");
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const TokenId id = tokens_.size();
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  return find(token).value_or(kUnkId);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

bool Vocabulary::is_control(TokenId id) const {
  return id >= kReservedCount && id < tokens_.size() && is_control_surface(tokens_[id]);
}

std::vector<TokenId> Vocabulary::control_ids() const {
  std::vector<TokenId> out;
  for (TokenId id = kReservedCount; id < tokens_.size(); ++id) {
    if (is_control(id)) out.push_back(id);
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    out += tokens_[id];
    out += '\t';
    out += std::to_string(id);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw std::runtime_error("vocabulary line " + std::to_string(line_no) +
                               ": expected token<TAB>id");
    }
    const std::string id_text(line.substr(tab + 1));
    std::size_t parsed = 0;
    const unsigned long long id = std::stoull(id_text, &parsed);
    if (parsed != id_text.size() || id != tokens.size()) {
      throw std::runtime_error("vocabulary line " + std::to_string(line_no) +
                               ": ids must be consecutive from 0");
    }
    tokens.emplace_back(line.substr(0, tab));
  }
  const std::string_view reserved[] = {kPadToken, kUnkToken, kStartToken, kStopToken};
  if (tokens.size() < kReservedCount) throw std::runtime_error("vocabulary: missing reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != reserved[i]) {
      throw std::runtime_error("vocabulary: reserved id " + std::to_string(i) + " must be " +
                               std::string(reserved[i]));
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
    if (vocab.find(tokens[i])) throw std::runtime_error("vocabulary: duplicate token " + tokens[i]);
    vocab.add(tokens[i]);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

ExtendedVocab::ExtendedVocab(const Vocabulary& base, std::span<const std::string> article)
    : base_(&base) {
  for (const auto& word : article) {
    if (base.find(word) || oov_ids_.contains(word)) continue;
    oov_ids_.emplace(word, base.size() + oov_.size());
    oov_.push_back(word);
  }
}

std::optional<TokenId> ExtendedVocab::find(std::string_view token) const {
  if (auto id = base_->find(token)) return id;
  auto it = oov_ids_.find(std::string(token));
  if (it == oov_ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& ExtendedVocab::token(TokenId id) const {
  if (id < base_->size()) return base_->token(id);
  const std::size_t k = id - base_->size();
  if (k >= oov_.size()) {
    throw std::out_of_range("extended vocabulary: id " + std::to_string(id) + " out of range");
  }
  return oov_[k];
}

}  // namespace tailorsum
