#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tailorsum {

using TokenId = std::size_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kStartId = 2;
inline constexpr TokenId kStopId = 3;
inline constexpr std::size_t kReservedCount = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kStopToken = "<stop>";

// True for surface forms shaped like "<...>" (control and reserved tokens).
bool is_control_surface(std::string_view token);

// Token <-> id map. Ids 0..3 are PAD/UNK/START/STOP, registered control
// tokens follow in lexicographic order, then corpus words.
class Vocabulary {
 public:
  Vocabulary();

  // Appends `token` if absent and returns its id.
  TokenId add(std::string_view token);

  std::optional<TokenId> find(std::string_view token) const;
  // Unknown tokens map to kUnkId.
  TokenId id_or_unk(std::string_view token) const;
  const std::string& token(TokenId id) const;

  std::size_t size() const { return tokens_.size(); }
  bool is_control(TokenId id) const;
  std::vector<TokenId> control_ids() const;

  // "token<TAB>id" lines, ordered by id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// A per-example view that extends the base vocabulary with the article's
// out-of-vocabulary words, numbered V, V+1, ... in first-occurrence order.
class ExtendedVocab {
 public:
  ExtendedVocab(const Vocabulary& base, std::span<const std::string> article);

  std::size_t base_size() const { return base_->size(); }
  std::size_t size() const { return base_->size() + oov_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& oov_words() const { return oov_; }
  const Vocabulary& base() const { return *base_; }

 private:
  const Vocabulary* base_;
  std::vector<std::string> oov_;
  std::unordered_map<std::string, TokenId> oov_ids_;
};

}  // namespace tailorsum
