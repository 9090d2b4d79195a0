#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmt {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr int kFirstWordId = 4;

/// Token <-> id mapping. Ids 0..3 are PAD, UNK, BOS and EOS.
class Vocabulary {
 public:
  Vocabulary();

  /// Every distinct token of `corpus` in first-occurrence order, no cutoff.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus);

  /// Reads the one-token-per-line format whose first four lines are the
  /// reserved symbols.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const std::string& token) const { return index_.contains(token); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;

  std::vector<int> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  int add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Literal symbols for the reserved ids, in id order.
const std::vector<std::string>& reserved_symbols();

}  // namespace mmt
