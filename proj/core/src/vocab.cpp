#include "mmt/vocab.hpp"

#include <fstream>

#include "mmt/error.hpp"

namespace mmt {

const std::vector<std::string>& reserved_symbols() {
  static const std::vector<std::string> symbols = {"<pad>", "<unk>", "<bos>", "<eos>"};
  return symbols;
}

Vocabulary::Vocabulary() {
  for (const auto& s : reserved_symbols()) add(s);
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus) {
  if (corpus.empty()) throw Error(Errc::empty_input, "cannot build a vocabulary from an empty corpus");
  Vocabulary v;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n < reserved_symbols().size()) {
      if (line != reserved_symbols()[n]) {
        throw Error(Errc::bad_magic, path.string() + ": line " + std::to_string(n + 1) + " should be " +
                                         reserved_symbols()[n]);
      }
    } else {
      if (line.empty() || v.contains(line)) {
        throw Error(Errc::vocab_mismatch, path.string() + ": empty or duplicate token on line " + std::to_string(n + 1));
      }
      v.add(line);
    }
    ++n;
  }
  if (n < reserved_symbols().size()) throw Error(Errc::truncated, path.string() + ": missing reserved header");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write vocabulary " + path.string());
  for (const auto& tok : tokens_) out << tok << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(Errc::out_of_range, "token id " + std::to_string(id) + " >= vocabulary size " +
                                        std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace mmt
