#pragma once

// Token vocabulary: an ordered list of subword tokens plus the two special
// tokens (speaker change, end of sequence), each present exactly once.
// Indices are stable: they are the line positions of the vocabulary file.

#include <string>
#include <unordered_map>
#include <vector>

namespace sadiar {

class Vocabulary {
 public:
  // `tokens` in index order; sc/eos give the special positions.
  Vocabulary(std::vector<std::string> tokens, int sc, int eos);

  // File format: one token per line; specials carry a tab-separated flag,
  //   <sc>\tsc
  //   <eos>\teos
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  long size() const { return long(tokens_.size()); }
  int sc_id() const { return sc_; }
  int eos_id() const { return eos_; }
  bool is_special(int id) const { return id == sc_ || id == eos_; }
  const std::string& token(int id) const;
  int id(const std::string& token) const;  // DataError if unknown
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int sc_ = -1;
  int eos_ = -1;
};

// The fixed toy vocabulary: n regular tokens "t00".."tNN" followed by the
// specials.
Vocabulary toy_vocabulary(int regular_tokens = 32);

}  // namespace sadiar
