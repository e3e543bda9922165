#include "sadiar/vocab.hpp"

#include <cstdio>
#include <sstream>

#include "sadiar/errors.hpp"
#include "sadiar/io_util.hpp"

namespace sadiar {

Vocabulary::Vocabulary(std::vector<std::string> tokens, int sc, int eos)
    : tokens_(std::move(tokens)), sc_(sc), eos_(eos) {
  if (tokens_.empty()) throw DataError("vocabulary: empty token list");
  if (sc_ < 0 || sc_ >= long(tokens_.size()) || eos_ < 0 ||
      eos_ >= long(tokens_.size()) || sc_ == eos_)
    throw DataError("vocabulary: invalid special token positions");
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty())
      throw DataError("vocabulary: empty token at index " + std::to_string(i));
    if (!index_.emplace(tokens_[i], int(i)).second)
      throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::vector<std::string> tokens;
  int sc = -1, eos = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string tok = line, flag;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      tok = line.substr(0, tab);
      flag = line.substr(tab + 1);
    }
    const int id = int(tokens.size());
    if (flag == "sc") {
      if (sc >= 0) throw DataError(path + ": duplicate sc flag");
      sc = id;
    } else if (flag == "eos") {
      if (eos >= 0) throw DataError(path + ": duplicate eos flag");
      eos = id;
    } else if (!flag.empty()) {
      throw DataError(path + ": unknown token flag '" + flag + "'");
    }
    tokens.push_back(tok);
  }
  if (sc < 0 || eos < 0)
    throw DataError(path + ": vocabulary must flag one sc and one eos token");
  return Vocabulary(std::move(tokens), sc, eos);
}

void Vocabulary::save(const std::string& path) const {
  std::string out;
  for (size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    if (int(i) == sc_) out += "\tsc";
    if (int(i) == eos_) out += "\teos";
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw DataError("vocabulary: token index " + std::to_string(id) +
                    " out of range");
  return tokens_[size_t(id)];
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end())
    throw DataError("vocabulary: unknown token '" + token + "'");
  return it->second;
}

Vocabulary toy_vocabulary(int regular_tokens) {
  std::vector<std::string> tokens;
  char buf[16];
  for (int i = 0; i < regular_tokens; ++i) {
    std::snprintf(buf, sizeof buf, "t%02d", i);
    tokens.emplace_back(buf);
  }
  const int sc = int(tokens.size());
  tokens.emplace_back("<sc>");
  const int eos = int(tokens.size());
  tokens.emplace_back("<eos>");
  return Vocabulary(std::move(tokens), sc, eos);
}

}  // namespace sadiar
