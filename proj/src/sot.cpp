#include "sadiar/sot.hpp"

#include <algorithm>

namespace sadiar {

SerializedReference serialize_sot(std::vector<SpeakerBlock> blocks,
                                  const Vocabulary& vocab) {
  blocks.erase(std::remove_if(blocks.begin(), blocks.end(),
                              [](const SpeakerBlock& b) { return b.tokens.empty(); }),
               blocks.end());
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const SpeakerBlock& a, const SpeakerBlock& b) {
                     if (a.first_start != b.first_start)
                       return a.first_start < b.first_start;
                     return a.speaker < b.speaker;
                   });
  SerializedReference ref;
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (b.timings.size() != b.tokens.size())
      throw DataError("serialize: timing/token length mismatch");
    // The change token marks an actual change: consecutive blocks by the
    // same speaker concatenate without one.
    if (bi > 0 && b.speaker != blocks[bi - 1].speaker) {
      ref.tokens.push_back(vocab.sc_id());
      ref.speakers.push_back(b.speaker);
      ref.timings.push_back({});
    }
    for (size_t i = 0; i < b.tokens.size(); ++i) {
      if (vocab.is_special(b.tokens[i]))
        throw DataError("serialize: special token inside a speaker block");
      ref.tokens.push_back(b.tokens[i]);
      ref.speakers.push_back(b.speaker);
      ref.timings.push_back(b.timings[i]);
    }
  }
  ref.tokens.push_back(vocab.eos_id());
  ref.speakers.push_back(blocks.empty() ? 0 : blocks.back().speaker);
  ref.timings.push_back({});
  return ref;
}

std::vector<SpeakerBlock> deserialize_sot(const std::vector<int>& tokens,
                                          const std::vector<int>& speakers,
                                          const std::vector<TokenTiming>& timings,
                                          const Vocabulary& vocab) {
  if (speakers.size() != tokens.size() || timings.size() != tokens.size())
    throw DataError("deserialize: parallel array length mismatch");
  std::vector<SpeakerBlock> blocks;
  SpeakerBlock cur;
  bool open = false;
  auto flush = [&]() {
    if (open && !cur.tokens.empty()) blocks.push_back(std::move(cur));
    cur = SpeakerBlock{};
    open = false;
  };
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t == vocab.eos_id()) break;
    if (t == vocab.sc_id()) {
      flush();
      continue;
    }
    if (!open) {
      cur.speaker = speakers[i];
      open = true;
    }
    cur.tokens.push_back(t);
    cur.timings.push_back(timings[i]);
  }
  flush();
  return blocks;
}

void validate_reference(const SerializedReference& ref, const Vocabulary& vocab,
                        long n_profiles, long enc_frames) {
  const size_t n = ref.tokens.size();
  if (n == 0 || ref.speakers.size() != n || ref.timings.size() != n)
    throw DataError("reference: empty or mismatched parallel arrays");
  for (size_t i = 0; i < n; ++i) {
    const int t = ref.tokens[i];
    if (t < 0 || t >= vocab.size())
      throw DataError("reference: token index out of range");
    const bool last = (i + 1 == n);
    if ((t == vocab.eos_id()) != last)
      throw DataError("reference: eos must appear exactly once, at the end");
    if (last && i > 0 && ref.tokens[i - 1] == vocab.sc_id())
      throw DataError("reference: sc directly before eos");
    if (t == vocab.sc_id()) {
      if (i == 0 || ref.tokens[i - 1] == vocab.sc_id())
        throw DataError("reference: sc at start or adjacent sc");
      if (ref.speakers[i] == ref.speakers[i - 1])
        throw DataError("reference: sc between same-speaker tokens");
    } else if (i > 0 && ref.tokens[i - 1] == vocab.sc_id() &&
               ref.speakers[i] != ref.speakers[i - 1]) {
      // sc is attributed to the speaker of the block it opens
      throw DataError("reference: sc speaker does not match following token");
    } else if (i > 0 && ref.tokens[i - 1] != vocab.sc_id() &&
               ref.speakers[i] != ref.speakers[i - 1]) {
      // covers eos as well: it is attributed to the final block's speaker
      throw DataError("reference: speaker changed without sc");
    }
    if (ref.speakers[i] < 0 || ref.speakers[i] >= n_profiles)
      throw DataError("reference: speaker index out of range");
    const auto& tm = ref.timings[i];
    if (vocab.is_special(t)) {
      if (tm.timed()) throw DataError("reference: special token carries timing");
    } else {
      if (!tm.timed() || tm.start > tm.end || tm.end >= enc_frames)
        throw DataError("reference: bad token timing");
    }
  }
}

}  // namespace sadiar
