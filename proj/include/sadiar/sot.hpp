#pragma once

// Serialized-output training format: the per-speaker token sequences of a
// mixture are concatenated into one sequence, speakers separated by the
// speaker-change token, terminated by end-of-sequence. Speaker blocks are
// ordered by when each speaker first becomes active (ties: lower speaker
// index). The speaker-change token is attributed to the *following* speaker,
// end-of-sequence to the *last* speaker; neither carries timing.

#include <vector>

#include "sadiar/model_types.hpp"
#include "sadiar/vocab.hpp"

namespace sadiar {

// One speaker's contribution to a mixture, on the encoder frame axis.
struct SpeakerBlock {
  int speaker = 0;                   // index into the mixture's ProfileSet
  std::vector<int> tokens;           // regular token ids only
  std::vector<TokenTiming> timings;  // same length as tokens
  double first_start = 0.0;          // seconds; ordering key
};

// Concatenate blocks into a single reference. Blocks may arrive in any
// order; they are sorted by first_start here. Zero blocks (or only empty
// ones) give the single-token sequence [eos] attributed to speaker 0.
SerializedReference serialize_sot(std::vector<SpeakerBlock> blocks,
                                  const Vocabulary& vocab);

// Split a serialized sequence back into per-speaker blocks (block speaker =
// its first token's speaker; first_start is not recoverable and left 0).
// Inverse of serialize_sot for valid references. Also accepts hypotheses via
// the token/speaker vectors.
std::vector<SpeakerBlock> deserialize_sot(const std::vector<int>& tokens,
                                          const std::vector<int>& speakers,
                                          const std::vector<TokenTiming>& timings,
                                          const Vocabulary& vocab);

// Reference invariants: one eos at the end only, sc never first/last/adjacent,
// speaker constant within a block, timings present exactly on regular tokens
// and each 0 <= start <= end < enc_frames, speakers within [0, n_profiles).
void validate_reference(const SerializedReference& ref, const Vocabulary& vocab,
                        long n_profiles, long enc_frames);

}  // namespace sadiar
