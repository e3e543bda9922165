#pragma once

// Evaluation metrics: diarization error rate (DER) with its
// speaker-error/miss/false-alarm decomposition under an optimal speaker
// mapping on a 10 ms grid, word error rate via edit distance, and the
// concatenated minimum-permutation word error rate (cpWER).

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadiar/errors.hpp"
#include "sadiar/pipeline.hpp"

namespace sadiar {

// ------------------------------------------------------------------ DER ----

// All rates are percentages. The *_instants fields are exact counts of
// scored 10 ms grid instants (speaker-seconds x 100), so the decomposition
// identity holds exactly in integers:
//   der_instants() == miss_instants + fa_instants + ser_instants.
struct DerReport {
  long ref_instants = 0;  // total reference speech; overlaps count multiply
  long miss_instants = 0;
  long fa_instants = 0;
  long ser_instants = 0;
  long der_instants() const { return miss_instants + fa_instants + ser_instants; }

  double total_ref_speech_sec = 0.0;
  double miss = 0.0, fa = 0.0, ser = 0.0, der = 0.0;  // percent of ref speech

  // Optimal reference -> hypothesis speaker pairing used for scoring.
  std::vector<std::pair<std::string, std::string>> speaker_mapping;
};

// Scores hypothesis segments against reference segments at a 10 ms
// resolution with overlap regions included. Per instant, with n_ref / n_hyp
// active speakers and n_correct reference speakers whose mapped hypothesis
// speaker is also active:
//   miss += max(0, n_ref - n_hyp)
//   fa   += max(0, n_hyp - n_ref)
//   ser  += min(n_ref, n_hyp) - n_correct
// all divided by the total reference speech (sum of n_ref). The speaker
// mapping is one-to-one and maximizes total matched time, which minimizes
// DER. A positive collar excludes instants within +-collar_sec of any
// reference segment boundary from scoring. Segments of one speaker overlap-
// merge (a speaker cannot count twice at one instant); distinct speakers
// count multiply. DataError: negative/non-finite times, end < start,
// negative collar, or a reference with no speech.
DerReport der(const DiarSegmentList& ref, const DiarSegmentList& hyp,
              double collar_sec = 0.0);

// One-to-one assignment maximizing the total overlap, exact (dynamic
// program over column subsets). overlap[i][j] >= 0 is the matched time
// between reference speaker i and hypothesis speaker j; result[i] is the
// matched column or -1. Ties prefer matching over skipping and lower column
// indices. DataError: ragged/negative/non-finite input, more than 16
// speakers on the smaller side, or more than 64 on the larger.
std::vector<int> map_speakers_optimal(
    const std::vector<std::vector<double>>& overlap);

// ------------------------------------------------------------------ WER ----

struct WerCounts {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_words = 0;
  double rate = 0.0;  // percent: 100 * (S+D+I) / max(1, ref_words)
  long edits() const { return substitutions + deletions + insertions; }
};

// Levenshtein alignment with unit costs. The S/D/I split of the (unique)
// minimal total is taken from the backtrace preferring match/substitution,
// then deletion, then insertion.
WerCounts wer(const std::vector<std::string>& ref,
              const std::vector<std::string>& hyp);

// ---------------------------------------------------------------- cpWER ----

struct CpWerPair {
  std::string ref_speaker;  // empty: unmatched hypothesis speaker
  std::string hyp_speaker;  // empty: unmatched reference speaker
  WerCounts counts;
};

struct CpWerReport {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_words = 0;
  double cpwer = 0.0;  // percent: 100 * total edits / max(1, ref_words)
  std::vector<CpWerPair> pairs;  // chosen pairing, reference order first
  long edits() const { return substitutions + deletions + insertions; }
};

// Concatenates each speaker's words, pads the smaller side with empty
// speakers, and minimizes the total edit count over speaker pairings:
// exhaustively in lexicographic permutation order for up to 8 speakers
// (first minimum wins), by exact assignment beyond. Speakers are taken in
// sorted name order on both sides. DataError: no reference speakers, or
// more than 16 speakers on either side.
CpWerReport cpwer(const std::map<std::string, std::vector<std::string>>& ref,
                  const std::map<std::string, std::vector<std::string>>& hyp);

// --------------------------------------------------------------- report ----

struct ScoreReport {
  std::optional<DerReport> der;
  std::optional<CpWerReport> cpwer;
};

// JSON object with "der" / "cpwer" sections (only those present). Numbers
// are fixed to 6 significant digits so reruns are byte-identical.
std::string score_report_json(const ScoreReport& report);

// Fixed-width human-readable table with SER / Miss / FA / DER columns and
// the speaker mapping, plus a cpWER block when present.
std::string score_report_table(const ScoreReport& report);

}  // namespace sadiar
