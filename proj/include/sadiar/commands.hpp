#pragma once

// The four workflows behind the command-line tool, as plain functions so
// they can be driven directly by tests. All of them throw: UsageError for
// bad invocations, DataError for bad files or configuration, InternalError
// for broken invariants. The binary maps those to exit codes 1/2/3.

#include <iosfwd>
#include <string>
#include <vector>

#include "sadiar/run_config.hpp"
#include "sadiar/scoring.hpp"

namespace sadiar {

// Builds the synthetic corpus under cfg.data_dir:
//   train/  dataset (cfg.synth.n_train samples, stream indices 0..)
//   eval/   dataset (cfg.synth.n_eval samples, stream indices n_train..)
//   eval/ref/<id>.rttm and <id>.words.json  reference outputs for scoring
//   dataset_meta.json  the full config echo plus sample counts
// Both datasets share one inventory (same seed), so train and eval live in
// the same synthetic world but contain disjoint mixtures. Reruns with the
// same config produce byte-identical files. jobs parallelizes rendering.
void cmd_synth(const RunConfig& cfg, int jobs, std::ostream& log);

// Two-stage training on cfg.data_dir/train: stage 1 minimizes the joint
// token+speaker loss; stage 2 adds the token-timing loss, restarting the
// learning-rate warmup, and (with train.freeze_time_heads) updates only
// time.* parameters. Writes cfg.checkpoint and cfg.checkpoint + ".stage1",
// plus a per-step loss log at cfg.out_dir/train_log.txt. Returns the final
// step's loss (NaN when both stages have zero steps).
double cmd_train(const RunConfig& cfg, std::ostream& log);

// Runs the full diarization pipeline on each input. An input is either a
// feature file or a manifest.jsonl, which stands for every feature file it
// lists. Embeddings come from the inventory at cfg.data_dir/train; the
// model comes from cfg.checkpoint. Writes <out_dir>/<id>.rttm and
// <id>.words.json per recording. jobs parallelizes across recordings.
void cmd_diarize(const RunConfig& cfg, const std::vector<std::string>& inputs,
                 int jobs, std::ostream& log);

struct ScoreOptions {
  std::string ref_rttm;    // required
  std::string hyp_rttm;    // required
  std::string ref_words;   // transcript JSON; both-or-neither with hyp_words
  std::string hyp_words;
  double collar_sec = 0.0;
  std::string out_json;    // optional report path
};

// Scores hypothesis against reference: DER always, cpWER when transcripts
// are given. Prints the table to `log`; writes the JSON report when
// out_json is set. Transcript JSON accepts {"spk": ["w", ...]} and the
// diarize output form {"spk": [{"token": ...}, ...]}.
ScoreReport cmd_score(const ScoreOptions& opt, std::ostream& log);

}  // namespace sadiar
