// Command-line front end: synth | train | diarize | score.
//
// Configuration comes from, in increasing precedence: built-in defaults, the
// JSON file named by --config (or the SADIAR_CONFIG environment variable),
// then explicit flags. Exit codes: 0 success, 1 usage error, 2 data error
// (bad files or configuration values), 3 internal invariant violation.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sadiar/commands.hpp"
#include "sadiar/errors.hpp"
#include "sadiar/run_config.hpp"

namespace {

sadiar::RunConfig load_config(const std::string& config_flag) {
  std::string path = config_flag;
  if (path.empty()) {
    const char* env = std::getenv("SADIAR_CONFIG");
    if (env != nullptr && *env != '\0') path = env;
  }
  if (path.empty()) return sadiar::RunConfig{};
  return sadiar::RunConfig::load_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-attributed recognition and diarization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path,
                 "JSON config file (default: $SADIAR_CONFIG if set)");

  // ---- synth ----
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate the synthetic train/eval corpus");
  std::string synth_data;
  int synth_jobs = 1;
  long n_train = 0, n_eval = -1;
  unsigned long long synth_seed = 0;
  int min_speakers = 0, max_speakers = 0;
  synth->add_option("--data", synth_data, "Output dataset root");
  synth->add_option("-j,--jobs", synth_jobs, "Parallel rendering threads");
  synth->add_option("-n,--n-train", n_train, "Training mixtures");
  synth->add_option("--n-eval", n_eval, "Held-out mixtures");
  auto* synth_seed_opt =
      synth->add_option("--seed", synth_seed, "Dataset seed");
  synth->add_option("--min-speakers", min_speakers, "Speakers per mixture, lower bound");
  synth->add_option("--max-speakers", max_speakers, "Speakers per mixture, upper bound");

  // ---- train ----
  CLI::App* train = app.add_subcommand("train", "Two-stage training");
  std::string train_data, train_ckpt, train_out;
  long stage1 = -1, stage2 = -1, batch = 0;
  double lr = 0.0;
  unsigned long long train_seed = 0;
  bool freeze = true;
  train->add_option("--data", train_data, "Dataset root");
  train->add_option("--checkpoint", train_ckpt, "Checkpoint output path");
  train->add_option("--out", train_out, "Log output directory");
  train->add_option("--stage1-steps", stage1, "Joint-loss steps");
  train->add_option("--stage2-steps", stage2, "Combined-loss steps");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--batch", batch, "Mixtures per step");
  auto* train_seed_opt = train->add_option("--seed", train_seed, "Training seed");
  auto* freeze_opt = train->add_flag(
      "--freeze-time-heads,!--no-freeze-time-heads", freeze,
      "Stage 2 updates only the time heads (default on)");

  // ---- diarize ----
  CLI::App* diarize = app.add_subcommand(
      "diarize", "Run the full pipeline on recordings");
  std::string dia_data, dia_ckpt, dia_out;
  int dia_jobs = 1;
  long oracle = -1, max_decode = 0;
  std::vector<std::string> inputs;
  diarize->add_option("--data", dia_data, "Dataset root (vocab + inventory)");
  diarize->add_option("--checkpoint", dia_ckpt, "Model checkpoint");
  diarize->add_option("--out", dia_out, "Output directory");
  diarize->add_option("--oracle-speakers", oracle,
                      "Use this speaker count instead of estimating (0 = estimate)");
  diarize->add_option("--max-decode-tokens", max_decode, "Decode cap per chunk");
  diarize->add_option("-j,--jobs", dia_jobs, "Parallel recordings");
  diarize->add_option("inputs", inputs, "Feature files or a manifest.jsonl")
      ->required();

  // ---- score ----
  CLI::App* score = app.add_subcommand("score", "Score hypothesis outputs");
  sadiar::ScoreOptions sopt;
  score->add_option("--ref", sopt.ref_rttm, "Reference RTTM")->required();
  score->add_option("--hyp", sopt.hyp_rttm, "Hypothesis RTTM")->required();
  score->add_option("--ref-words", sopt.ref_words, "Reference transcript JSON");
  score->add_option("--hyp-words", sopt.hyp_words, "Hypothesis transcript JSON");
  score->add_option("--collar", sopt.collar_sec, "No-score collar (seconds)");
  score->add_option("--out", sopt.out_json, "Report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(score)) {
      sadiar::cmd_score(sopt, std::cout);
      return 0;
    }

    sadiar::RunConfig cfg = load_config(config_path);

    if (app.got_subcommand(synth)) {
      if (!synth_data.empty()) cfg.data_dir = synth_data;
      if (n_train > 0) cfg.synth.n_train = n_train;
      if (n_eval >= 0) cfg.synth.n_eval = n_eval;
      if (synth_seed_opt->count() > 0) cfg.synth.seed = synth_seed;
      if (min_speakers > 0) cfg.synth.mixture.min_speakers = min_speakers;
      if (max_speakers > 0) cfg.synth.mixture.max_speakers = max_speakers;
      sadiar::cmd_synth(cfg, synth_jobs, std::cout);
    } else if (app.got_subcommand(train)) {
      if (!train_data.empty()) cfg.data_dir = train_data;
      if (!train_ckpt.empty()) cfg.checkpoint = train_ckpt;
      if (!train_out.empty()) cfg.out_dir = train_out;
      if (stage1 >= 0) cfg.train.stage1_steps = stage1;
      if (stage2 >= 0) cfg.train.stage2_steps = stage2;
      if (lr > 0.0) cfg.train.lr = lr;
      if (batch > 0) cfg.train.batch_mixtures = batch;
      if (train_seed_opt->count() > 0) cfg.train.seed = train_seed;
      if (freeze_opt->count() > 0) cfg.train.freeze_time_heads = freeze;
      sadiar::cmd_train(cfg, std::cout);
    } else if (app.got_subcommand(diarize)) {
      if (!dia_data.empty()) cfg.data_dir = dia_data;
      if (!dia_ckpt.empty()) cfg.checkpoint = dia_ckpt;
      if (!dia_out.empty()) cfg.out_dir = dia_out;
      if (oracle >= 0) cfg.pipeline.oracle_speakers = static_cast<int>(oracle);
      if (max_decode > 0) cfg.pipeline.max_decode_tokens = max_decode;
      sadiar::cmd_diarize(cfg, inputs, dia_jobs, std::cout);
    }
    return 0;
  } catch (const sadiar::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const sadiar::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sadiar::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
