#pragma once

// One configuration object for every command: model hyperparameters, the
// diarization pipeline settings, the training schedule, the synthetic
// dataset recipe, and default paths. Loaded from a strict JSON file — every
// key must be known — so a typo fails loudly instead of silently using a
// default. Command-line flags override file values after loading.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sadiar/pipeline.hpp"
#include "sadiar/sa_asr.hpp"
#include "sadiar/synth.hpp"

namespace sadiar {

struct TrainSettings {
  long stage1_steps = 200;  // joint token+speaker loss only
  long stage2_steps = 100;  // combined loss (adds token timing); may be 0
  double lr = 1e-3;
  long warmup_steps = 200;     // linear ramp, restarted at stage 2
  long batch_mixtures = 4;     // mixtures averaged per optimizer step
  std::uint64_t seed = 1;
  bool freeze_time_heads = true;  // stage 2 updates only time.* parameters
  long log_every = 10;            // console cadence; the log file has every step

  void validate() const;  // DataError on nonsense
};

struct SynthSettings {
  long n_train = 64;
  long n_eval = 16;
  std::uint64_t seed = 7;
  long vocab_tokens = 16;  // regular tokens; specials are added on top
  synth::InventoryConfig inventory;
  synth::MixtureConfig mixture;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  PipelineConfig pipeline;
  TrainSettings train;
  SynthSettings synth;
  std::string data_dir = "data";
  std::string checkpoint = "model.ckpt";
  std::string out_dir = "out";

  // Cross-field checks on top of the per-section validations: the model must
  // consume what the synthesizer produces (feature and profile dimensions),
  // reference timings must live on the model's encoder grid, and the
  // inventory must hold enough speakers for the mixture policy.
  void validate() const;

  nlohmann::json to_json() const;

  // Strict parse: unknown keys anywhere raise DataError naming the key and
  // section; type errors are rephrased as DataError. Missing keys keep their
  // defaults. Validates before returning.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);
};

}  // namespace sadiar
