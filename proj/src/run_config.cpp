#include "sadiar/run_config.hpp"

#include <cmath>
#include <set>

#include "sadiar/errors.hpp"
#include "sadiar/io_util.hpp"

namespace sadiar {

namespace {

using nlohmann::json;

// Reads named keys out of one JSON object and rejects everything it was not
// asked for, so misspelled keys cannot silently fall back to defaults.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object())
      throw DataError("config: section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& into) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      into = it->get<T>();
    } catch (const json::exception& e) {
      throw DataError("config: bad value for '" + name_ + "." + key +
                      "': " + e.what());
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  // Call after all get()/object() lookups: rejects unconsumed keys.
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (seen_.find(key) == seen_.end())
        throw DataError("config: unknown key '" + key + "' in section '" +
                        name_ + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& c) {
  Section s(j, "model");
  s.get("feat_dim", c.feat_dim);
  s.get("model_dim", c.model_dim);
  s.get("profile_dim", c.profile_dim);
  s.get("time_dim", c.time_dim);
  s.get("ff_dim", c.ff_dim);
  s.get("enc_layers", c.enc_layers);
  s.get("spk_enc_layers", c.spk_enc_layers);
  s.get("dec_layers", c.dec_layers);
  s.get("spk_dec_layers", c.spk_dec_layers);
  s.get("heads", c.heads);
  s.finish();
}

void read_pipeline(const json& j, PipelineConfig& c) {
  Section s(j, "pipeline");
  s.get("window_sec", c.window_sec);
  s.get("hop_sec", c.hop_sec);
  s.get("max_chunk_sec", c.max_chunk_sec);
  s.get("merge_gap_m", c.merge_gap_m);
  s.get("max_token_dur_n", c.max_token_dur_n);
  s.get("oracle_speakers", c.oracle_speakers);
  s.get("max_speakers", c.max_speakers);
  s.get("energy_threshold", c.energy_threshold);
  s.get("min_sil_sec", c.min_sil_sec);
  s.get("max_decode_tokens", c.max_decode_tokens);
  s.finish();
}

void read_train(const json& j, TrainSettings& c) {
  Section s(j, "train");
  s.get("stage1_steps", c.stage1_steps);
  s.get("stage2_steps", c.stage2_steps);
  s.get("lr", c.lr);
  s.get("warmup_steps", c.warmup_steps);
  s.get("batch_mixtures", c.batch_mixtures);
  s.get("seed", c.seed);
  s.get("freeze_time_heads", c.freeze_time_heads);
  s.get("log_every", c.log_every);
  s.finish();
}

void read_inventory(const json& j, synth::InventoryConfig& c) {
  Section s(j, "synth.inventory");
  s.get("n_speakers", c.n_speakers);
  s.get("feat_dim", c.feat_dim);
  s.get("profile_dim", c.profile_dim);
  s.get("max_pair_cos", c.max_pair_cos);
  s.get("pattern_scale", c.pattern_scale);
  s.finish();
}

void read_mixture(const json& j, synth::MixtureConfig& c) {
  Section s(j, "synth.mixture");
  s.get("min_speakers", c.min_speakers);
  s.get("max_speakers", c.max_speakers);
  s.get("min_utterances", c.min_utterances);
  s.get("max_utterances", c.max_utterances);
  s.get("min_tokens", c.min_tokens);
  s.get("max_tokens", c.max_tokens);
  s.get("min_token_frames", c.min_token_frames);
  s.get("max_token_frames", c.max_token_frames);
  s.get("overlap_prob", c.overlap_prob);
  s.get("overlap_frac_lo", c.overlap_frac_lo);
  s.get("overlap_frac_hi", c.overlap_frac_hi);
  s.get("gap_max_sec", c.gap_max_sec);
  s.get("max_distractors", c.max_distractors);
  s.get("noise_sigma", c.noise_sigma);
  s.finish();
}

void read_synth(const json& j, SynthSettings& c) {
  Section s(j, "synth");
  s.get("n_train", c.n_train);
  s.get("n_eval", c.n_eval);
  s.get("seed", c.seed);
  s.get("vocab_tokens", c.vocab_tokens);
  if (const json* inv = s.object("inventory")) read_inventory(*inv, c.inventory);
  if (const json* mix = s.object("mixture")) read_mixture(*mix, c.mixture);
  s.finish();
}

void read_paths(const json& j, RunConfig& c) {
  Section s(j, "paths");
  s.get("data_dir", c.data_dir);
  s.get("checkpoint", c.checkpoint);
  s.get("out_dir", c.out_dir);
  s.finish();
}

}  // namespace

void TrainSettings::validate() const {
  if (stage1_steps < 0 || stage2_steps < 0)
    throw DataError("train: step counts must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw DataError("train: lr must be positive and finite");
  if (warmup_steps < 0) throw DataError("train: negative warmup");
  if (batch_mixtures < 1) throw DataError("train: batch_mixtures must be >= 1");
  if (log_every < 1) throw DataError("train: log_every must be >= 1");
}

void SynthSettings::validate() const {
  if (n_train < 1) throw DataError("synth: n_train must be >= 1");
  if (n_eval < 0) throw DataError("synth: n_eval must be >= 0");
  if (vocab_tokens < 1) throw DataError("synth: vocab_tokens must be >= 1");
  inventory.validate();
  mixture.validate();
  if (inventory.n_speakers < mixture.max_speakers + mixture.max_distractors)
    throw DataError(
        "synth: inventory must hold at least max_speakers + max_distractors "
        "speakers");
}

void RunConfig::validate() const {
  model.validate();
  pipeline.validate();
  train.validate();
  synth.validate();
  if (model.feat_dim != synth.inventory.feat_dim)
    throw DataError("config: model.feat_dim " + std::to_string(model.feat_dim) +
                    " != synth.inventory.feat_dim " +
                    std::to_string(synth.inventory.feat_dim));
  if (model.profile_dim != synth.inventory.profile_dim)
    throw DataError("config: model.profile_dim " +
                    std::to_string(model.profile_dim) +
                    " != synth.inventory.profile_dim " +
                    std::to_string(synth.inventory.profile_dim));
  if (synth.mixture.subsample_factor != ModelConfig::subsample_factor)
    throw DataError("config: reference timings use subsample factor " +
                    std::to_string(synth.mixture.subsample_factor) +
                    " but the encoder grid is fixed at " +
                    std::to_string(ModelConfig::subsample_factor));
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"model", config_json(model)},
      {"pipeline",
       {{"window_sec", pipeline.window_sec},
        {"hop_sec", pipeline.hop_sec},
        {"max_chunk_sec", pipeline.max_chunk_sec},
        {"merge_gap_m", pipeline.merge_gap_m},
        {"max_token_dur_n", pipeline.max_token_dur_n},
        {"oracle_speakers", pipeline.oracle_speakers},
        {"max_speakers", pipeline.max_speakers},
        {"energy_threshold", pipeline.energy_threshold},
        {"min_sil_sec", pipeline.min_sil_sec},
        {"max_decode_tokens", pipeline.max_decode_tokens}}},
      {"train",
       {{"stage1_steps", train.stage1_steps},
        {"stage2_steps", train.stage2_steps},
        {"lr", train.lr},
        {"warmup_steps", train.warmup_steps},
        {"batch_mixtures", train.batch_mixtures},
        {"seed", train.seed},
        {"freeze_time_heads", train.freeze_time_heads},
        {"log_every", train.log_every}}},
      {"synth",
       {{"n_train", synth.n_train},
        {"n_eval", synth.n_eval},
        {"seed", synth.seed},
        {"vocab_tokens", synth.vocab_tokens},
        {"inventory",
         {{"n_speakers", synth.inventory.n_speakers},
          {"feat_dim", synth.inventory.feat_dim},
          {"profile_dim", synth.inventory.profile_dim},
          {"max_pair_cos", synth.inventory.max_pair_cos},
          {"pattern_scale", synth.inventory.pattern_scale}}},
        {"mixture",
         {{"min_speakers", synth.mixture.min_speakers},
          {"max_speakers", synth.mixture.max_speakers},
          {"min_utterances", synth.mixture.min_utterances},
          {"max_utterances", synth.mixture.max_utterances},
          {"min_tokens", synth.mixture.min_tokens},
          {"max_tokens", synth.mixture.max_tokens},
          {"min_token_frames", synth.mixture.min_token_frames},
          {"max_token_frames", synth.mixture.max_token_frames},
          {"overlap_prob", synth.mixture.overlap_prob},
          {"overlap_frac_lo", synth.mixture.overlap_frac_lo},
          {"overlap_frac_hi", synth.mixture.overlap_frac_hi},
          {"gap_max_sec", synth.mixture.gap_max_sec},
          {"max_distractors", synth.mixture.max_distractors},
          {"noise_sigma", synth.mixture.noise_sigma}}}}},
      {"paths",
       {{"data_dir", data_dir},
        {"checkpoint", checkpoint},
        {"out_dir", out_dir}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  Section top(j, "(top level)");
  if (const json* m = top.object("model")) read_model(*m, c.model);
  if (const json* p = top.object("pipeline")) read_pipeline(*p, c.pipeline);
  if (const json* t = top.object("train")) read_train(*t, c.train);
  if (const json* s = top.object("synth")) read_synth(*s, c.synth);
  if (const json* p = top.object("paths")) read_paths(*p, c);
  top.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace sadiar
