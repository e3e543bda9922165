#include "sadiar/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

#include "sadiar/errors.hpp"
#include "sadiar/io_util.hpp"
#include "sadiar/optimizer.hpp"
#include "sadiar/rttm.hpp"
#include "sadiar/sa_asr.hpp"
#include "sadiar/scoring.hpp"
#include "sadiar/synth.hpp"

namespace fs = std::filesystem;

namespace sadiar {

namespace {

using nlohmann::json;

double round6(double x) {
  return std::atof(io::format_g6(x).c_str());
}

// ------------------------------------------------------------------ synth --

// Reference diarization segments of one synthetic sample: each utterance is
// one segment of its speaker.
DiarSegmentList reference_segments(const synth::ManifestEntry& e) {
  DiarSegmentList segs;
  for (const auto& u : e.utterances)
    segs.push_back(DiarSegment{u.speaker, u.onset_sec, u.onset_sec + u.dur_sec});
  return segs;
}

// Reference transcript in the diarize output schema: per speaker, the
// regular tokens in serialized order with their exact rendered spans.
std::string reference_words_json(const synth::ManifestEntry& e,
                                 const Vocabulary& vocab) {
  std::map<std::string, json> by_speaker;
  for (size_t j = 0; j < e.reference.tokens.size(); ++j) {
    const int tok = e.reference.tokens[j];
    if (vocab.is_special(tok)) continue;
    const int spk_index = e.reference.speakers[j];
    if (spk_index < 0 || spk_index >= int(e.profiles.size()))
      throw InternalError("dataset: reference speaker index out of range");
    const std::string& spk = e.profiles.profiles[size_t(spk_index)].id;
    auto& arr = by_speaker[spk];
    if (arr.is_null()) arr = json::array();
    arr.push_back({{"token", vocab.token(tok)},
                   {"start", round6(e.token_times_sec[j].first)},
                   {"end", round6(e.token_times_sec[j].second)}});
  }
  json out = json::object();
  for (const auto& [spk, arr] : by_speaker) out[spk] = arr;
  return out.dump(2) + "\n";
}

}  // namespace

void cmd_synth(const RunConfig& cfg, int jobs, std::ostream& log) {
  cfg.validate();
  if (jobs < 1) throw UsageError("synth: --jobs must be >= 1");
  const Vocabulary vocab = toy_vocabulary(int(cfg.synth.vocab_tokens));

  synth::DatasetConfig dc;
  dc.seed = cfg.synth.seed;
  dc.inventory = cfg.synth.inventory;
  dc.mixture = cfg.synth.mixture;

  dc.n_samples = cfg.synth.n_train;
  dc.first_sample_index = 0;
  const auto train_sum = synth::build_training_set(
      vocab, dc, (fs::path(cfg.data_dir) / "train").string(), jobs);
  log << "synth: " << train_sum.n_samples << " train mixtures -> "
      << train_sum.dir << "\n";

  json meta;
  meta["config"] = cfg.to_json();
  meta["n_train"] = cfg.synth.n_train;
  meta["n_eval"] = cfg.synth.n_eval;
  meta["train_speaker_histogram"] = train_sum.speaker_count_histogram;

  if (cfg.synth.n_eval > 0) {
    dc.n_samples = cfg.synth.n_eval;
    dc.first_sample_index = cfg.synth.n_train;  // disjoint mixture stream
    const std::string eval_dir = (fs::path(cfg.data_dir) / "eval").string();
    const auto eval_sum = synth::build_training_set(vocab, dc, eval_dir, jobs);
    meta["eval_speaker_histogram"] = eval_sum.speaker_count_histogram;

    // Per-sample reference outputs in the same formats diarize emits, so
    // score can compare them directly.
    fs::create_directories(fs::path(eval_dir) / "ref");
    const auto entries = synth::read_manifest(eval_dir + "/manifest.jsonl");
    for (const auto& e : entries) {
      const fs::path base = fs::path(eval_dir) / "ref" / e.id;
      io::write_file_atomic(base.string() + ".rttm",
                            emit_rttm(reference_segments(e), e.id));
      io::write_file_atomic(base.string() + ".words.json",
                            reference_words_json(e, vocab));
    }
    log << "synth: " << eval_sum.n_samples << " eval mixtures -> " << eval_dir
        << "\n";
  }

  io::write_file_atomic((fs::path(cfg.data_dir) / "dataset_meta.json").string(),
                        meta.dump(2) + "\n");
}

// ------------------------------------------------------------------ train --

double cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::string train_dir = (fs::path(cfg.data_dir) / "train").string();
  if (!fs::exists(fs::path(train_dir) / "manifest.jsonl"))
    throw DataError("train: no dataset at " + train_dir +
                    " (run synth first)");
  const auto entries = synth::read_manifest(train_dir + "/manifest.jsonl");
  const Vocabulary vocab = Vocabulary::load(train_dir + "/vocab.txt");

  std::vector<synth::MixtureSample<float>> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries)
    samples.push_back(synth::load_sample<float>(train_dir, e));
  log << "train: " << samples.size() << " mixtures loaded\n";

  SaAsrModel<float> model(cfg.model, vocab, cfg.train.seed);
  auto params = model.params().tensors();
  std::vector<std::string> names;
  for (const auto& [n, t] : model.params().items()) names.push_back(n);

  num::AdamConfig acfg;
  acfg.lr = cfg.train.lr;
  acfg.warmup_steps = cfg.train.warmup_steps;
  num::AdamState<float> state;

  // Deterministic sample order: reshuffled every epoch from a seeded rng.
  std::mt19937_64 order_rng(cfg.train.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t(0));
  size_t cursor = order.size();
  auto next_sample = [&]() -> const synth::MixtureSample<float>& {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    return samples[order[cursor++]];
  };

  std::string log_text;
  double last_loss = std::numeric_limits<double>::quiet_NaN();

  auto run_stage = [&](int stage, long steps,
                       const std::function<bool(size_t)>& mask) {
    for (long s = 1; s <= steps; ++s) {
      model.params().zero_grad();
      num::Tensor<float> total;
      for (long b = 0; b < cfg.train.batch_mixtures; ++b) {
        const auto& smp = next_sample();
        auto loss = stage == 1
                        ? model.joint_nll_loss(smp.features, smp.profiles,
                                               smp.reference)
                        : model.combined_loss(smp.features, smp.profiles,
                                              smp.reference);
        total = b == 0 ? loss : num::add(total, loss);
      }
      total = num::scale(total, 1.0f / float(cfg.train.batch_mixtures));
      num::backward(total);
      last_loss = double(total.value());
      if (!std::isfinite(last_loss))
        throw InternalError("train: non-finite loss at stage " +
                            std::to_string(stage) + " step " +
                            std::to_string(s));
      num::adam_step(params, state, acfg, mask);
      const std::string line = "stage " + std::to_string(stage) + " step " +
                               std::to_string(s) + " loss " +
                               io::format_g6(last_loss) + "\n";
      log_text += line;
      if (s % cfg.train.log_every == 0 || s == steps) log << line;
    }
  };

  run_stage(1, cfg.train.stage1_steps, {});
  model.save(cfg.checkpoint + ".stage1",
             json{{"stage", 1}, {"steps", cfg.train.stage1_steps}});

  state.reset_schedule();  // stage 2 restarts the learning-rate warmup
  std::function<bool(size_t)> mask;
  if (cfg.train.freeze_time_heads)
    mask = [&names](size_t i) { return names[i].rfind("time.", 0) == 0; };
  run_stage(2, cfg.train.stage2_steps, mask);
  model.save(cfg.checkpoint,
             json{{"stage", 2},
                  {"steps", cfg.train.stage1_steps + cfg.train.stage2_steps},
                  {"final_loss", io::format_g6(last_loss)}});

  if (std::isfinite(last_loss))
    log_text += "final loss " + io::format_g6(last_loss) + "\n";
  fs::create_directories(cfg.out_dir);
  io::write_file_atomic((fs::path(cfg.out_dir) / "train_log.txt").string(),
                        log_text);
  log << "train: checkpoint -> " << cfg.checkpoint << "\n";
  return last_loss;
}

// ---------------------------------------------------------------- diarize --

namespace {

struct DiarizeInput {
  std::string id;
  std::string features_path;
};

std::vector<DiarizeInput> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<DiarizeInput> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (p.extension() == ".jsonl") {
      const auto entries = synth::read_manifest(in);
      for (const auto& e : entries)
        out.push_back({e.id, (p.parent_path() / e.features_path).string()});
    } else {
      out.push_back({p.stem().string(), in});
    }
  }
  return out;
}

}  // namespace

void cmd_diarize(const RunConfig& cfg, const std::vector<std::string>& inputs,
                 int jobs, std::ostream& log) {
  cfg.pipeline.validate();
  if (jobs < 1) throw UsageError("diarize: --jobs must be >= 1");
  if (inputs.empty()) throw UsageError("diarize: no input recordings given");

  const std::string train_dir = (fs::path(cfg.data_dir) / "train").string();
  const Vocabulary vocab = Vocabulary::load(train_dir + "/vocab.txt");
  const synth::Inventory inv =
      synth::Inventory::load(train_dir + "/inventory.json");
  const SaAsrModel<float> model =
      SaAsrModel<float>::load(cfg.checkpoint, vocab);

  if (model.config().feat_dim != inv.feat_dim)
    throw DataError("diarize: checkpoint expects feat_dim " +
                    std::to_string(model.config().feat_dim) +
                    " but the inventory produces feat_dim " +
                    std::to_string(inv.feat_dim));
  if (model.config().profile_dim != inv.profile_dim)
    throw DataError("diarize: checkpoint expects profile_dim " +
                    std::to_string(model.config().profile_dim) +
                    " but the inventory produces profile_dim " +
                    std::to_string(inv.profile_dim));

  const auto work = expand_inputs(inputs);
  fs::create_directories(cfg.out_dir);

  const Embedder<float> embedder =
      [&inv](const Features<float>& f, long b, long e) {
        return synth::extract_profile(inv, f, b, e);
      };

  std::vector<std::string> summaries(work.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&]() {
    try {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= work.size()) return;
        const auto& item = work[i];
        const Features<float> f = synth::read_features(item.features_path);
        if (f.dim != model.config().feat_dim)
          throw DataError("diarize: " + item.features_path + " has dim " +
                          std::to_string(f.dim) + " but the checkpoint expects " +
                          std::to_string(model.config().feat_dim));
        const auto result =
            diarize_recording(f, model, cfg.pipeline, embedder);
        const fs::path base = fs::path(cfg.out_dir) / item.id;
        io::write_file_atomic(base.string() + ".rttm",
                              emit_rttm(result.segments, item.id));
        io::write_file_atomic(base.string() + ".words.json",
                              to_transcript_json(result.transcript));
        summaries[i] = "diarize: " + item.id + ": " +
                       std::to_string(result.segments.size()) + " segments, " +
                       std::to_string(result.num_speakers) + " speakers\n";
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!err) err = std::current_exception();
    }
  };
  const int n_threads = int(std::min<size_t>(size_t(jobs), work.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  for (const auto& s : summaries) log << s;
}

// ------------------------------------------------------------------ score --

namespace {

// {"spk": ["w", ...]} or {"spk": [{"token": "w", ...}, ...]} -> word lists.
std::map<std::string, std::vector<std::string>> words_from_json(
    const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw DataError("transcript " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw DataError("transcript " + path + ": expected a top-level object");
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [spk, arr] : j.items()) {
    if (!arr.is_array())
      throw DataError("transcript " + path + ": speaker '" + spk +
                      "' must map to an array");
    auto& words = out[spk];
    for (const auto& w : arr) {
      if (w.is_string())
        words.push_back(w.get<std::string>());
      else if (w.is_object() && w.contains("token") && w["token"].is_string())
        words.push_back(w["token"].get<std::string>());
      else
        throw DataError("transcript " + path + ": speaker '" + spk +
                        "' has an entry that is neither a word nor an object "
                        "with a \"token\" field");
    }
  }
  return out;
}

}  // namespace

ScoreReport cmd_score(const ScoreOptions& opt, std::ostream& log) {
  if (opt.ref_rttm.empty() || opt.hyp_rttm.empty())
    throw UsageError("score: --ref and --hyp are required");
  if (opt.ref_words.empty() != opt.hyp_words.empty())
    throw UsageError(
        "score: --ref-words and --hyp-words must be given together");

  const DiarSegmentList ref = parse_rttm(io::read_file(opt.ref_rttm));
  const DiarSegmentList hyp = parse_rttm(io::read_file(opt.hyp_rttm));

  ScoreReport rep;
  rep.der = der(ref, hyp, opt.collar_sec);
  if (!opt.ref_words.empty())
    rep.cpwer =
        cpwer(words_from_json(opt.ref_words), words_from_json(opt.hyp_words));

  log << score_report_table(rep);
  if (!opt.out_json.empty()) {
    if (fs::path(opt.out_json).has_parent_path())
      fs::create_directories(fs::path(opt.out_json).parent_path());
    io::write_file_atomic(opt.out_json, score_report_json(rep));
  }
  return rep;
}

}  // namespace sadiar
