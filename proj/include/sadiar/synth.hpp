#pragma once

// Synthetic multi-talker corpus generator. Features are abstract vectors on
// a 10 ms frame grid (no audio): each speaker has a fixed signature vector,
// each vocabulary token a fixed pattern vector, and a rendered frame is
// signature + pattern + Gaussian noise. Mixtures overlay 1-5 utterances of
// 1-5 speakers with a controlled overlap policy and carry exact references:
// serialized transcript, per-token speaker, and per-token start/end frames.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sadiar/alignment.hpp"
#include "sadiar/errors.hpp"
#include "sadiar/model_types.hpp"
#include "sadiar/sot.hpp"
#include "sadiar/vocab.hpp"

namespace sadiar::synth {

// ------------------------------------------------------------ inventory ----

struct InventoryConfig {
  long n_speakers = 12;
  long feat_dim = 16;
  long profile_dim = 16;
  // Pairwise |cosine| between signatures stays strictly below this.
  double max_pair_cos = 0.3;
  // Norm of each token's pattern vector (signatures are unit norm).
  double pattern_scale = 0.4;

  void validate() const;  // DataError on nonsense
};

struct SpeakerEntry {
  std::string id;
  std::vector<double> signature;  // feat_dim, unit norm
  std::vector<double> profile;    // profile_dim, unit norm
};

// Fixed ground truth of the synthetic world: speakers, token patterns, and
// the projection that turns mean frames into profile-space embeddings.
struct Inventory {
  long feat_dim = 0;
  long profile_dim = 0;
  double pattern_scale = 0.0;
  std::vector<SpeakerEntry> speakers;
  std::vector<std::vector<double>> token_patterns;  // one per regular token
  std::vector<std::vector<double>> projection;      // profile_dim x feat_dim

  long speaker_index(const std::string& id) const;  // DataError if unknown
  void validate() const;

  void save(const std::string& path) const;
  static Inventory load(const std::string& path);
};

// Signatures are rejection-sampled unit vectors (bounded retries; DataError
// if the dimension cannot fit the requested count). Profiles are the
// orthonormal projection of each signature, re-normalized. Requires
// profile_dim <= feat_dim and a vocabulary with at least one regular token.
Inventory make_inventory(const Vocabulary& vocab, const InventoryConfig& cfg,
                         uint64_t seed);

// Projection of an already-computed mean frame: normalize(P * mean).
// DataError on dimension mismatch or an exactly zero mean.
std::vector<double> project_profile(const Inventory& inv,
                                    const std::vector<double>& mean_frame);

// Mean frame of features[frame_begin, frame_end), then project_profile.
template <typename T>
std::vector<double> extract_profile(const Inventory& inv,
                                    const Features<T>& f, long frame_begin,
                                    long frame_end) {
  if (frame_begin < 0 || frame_end > f.frames || frame_begin >= frame_end)
    throw DataError("extract_profile: empty or out-of-range window");
  if (f.dim != inv.feat_dim)
    throw DataError("extract_profile: feature dimension mismatch");
  std::vector<double> mean(size_t(f.dim), 0.0);
  for (long t = frame_begin; t < frame_end; ++t)
    for (long d = 0; d < f.dim; ++d)
      mean[size_t(d)] += double(f.data[size_t(t * f.dim + d)]);
  const double inv_n = 1.0 / double(frame_end - frame_begin);
  for (auto& v : mean) v *= inv_n;
  return project_profile(inv, mean);
}

// ------------------------------------------------------------ rendering ----

struct RenderedUtterance {
  long n_frames = 0;
  std::vector<double> frames;                  // n_frames x feat_dim
  std::vector<std::pair<long, long>> spans;    // per token [begin, end)
};

// Deterministic core: render with caller-chosen per-token frame counts.
// noise_sigma == 0 draws nothing from the rng.
RenderedUtterance render_planned(const Inventory& inv, int speaker,
                                 const std::vector<int>& tokens,
                                 const std::vector<int>& frames_per_token,
                                 const Vocabulary& vocab, double noise_sigma,
                                 std::mt19937_64& rng);

// Convenience form: frame counts drawn uniformly from [min_frames,
// max_frames]. DataError: empty tokens, special/unknown token, bad speaker.
RenderedUtterance render_utterance(const Inventory& inv, int speaker,
                                   const std::vector<int>& tokens,
                                   const Vocabulary& vocab,
                                   double noise_sigma, std::mt19937_64& rng,
                                   int min_frames = 3, int max_frames = 10);

// ------------------------------------------------------------- mixtures ----

struct MixtureConfig {
  int min_speakers = 1, max_speakers = 5;      // distinct speakers
  int min_utterances = 1, max_utterances = 5;  // >= speaker count
  int min_tokens = 3, max_tokens = 8;          // tokens per utterance
  int min_token_frames = 3, max_token_frames = 10;
  double overlap_prob = 0.9;   // chance a consecutive pair overlaps
  double overlap_frac_lo = 0.08, overlap_frac_hi = 0.35;  // x shorter dur
  double gap_max_sec = 1.0;    // silence branch: gap ~ U(0, gap_max)
  int max_distractors = 2;     // extra non-speaking profiles, U{0..max}
  double noise_sigma = 0.05;
  double frame_period = 0.01;
  int subsample_factor = 4;    // encoder grid for reference timings

  void validate() const;  // DataError outside the supported ranges
};

struct UtterancePlan {
  int speaker = 0;  // inventory index
  std::vector<int> tokens;
  std::vector<int> frames_per_token;
  long onset_frame = 0;
};

// Everything random about one mixture; assembly is pure given the plan.
struct MixturePlan {
  std::vector<UtterancePlan> utterances;  // chronological
  std::vector<int> profile_speakers;      // inventory indices, set order
  uint64_t noise_seed = 0;
};

// Draws speakers, utterances, tokens, durations, onsets (overlap policy:
// with probability overlap_prob a different-speaker consecutive pair
// overlaps by U(frac_lo, frac_hi) x the shorter duration; otherwise - and
// always for same-speaker pairs - a U(0, gap_max) silence separates them),
// distractors, and the noise seed.
MixturePlan plan_mixture(const Inventory& inv, const Vocabulary& vocab,
                         const MixtureConfig& cfg, std::mt19937_64& rng);

struct UtteranceMeta {
  std::string speaker;  // inventory id
  double onset_sec = 0.0;
  double dur_sec = 0.0;
};

template <typename T>
struct MixtureSample {
  Features<T> features;
  SerializedReference reference;  // timings on the encoder frame grid
  ProfileSet<T> profiles;
  std::vector<UtteranceMeta> utterances;  // chronological
  // Exact second-level span per reference token; specials get (-1, -1).
  std::vector<std::pair<double, double>> token_times_sec;
};

namespace detail {
// Type-erased assembly core (accumulates in double).
MixtureSample<double> assemble_mixture_d(const Inventory& inv,
                                         const Vocabulary& vocab,
                                         const MixtureConfig& cfg,
                                         const MixturePlan& plan);
}  // namespace detail

// Pure function of the plan: utterance contributions are summed in a
// canonical order with per-utterance noise streams keyed by that order, so
// permuting plan.utterances cannot change the output.
template <typename T>
MixtureSample<T> assemble_mixture(const Inventory& inv,
                                  const Vocabulary& vocab,
                                  const MixtureConfig& cfg,
                                  const MixturePlan& plan) {
  MixtureSample<double> s = detail::assemble_mixture_d(inv, vocab, cfg, plan);
  MixtureSample<T> out;
  out.features.frames = s.features.frames;
  out.features.dim = s.features.dim;
  out.features.frame_period = s.features.frame_period;
  out.features.data.assign(s.features.data.begin(), s.features.data.end());
  out.reference = std::move(s.reference);
  for (const auto& p : s.profiles.profiles) {
    SpeakerProfile<T> q;
    q.id = p.id;
    q.vec.assign(p.vec.begin(), p.vec.end());
    out.profiles.profiles.push_back(std::move(q));
  }
  out.utterances = std::move(s.utterances);
  out.token_times_sec = std::move(s.token_times_sec);
  return out;
}

template <typename T>
MixtureSample<T> make_mixture(const Inventory& inv, const Vocabulary& vocab,
                              const MixtureConfig& cfg,
                              std::mt19937_64& rng) {
  return assemble_mixture<T>(inv, vocab, cfg, plan_mixture(inv, vocab, cfg, rng));
}

// ------------------------------------------------------------- datasets ----

// Feature file: "SADFEAT\n", u32 frames, u32 dim (little endian), then
// frames x dim float32 row-major.
void write_features(const std::string& path, const Features<float>& f);
Features<float> read_features(const std::string& path);  // DataError

struct DatasetConfig {
  long n_samples = 0;
  uint64_t seed = 1;
  // Global stream position of the first sample: sample i draws from an rng
  // seeded with seed + 1 + first_sample_index + i. Two datasets built from
  // the same seed but disjoint index ranges share the inventory (which uses
  // the seed itself) while drawing disjoint mixtures — a train/eval split.
  long first_sample_index = 0;
  InventoryConfig inventory;
  MixtureConfig mixture;
};

struct ManifestEntry {
  std::string id;
  std::string features_path;  // relative to the dataset directory
  long frames = 0, dim = 0;
  SerializedReference reference;
  std::vector<std::pair<double, double>> token_times_sec;
  ProfileSet<double> profiles;
  std::vector<UtteranceMeta> utterances;
};

struct DatasetSummary {
  long n_samples = 0;
  std::string dir;
  std::vector<long> speaker_count_histogram;  // index = distinct speakers
};

// Writes out_dir/{vocab.txt, inventory.json, manifest.jsonl,
// features/sample_NNNNNN.bin} (ids carry the global stream index). Sample i
// uses rng seeded with seed + 1 + first_sample_index + i (the inventory uses
// the seed itself), so any sample is reproducible in isolation. jobs > 1
// renders samples concurrently; all outputs are byte-identical regardless
// of jobs. DataError: n_samples < 1, jobs < 1.
DatasetSummary build_training_set(const Vocabulary& vocab,
                                  const DatasetConfig& cfg,
                                  const std::string& out_dir, int jobs = 1);

std::vector<ManifestEntry> read_manifest(const std::string& path);

template <typename T>
MixtureSample<T> load_sample(const std::string& dataset_dir,
                             const ManifestEntry& e) {
  Features<float> raw = read_features(dataset_dir + "/" + e.features_path);
  if (raw.frames != e.frames || raw.dim != e.dim)
    throw DataError("load_sample: feature file shape disagrees with manifest");
  MixtureSample<T> out;
  out.features.frames = raw.frames;
  out.features.dim = raw.dim;
  out.features.frame_period = raw.frame_period;
  out.features.data.assign(raw.data.begin(), raw.data.end());
  out.reference = e.reference;
  for (const auto& p : e.profiles.profiles) {
    SpeakerProfile<T> q;
    q.id = p.id;
    q.vec.assign(p.vec.begin(), p.vec.end());
    out.profiles.profiles.push_back(std::move(q));
  }
  out.utterances = e.utterances;
  out.token_times_sec = e.token_times_sec;
  return out;
}

}  // namespace sadiar::synth
