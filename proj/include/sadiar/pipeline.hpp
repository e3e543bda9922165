#pragma once

// Long-form diarization pipeline: energy-based speech detection, sliding
// window speaker embeddings, eigengap spectral clustering with automatic
// speaker counting, centroid profiles, silence-midpoint chunking, per-chunk
// decoding, and token-to-segment merging.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sadiar/errors.hpp"
#include "sadiar/model_types.hpp"
#include "sadiar/sa_asr.hpp"
#include "sadiar/vocab.hpp"

namespace sadiar {

// --------------------------------------------------------------- types ----

struct SpeechRegion {
  double start_sec = 0.0;
  double end_sec = 0.0;
};
using SpeechRegionList = std::vector<SpeechRegion>;

struct DiarSegment {
  std::string speaker;
  double start_sec = 0.0;
  double end_sec = 0.0;
};
using DiarSegmentList = std::vector<DiarSegment>;

struct PipelineConfig {
  double window_sec = 1.5;   // embedding window length
  double hop_sec = 0.75;     // embedding window shift (<= window)
  double max_chunk_sec = 20.0;
  double merge_gap_m = 2.0;  // same-speaker tokens closer than this merge
  double max_token_dur_n = 2.0;  // tokens at least this long are dropped
  int oracle_speakers = 0;   // 0: estimate the count from the eigengap
  int max_speakers = 8;      // cap when estimating
  double energy_threshold = 0.5;  // frame norm strictly above -> speech
  double min_sil_sec = 0.3;  // silences shorter than this are bridged
  long max_decode_tokens = 64;  // per-chunk decoding cap

  void validate() const;  // DataError on out-of-range values
};

// ------------------------------------------------------ speech regions ----

// Core rule on precomputed frame norms: frames strictly above the threshold
// form runs; silences shorter than min_sil_sec between runs are bridged.
// Region bounds are frame-grid seconds: [first * period, (last + 1) * period].
SpeechRegionList detect_speech_from_norms(const std::vector<double>& frame_norm,
                                          double frame_period,
                                          double energy_threshold,
                                          double min_sil_sec);

template <typename T>
SpeechRegionList detect_speech(const Features<T>& f, double energy_threshold,
                               double min_sil_sec) {
  f.validate();
  std::vector<double> norm(size_t(f.frames), 0.0);
  for (long t = 0; t < f.frames; ++t) {
    double sq = 0.0;
    const T* row = f.row(t);
    for (long d = 0; d < f.dim; ++d) sq += double(row[d]) * double(row[d]);
    norm[size_t(t)] = std::sqrt(sq);
  }
  return detect_speech_from_norms(norm, f.frame_period, energy_threshold,
                                  min_sil_sec);
}

// --------------------------------------------------- window embeddings ----

struct WindowEmbedding {
  double start_sec = 0.0;
  double end_sec = 0.0;
  double center_sec = 0.0;
  std::vector<double> vec;
};

// Maps a half-open frame window of the features to an embedding vector.
template <typename T>
using Embedder =
    std::function<std::vector<double>(const Features<T>&, long, long)>;

// Windows tile each region from its start at hop intervals; after the full
// windows, one partial tail window up to the region end is kept when it is
// at least half a window long (a region shorter than that yields nothing).
// Windows never cross region boundaries.
template <typename T>
std::vector<WindowEmbedding> window_embeddings(const Features<T>& f,
                                               const SpeechRegionList& regions,
                                               double window_sec,
                                               double hop_sec,
                                               const Embedder<T>& embedder) {
  if (!(window_sec > 0.0) || !(hop_sec > 0.0) || hop_sec > window_sec)
    throw DataError("window_embeddings: need 0 < hop <= window");
  if (!embedder) throw DataError("window_embeddings: null embedder");
  constexpr double kTol = 1e-9;
  std::vector<WindowEmbedding> out;
  for (const auto& r : regions) {
    std::vector<std::pair<double, double>> spans;
    double start = r.start_sec;
    while (start + window_sec <= r.end_sec + kTol) {
      spans.push_back({start, std::min(start + window_sec, r.end_sec)});
      start += hop_sec;
    }
    const double covered = spans.empty() ? r.start_sec : spans.back().second;
    if (covered < r.end_sec - kTol) {
      const double tail_start = spans.empty() ? r.start_sec : start;
      if (r.end_sec - tail_start >= window_sec / 2.0 - kTol)
        spans.push_back({tail_start, r.end_sec});
    }
    for (const auto& [a, b] : spans) {
      long fb = std::lround(a / f.frame_period);
      long fe = std::lround(b / f.frame_period);
      fb = std::max(0L, std::min(fb, f.frames));
      fe = std::max(0L, std::min(fe, f.frames));
      if (fe <= fb) continue;
      WindowEmbedding w;
      w.start_sec = a;
      w.end_sec = b;
      w.center_sec = 0.5 * (a + b);
      w.vec = embedder(f, fb, fe);
      out.push_back(std::move(w));
    }
  }
  return out;
}

// ----------------------------------------------------------- clustering ----

struct ClusterResult {
  std::vector<int> labels;  // one per embedding, 0..num_speakers-1
  int num_speakers = 0;
  int chosen_p = 0;             // neighbour count picked (0: fallback)
  double eigengap_ratio = 0.0;  // normalized gap at the chosen p
};

// Cosine affinity (negatives clamped to zero), sparsified to each row's p
// strongest neighbours and symmetrized. Each neighbour count p is scored by
// the density-penalized normalized eigengap r = p / (n * g) with
// g = (lambda_{k+1} - lambda_k) / lambda_max, and the smallest r wins; the
// spectrum is that of diag(full affinity degrees) - sparsified affinity, so
// discarding strong within-cluster edges spoils the gap instead of faking
// one. When oracle_count <= 0, k is the sparsified graph's component count
// (capped by max_speakers), otherwise the oracle value. Points are then
// k-means clustered on the k smallest-eigenvalue eigenvectors, row
// normalized (10 fixed-seed restarts, best inertia). Cluster ids are
// renumbered by first appearance. An oracle count larger than the embedding
// count is reduced to it.
ClusterResult nme_spectral_cluster(
    const std::vector<std::vector<double>>& embeddings, int oracle_count,
    int max_speakers = 8);

// Per-cluster unit-normalized means, ids "spk0".."spk{k-1}".
// DataError: empty cluster, label outside [0, k), zero-norm mean.
ProfileSet<double> cluster_centroids(
    const std::vector<std::vector<double>>& embeddings,
    const std::vector<int>& labels, int num_speakers);

// ------------------------------------------------------------- chunking ----

// Chunks cover [first region start, last region end] with boundaries at the
// midpoints of the silences between regions; any piece longer than
// max_chunk_sec is split into equal parts. Empty input -> empty output.
std::vector<std::pair<double, double>> chunk_audio(
    const SpeechRegionList& regions, double max_chunk_sec);

// --------------------------------------------------- segment conversion ----

// Hypothesis tokens (absolute seconds) to per-speaker segments: drop tokens
// that are untimed (negative start or end), reversed (end < start), or at
// least max_token_dur_n long; then per speaker, in start order, merge
// consecutive tokens whose gap is under merge_gap_m; finally drop segments
// that end where they start. speaker_ids[i] names hypothesis speaker i.
// Output is sorted by (start, speaker).
DiarSegmentList tokens_to_segments(const SerializedHypothesis& hyp,
                                   const std::vector<std::string>& speaker_ids,
                                   double merge_gap_m, double max_token_dur_n);

// ---------------------------------------------------------- transcripts ----

struct AttributedWord {
  std::string token;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

struct Transcript {
  std::map<std::string, std::vector<AttributedWord>> by_speaker;
};

// One line per segment, in list order:
// SPEAKER <rec> 1 <start> <dur> <NA> <NA> <speaker> <NA> <NA>
// with start/duration as fixed-point seconds, two decimals.
std::string to_rttm(const DiarSegmentList& segments,
                    const std::string& recording_id);

// JSON object {speaker: [{"token", "start", "end"}, ...]}, 2-space indent.
std::string to_transcript_json(const Transcript& t);

// ------------------------------------------------------------- pipeline ----

struct DiarizeResult {
  SpeechRegionList regions;
  std::vector<std::pair<double, double>> chunks;
  ProfileSet<double> centroids;  // empty when no speech was found
  int num_speakers = 0;
  DiarSegmentList segments;
  Transcript transcript;
};

namespace detail {
template <typename T>
Features<T> slice_frames(const Features<T>& f, long begin, long end) {
  Features<T> out;
  out.frames = end - begin;
  out.dim = f.dim;
  out.frame_period = f.frame_period;
  out.data.assign(f.data.begin() + begin * f.dim, f.data.begin() + end * f.dim);
  return out;
}
}  // namespace detail

// Full pipeline: detect speech, embed windows, cluster, build centroid
// profiles, chunk, decode each chunk against the centroids, convert tokens
// to segments. Token times are shifted by the chunk start and clamped to
// the chunk bounds. Chunks too short to encode are skipped. No speech, or
// no window fitting any region, yields empty outputs.
template <typename T>
DiarizeResult diarize_recording(const Features<T>& x,
                                const SaAsrModel<T>& model,
                                const PipelineConfig& cfg,
                                const Embedder<T>& embedder) {
  cfg.validate();
  DiarizeResult res;
  res.regions = detect_speech(x, cfg.energy_threshold, cfg.min_sil_sec);
  if (res.regions.empty()) return res;
  res.chunks = chunk_audio(res.regions, cfg.max_chunk_sec);

  auto windows = window_embeddings(x, res.regions, cfg.window_sec,
                                   cfg.hop_sec, embedder);
  if (windows.empty()) return res;
  std::vector<std::vector<double>> emb;
  emb.reserve(windows.size());
  for (auto& w : windows) emb.push_back(std::move(w.vec));

  auto cl = nme_spectral_cluster(emb, cfg.oracle_speakers, cfg.max_speakers);
  res.num_speakers = cl.num_speakers;
  res.centroids = cluster_centroids(emb, cl.labels, cl.num_speakers);

  ProfileSet<T> profiles;
  std::vector<std::string> ids;
  for (const auto& p : res.centroids.profiles) {
    SpeakerProfile<T> q;
    q.id = p.id;
    q.vec.assign(p.vec.begin(), p.vec.end());
    profiles.profiles.push_back(std::move(q));
    ids.push_back(p.id);
  }

  const Vocabulary& vocab = model.vocab();
  SerializedHypothesis all;  // regular tokens only, absolute clamped times
  for (const auto& [c0, c1] : res.chunks) {
    long fb = std::max(0L, std::min(std::lround(c0 / x.frame_period),
                                    x.frames));
    long fe = std::max(0L, std::min(std::lround(c1 / x.frame_period),
                                    x.frames));
    if (fe - fb < ModelConfig::subsample_factor) continue;
    auto piece = detail::slice_frames(x, fb, fe);
    auto hyp = model.decode(piece, profiles, cfg.max_decode_tokens);
    for (size_t i = 0; i < hyp.tokens.size(); ++i) {
      if (vocab.is_special(hyp.tokens[i])) continue;
      auto clamp = [&](double t) { return std::max(c0, std::min(c1, t)); };
      const bool timed = hyp.start_secs[i] >= 0.0 && hyp.end_secs[i] >= 0.0;
      all.tokens.push_back(hyp.tokens[i]);
      all.speakers.push_back(hyp.speakers[i]);
      all.start_frames.push_back(hyp.start_frames[i]);
      all.end_frames.push_back(hyp.end_frames[i]);
      all.start_secs.push_back(timed ? clamp(c0 + hyp.start_secs[i]) : -1.0);
      all.end_secs.push_back(timed ? clamp(c0 + hyp.end_secs[i]) : -1.0);
    }
  }

  res.segments =
      tokens_to_segments(all, ids, cfg.merge_gap_m, cfg.max_token_dur_n);
  for (size_t i = 0; i < all.tokens.size(); ++i) {
    AttributedWord w;
    w.token = vocab.token(all.tokens[i]);
    w.start_sec = all.start_secs[i];
    w.end_sec = all.end_secs[i];
    res.transcript.by_speaker[ids[size_t(all.speakers[i])]].push_back(w);
  }
  for (auto& [id, words] : res.transcript.by_speaker)
    std::stable_sort(words.begin(), words.end(),
                     [](const AttributedWord& a, const AttributedWord& b) {
                       return a.start_sec < b.start_sec;
                     });
  return res;
}

}  // namespace sadiar
