#pragma once

// Domain types shared by the model, synthesis, pipeline and scoring layers.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sadiar/errors.hpp"

namespace sadiar {

// Acoustic feature sequence: `frames` rows of `dim` features, row-major.
// One row per analysis frame, `frame_period` seconds apart.
template <typename T = float>
struct Features {
  long frames = 0;
  long dim = 0;
  std::vector<T> data;  // frames * dim, row-major
  double frame_period = 0.01;

  const T* row(long t) const { return data.data() + t * dim; }
  T* row(long t) { return data.data() + t * dim; }

  void validate() const {
    if (frames < 1 || dim < 1 || long(data.size()) != frames * dim)
      throw DataError("features: inconsistent shape");
    for (T v : data)
      if (!std::isfinite(double(v))) throw DataError("features: non-finite value");
  }
};

// One enrolled speaker: a label and an embedding with nonzero norm.
template <typename T = float>
struct SpeakerProfile {
  std::string id;
  std::vector<T> vec;
};

// Ordered list of speaker profiles offered to the decoder. May contain more
// speakers than actually appear in the audio. Ids must be distinct and every
// vector must have nonzero norm (cosine similarity must be defined).
template <typename T = float>
struct ProfileSet {
  std::vector<SpeakerProfile<T>> profiles;

  long size() const { return long(profiles.size()); }
  long dim() const { return profiles.empty() ? 0 : long(profiles[0].vec.size()); }

  void validate() const {
    if (profiles.empty()) throw DataError("profile set: empty");
    for (size_t i = 0; i < profiles.size(); ++i) {
      const auto& p = profiles[i];
      if (p.vec.empty() || long(p.vec.size()) != dim())
        throw DataError("profile set: inconsistent embedding dims");
      double sq = 0.0;
      for (T v : p.vec) sq += double(v) * double(v);
      if (!(sq > 0.0) || !std::isfinite(sq))
        throw DataError("profile set: profile '" + p.id + "' has zero or non-finite norm");
      for (size_t j = i + 1; j < profiles.size(); ++j)
        if (profiles[j].id == p.id)
          throw DataError("profile set: duplicate id '" + p.id + "'");
    }
  }

  // Indices of profiles sorted by id. All internal reductions over profiles
  // run in this order so results do not depend on caller-side ordering.
  std::vector<int> canonical_order() const {
    std::vector<int> idx(profiles.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return profiles[size_t(a)].id < profiles[size_t(b)].id;
    });
    return idx;
  }
};

// Per-token start/end on the subsampled (encoder) frame axis. Special tokens
// carry no timing; both fields are -1 there.
struct TokenTiming {
  long start = -1;
  long end = -1;
  bool timed() const { return start >= 0 && end >= 0; }
};

// Training target: serialized token sequence ending in eos, one speaker index
// (into the ProfileSet, caller order) per token, and per-token timings.
struct SerializedReference {
  std::vector<int> tokens;
  std::vector<int> speakers;
  std::vector<TokenTiming> timings;
};

// Decoded output: tokens (terminated by eos unless the length cap hit),
// per-token speaker indices, per-token frame times from the alignment heads
// plus their conversion to seconds. Specials carry -1 frames / negative secs.
struct SerializedHypothesis {
  std::vector<int> tokens;
  std::vector<int> speakers;
  std::vector<long> start_frames;
  std::vector<long> end_frames;
  std::vector<double> start_secs;
  std::vector<double> end_secs;
};

}  // namespace sadiar
