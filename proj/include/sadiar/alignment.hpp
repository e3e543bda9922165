#pragma once

// Per-token start/end time estimation. Each ASR-decoder layer contributes a
// scaled dot-product attention between a learned projection of its
// post-self-attention residual state (the query) and a learned projection of
// the encoded frames (the keys); the per-layer logits are accumulated over
// all layers and a single softmax over frames yields the start (resp. end)
// posterior per token. Training adds a cross-entropy on these posteriors for
// every non-special token; inference takes the argmax frame.

#include <cmath>
#include <utility>
#include <vector>

#include "sadiar/model_types.hpp"
#include "sadiar/ops.hpp"

namespace sadiar {

// One ASR-decoder layer's four projections, each {time_dim, model_dim}.
template <typename T>
struct TimeHeadParams {
  num::Tensor<T> start_q, start_k, end_q, end_k;
};

// Pre-softmax frame logits, one row per token: sum over layers l of
// (queries_l * Wq_l^T)(enc * Wk_l^T)^T / sqrt(time_dim). The accumulation
// happens before the (single) softmax.
template <typename T>
struct TimeLogits {
  num::Tensor<T> start;  // {tokens, frames}
  num::Tensor<T> end;
};

template <typename T>
TimeLogits<T> time_logits(const std::vector<num::Tensor<T>>& layer_queries,
                          const num::Tensor<T>& enc,
                          const std::vector<TimeHeadParams<T>>& heads) {
  using namespace num;
  if (layer_queries.size() != heads.size() || heads.empty())
    throw InternalError("time_logits: layer count mismatch");
  const long time_dim = heads[0].start_q.shape[0];
  const T inv = T(1) / std::sqrt(T(time_dim));
  TimeLogits<T> out;
  for (size_t l = 0; l < heads.size(); ++l) {
    auto s = scale(matmul_nt(linear(layer_queries[l], heads[l].start_q),
                             linear(enc, heads[l].start_k)),
                   inv);
    auto e = scale(matmul_nt(linear(layer_queries[l], heads[l].end_q),
                             linear(enc, heads[l].end_k)),
                   inv);
    out.start = (l == 0) ? s : add(out.start, s);
    out.end = (l == 0) ? e : add(out.end, e);
  }
  return out;
}

// Sum over timed tokens of CE(start posterior, reference start frame) plus
// CE(end posterior, reference end frame). Special tokens (timing absent)
// contribute exactly zero. Out-of-range reference frames error.
template <typename T>
num::Tensor<T> time_ce_loss(const TimeLogits<T>& logits,
                            const std::vector<TokenTiming>& timings) {
  using namespace num;
  const long n = logits.start.rows(), frames = logits.start.cols();
  if (long(timings.size()) != n)
    throw InternalError("time_ce_loss: one timing per token required");
  std::vector<int> starts(size_t(n), 0), ends(size_t(n), 0);
  std::vector<T> w(size_t(n), T(0));
  for (long i = 0; i < n; ++i) {
    const auto& tm = timings[size_t(i)];
    if (!tm.timed()) continue;
    if (tm.start > tm.end || tm.end >= frames)
      throw DataError("time_ce_loss: reference frame out of range");
    starts[size_t(i)] = int(tm.start);
    ends[size_t(i)] = int(tm.end);
    w[size_t(i)] = T(1);
  }
  return add(ce_logits_sum(logits.start, starts, w),
             ce_logits_sum(logits.end, ends, w));
}

// Argmax of the start/end posteriors of one token, converted to seconds on
// the original frame axis. Ties break toward the lower frame; an end before
// the start is returned as-is (downstream filtering decides).
struct TokenTimeSec {
  long start_frame = 0;
  long end_frame = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

template <typename T>
TokenTimeSec infer_token_times(const std::vector<T>& alpha_start,
                               const std::vector<T>& alpha_end,
                               double frame_period, int subsample_factor) {
  auto arg = [](const std::vector<T>& a) {
    size_t best = 0;
    for (size_t i = 1; i < a.size(); ++i)
      if (a[i] > a[best]) best = i;
    return long(best);
  };
  TokenTimeSec t;
  t.start_frame = arg(alpha_start);
  t.end_frame = arg(alpha_end);
  t.start_sec = double(t.start_frame) * subsample_factor * frame_period;
  t.end_sec = double(t.end_frame) * subsample_factor * frame_period;
  return t;
}

// Number of encoder output frames for a given raw frame count: each of the
// two stride-2 convolutions takes ceil(n/2) frames, so the total subsampling
// is ceil(n / subsample_factor).
inline long encoded_frame_count(long input_frames, int subsample_factor) {
  return (input_frames + subsample_factor - 1) / subsample_factor;
}

// Map a token's span in seconds onto the subsampled frame axis: the start
// frame is the one containing the start time (floor); the end frame is the
// last frame that begins before the end time (ceil - 1), never earlier than
// the start frame. Both clamp into [0, enc_frames).
inline TokenTiming map_reference_frames(double start_sec, double end_sec,
                                        double frame_period,
                                        int subsample_factor,
                                        long enc_frames) {
  if (start_sec < 0.0 || end_sec < start_sec)
    throw DataError("map_reference_frames: negative or reversed span");
  const double step = frame_period * subsample_factor;
  TokenTiming tm;
  tm.start = std::min(std::max(long(std::floor(start_sec / step)), 0L),
                      enc_frames - 1);
  tm.end = std::min(std::max(long(std::ceil(end_sec / step)) - 1, tm.start),
                    enc_frames - 1);
  return tm;
}

}  // namespace sadiar
