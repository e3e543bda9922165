#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sadiar/alignment.hpp"
#include "sadiar/grad_check.hpp"
#include "sadiar/optimizer.hpp"
#include "sadiar/sa_asr.hpp"

using namespace sadiar;
using num::Shape;
using num::Tensor;

namespace {

Tensor<double> randt(Shape shape, std::mt19937_64& rng,
                     bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(size_t(num::numel(shape)));
  for (auto& x : v) x = dist(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

TimeHeadParams<double> zero_head(long time_dim, long model_dim) {
  TimeHeadParams<double> h;
  h.start_q = Tensor<double>::zeros({time_dim, model_dim});
  h.start_k = Tensor<double>::zeros({time_dim, model_dim});
  h.end_q = Tensor<double>::zeros({time_dim, model_dim});
  h.end_k = Tensor<double>::zeros({time_dim, model_dim});
  return h;
}

TimeHeadParams<double> random_head(long time_dim, long model_dim,
                                   std::mt19937_64& rng,
                                   bool requires_grad = false) {
  TimeHeadParams<double> h;
  h.start_q = randt({time_dim, model_dim}, rng, requires_grad);
  h.start_k = randt({time_dim, model_dim}, rng, requires_grad);
  h.end_q = randt({time_dim, model_dim}, rng, requires_grad);
  h.end_k = randt({time_dim, model_dim}, rng, requires_grad);
  return h;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.feat_dim = 3;
  c.model_dim = 8;
  c.profile_dim = 4;
  c.time_dim = 4;
  c.ff_dim = 16;
  c.enc_layers = 2;
  c.spk_enc_layers = 1;
  c.dec_layers = 2;
  c.spk_dec_layers = 1;
  c.heads = 2;
  return c;
}

template <typename T>
Features<T> random_features(long frames, long dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Features<T> f;
  f.frames = frames;
  f.dim = dim;
  f.data.resize(size_t(frames * dim));
  for (auto& v : f.data) v = T(dist(rng));
  return f;
}

template <typename T>
ProfileSet<T> random_profiles(long k, long dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  ProfileSet<T> ps;
  for (long i = 0; i < k; ++i) {
    SpeakerProfile<T> p;
    p.id = "spk" + std::to_string(i);
    p.vec.resize(size_t(dim));
    for (auto& v : p.vec) v = T(dist(rng));
    ps.profiles.push_back(std::move(p));
  }
  return ps;
}

SerializedReference two_speaker_reference(const Vocabulary& v, int n0, int n1,
                                          long enc_frames) {
  SerializedReference ref;
  auto push = [&](int tok, int spk, long a, long b) {
    ref.tokens.push_back(tok);
    ref.speakers.push_back(spk);
    TokenTiming tm;
    tm.start = a;
    tm.end = b;
    ref.timings.push_back(tm);
  };
  long fr = 0;
  for (int i = 0; i < n0; ++i) {
    push(i % 4, 0, fr % enc_frames, std::min(fr + 1, enc_frames - 1));
    fr = (fr + 1) % enc_frames;
  }
  ref.tokens.push_back(v.sc_id());
  ref.speakers.push_back(1);
  ref.timings.push_back({});
  for (int i = 0; i < n1; ++i) {
    push(i % 4, 1, fr % enc_frames, std::min(fr + 1, enc_frames - 1));
    fr = (fr + 1) % enc_frames;
  }
  ref.tokens.push_back(v.eos_id());
  ref.speakers.push_back(1);
  ref.timings.push_back({});
  return ref;
}

std::vector<double> tensor_row(const Tensor<double>& t, long r) {
  const long c = t.cols();
  return std::vector<double>(t.ptr() + r * c, t.ptr() + (r + 1) * c);
}

double grad_abs_sum(const Tensor<double>& t) {
  double s = 0.0;
  for (long i = 0; i < t.size(); ++i) s += std::abs((*t.grad)[size_t(i)]);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("alignment");

TEST_CASE("zero projections give exactly uniform frame posteriors") {
  std::mt19937_64 rng(11);
  const long td = 3, dm = 5, frames = 7, tokens = 3;
  std::vector<Tensor<double>> queries = {randt({tokens, dm}, rng),
                                         randt({tokens, dm}, rng)};
  auto enc = randt({frames, dm}, rng);
  std::vector<TimeHeadParams<double>> heads = {zero_head(td, dm),
                                               zero_head(td, dm)};
  auto tl = time_logits(queries, enc, heads);
  REQUIRE(tl.start.shape == Shape{tokens, frames});
  REQUIRE(tl.end.shape == Shape{tokens, frames});
  for (long i = 0; i < tl.start.size(); ++i) {
    CHECK((*tl.start.data)[size_t(i)] == 0.0);
    CHECK((*tl.end.data)[size_t(i)] == 0.0);
  }
  auto a_start = num::softmax_rows(tl.start);
  for (long i = 0; i < a_start.size(); ++i)
    CHECK((*a_start.data)[size_t(i)] ==
          doctest::Approx(1.0 / double(frames)).epsilon(1e-14));
  auto t = infer_token_times(tensor_row(a_start, 0), tensor_row(a_start, 1),
                             0.01, 4);
  CHECK(t.start_frame == 0);  // uniform ties break toward the lowest frame
  CHECK(t.end_frame == 0);
  CHECK(t.start_sec == 0.0);
  CHECK(t.end_sec == 0.0);
}

TEST_CASE("constructed projections peak at chosen frames") {
  // time_dim = model_dim = 2. The query row is [10, 0]. Start keys use the
  // identity projection, end keys swap the two coordinates, so an encoded
  // frame [5, 0] scores only under the start head and [0, 7] only under the
  // end head.
  const long td = 2, dm = 2, frames = 6;
  TimeHeadParams<double> h;
  h.start_q = Tensor<double>::from({td, dm}, {1, 0, 0, 1});
  h.start_k = Tensor<double>::from({td, dm}, {1, 0, 0, 1});
  h.end_q = Tensor<double>::from({td, dm}, {1, 0, 0, 1});
  h.end_k = Tensor<double>::from({td, dm}, {0, 1, 1, 0});
  auto q = Tensor<double>::from({1, dm}, {10, 0});
  std::vector<double> encv(size_t(frames * dm), 0.0);
  encv[3 * 2 + 0] = 5.0;  // frame 3: start peak
  encv[5 * 2 + 1] = 7.0;  // frame 5: end peak
  auto enc = Tensor<double>::from({frames, dm}, std::move(encv));

  auto tl = time_logits({q}, enc, {h});
  const double inv = 1.0 / std::sqrt(2.0);
  for (long f = 0; f < frames; ++f) {
    CHECK((*tl.start.data)[size_t(f)] == (f == 3 ? 50.0 * inv : 0.0));
    CHECK((*tl.end.data)[size_t(f)] == (f == 5 ? 70.0 * inv : 0.0));
  }
  auto a_s = num::softmax_rows(tl.start);
  auto a_e = num::softmax_rows(tl.end);
  auto t = infer_token_times(tensor_row(a_s, 0), tensor_row(a_e, 0), 0.01, 4);
  CHECK(t.start_frame == 3);
  CHECK(t.end_frame == 5);
  CHECK(t.start_sec == doctest::Approx(0.12));
  CHECK(t.end_sec == doctest::Approx(0.20));
}

TEST_CASE("logits accumulate across layers before the softmax") {
  std::mt19937_64 rng(23);
  const long td = 3, dm = 4, frames = 5, tokens = 2;
  std::vector<Tensor<double>> queries;
  std::vector<TimeHeadParams<double>> heads;
  for (int l = 0; l < 3; ++l) {
    queries.push_back(randt({tokens, dm}, rng));
    heads.push_back(random_head(td, dm, rng));
  }
  auto enc = randt({frames, dm}, rng);

  auto all = time_logits(queries, enc, heads);
  std::vector<TimeLogits<double>> single;
  for (int l = 0; l < 3; ++l)
    single.push_back(time_logits({queries[size_t(l)]}, enc,
                                 {heads[size_t(l)]}));
  for (long i = 0; i < all.start.size(); ++i) {
    // Same left-to-right accumulation order as the implementation.
    const double s = ((*single[0].start.data)[size_t(i)] +
                      (*single[1].start.data)[size_t(i)]) +
                     (*single[2].start.data)[size_t(i)];
    const double e = ((*single[0].end.data)[size_t(i)] +
                      (*single[1].end.data)[size_t(i)]) +
                     (*single[2].end.data)[size_t(i)];
    CHECK((*all.start.data)[size_t(i)] == s);
    CHECK((*all.end.data)[size_t(i)] == e);
  }

  // Zeroing every layer but one reduces the sum to that layer alone.
  std::vector<TimeHeadParams<double>> only1 = {zero_head(td, dm), heads[1],
                                               zero_head(td, dm)};
  auto one = time_logits(queries, enc, only1);
  for (long i = 0; i < one.start.size(); ++i) {
    CHECK((*one.start.data)[size_t(i)] == (*single[1].start.data)[size_t(i)]);
    CHECK((*one.end.data)[size_t(i)] == (*single[1].end.data)[size_t(i)]);
  }
}

TEST_CASE("logits are linear in the query projection") {
  std::mt19937_64 rng(31);
  const long td = 3, dm = 4, frames = 5, tokens = 2;
  std::vector<Tensor<double>> queries = {randt({tokens, dm}, rng)};
  std::vector<TimeHeadParams<double>> heads = {random_head(td, dm, rng)};
  auto enc = randt({frames, dm}, rng);
  auto base = time_logits(queries, enc, heads);

  for (auto& v : *heads[0].start_q.data) v *= 2.0;  // exact in binary
  auto doubled = time_logits(queries, enc, heads);
  for (long i = 0; i < base.start.size(); ++i) {
    CHECK((*doubled.start.data)[size_t(i)] ==
          2.0 * (*base.start.data)[size_t(i)]);
    CHECK((*doubled.end.data)[size_t(i)] == (*base.end.data)[size_t(i)]);
  }

  for (auto& v : *heads[0].start_q.data) v *= 1.5;  // now 3x the original
  auto tripled = time_logits(queries, enc, heads);
  for (long i = 0; i < base.start.size(); ++i)
    CHECK((*tripled.start.data)[size_t(i)] ==
          doctest::Approx(3.0 * (*base.start.data)[size_t(i)])
              .epsilon(1e-12));
}

TEST_CASE("layer count mismatches are rejected") {
  std::mt19937_64 rng(37);
  const long td = 2, dm = 3;
  std::vector<Tensor<double>> queries = {randt({2, dm}, rng)};
  auto enc = randt({4, dm}, rng);
  std::vector<TimeHeadParams<double>> two = {random_head(td, dm, rng),
                                             random_head(td, dm, rng)};
  CHECK_THROWS_AS(time_logits(queries, enc, two), InternalError);
  CHECK_THROWS_AS(time_logits({}, enc, {}), InternalError);
}

TEST_CASE("cross entropy: uniform posteriors, near-one-hot, and errors") {
  const long frames = 25;
  auto zeros = [&](long tokens) {
    TimeLogits<double> tl;
    tl.start = Tensor<double>::zeros({tokens, frames});
    tl.end = Tensor<double>::zeros({tokens, frames});
    return tl;
  };

  // One timed token against uniform posteriors costs ln(frames) for the
  // start plus ln(frames) for the end.
  {
    std::vector<TokenTiming> tm(3);
    tm[0] = TokenTiming{4, 9};
    auto loss = time_ce_loss(zeros(3), tm);
    CHECK(loss.value() ==
          doctest::Approx(2.0 * std::log(25.0)).epsilon(1e-12));
  }
  {  // two timed + one untimed
    std::vector<TokenTiming> tm(3);
    tm[0] = TokenTiming{0, 0};
    tm[2] = TokenTiming{24, 24};
    auto loss = time_ce_loss(zeros(3), tm);
    CHECK(loss.value() ==
          doctest::Approx(4.0 * std::log(25.0)).epsilon(1e-12));
  }
  {  // special-only sequences contribute exactly zero
    std::vector<TokenTiming> tm(2);
    auto loss = time_ce_loss(zeros(2), tm);
    CHECK(loss.value() == 0.0);
  }
  {  // sharp logits at the reference frames cost ~0
    TimeLogits<double> tl = zeros(1);
    (*tl.start.data)[7] = 80.0;
    (*tl.end.data)[12] = 80.0;
    std::vector<TokenTiming> tm = {TokenTiming{7, 12}};
    auto loss = time_ce_loss(tl, tm);
    CHECK(loss.value() >= 0.0);
    CHECK(loss.value() < 1e-12);
  }
  {  // out-of-range or reversed reference frames
    std::vector<TokenTiming> bad_end = {TokenTiming{0, 25}};
    CHECK_THROWS_AS(time_ce_loss(zeros(1), bad_end), DataError);
    std::vector<TokenTiming> reversed = {TokenTiming{5, 3}};
    CHECK_THROWS_AS(time_ce_loss(zeros(1), reversed), DataError);
  }
  {  // one timing per token is required
    std::vector<TokenTiming> three(3);
    CHECK_THROWS_AS(time_ce_loss(zeros(2), three), InternalError);
  }
}

TEST_CASE("analytic gradients of the time pathway match finite differences") {
  std::mt19937_64 rng(41);
  const long td = 3, dm = 4, frames = 5, tokens = 3;
  std::vector<Tensor<double>> queries = {randt({tokens, dm}, rng, true),
                                         randt({tokens, dm}, rng, true)};
  auto enc = randt({frames, dm}, rng, true);
  std::vector<TimeHeadParams<double>> heads = {random_head(td, dm, rng, true),
                                               random_head(td, dm, rng, true)};
  std::vector<TokenTiming> tm(3);
  tm[0] = TokenTiming{1, 3};
  tm[2] = TokenTiming{0, 4};

  auto fn = [&]() { return time_ce_loss(time_logits(queries, enc, heads), tm); };
  std::vector<Tensor<double>> params = {queries[0], queries[1], enc};
  for (auto& h : heads) {
    params.push_back(h.start_q);
    params.push_back(h.start_k);
    params.push_back(h.end_q);
    params.push_back(h.end_k);
  }
  auto rep = num::grad_check<double>(fn, params);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("argmax frames convert to seconds on the original frame axis") {
  auto one_hot = [](long n, long peak) {
    std::vector<double> v(size_t(n), 0.01);
    v[size_t(peak)] = 0.9;
    return v;
  };
  {
    auto t = infer_token_times(one_hot(20, 5), one_hot(20, 12), 0.01, 4);
    CHECK(t.start_frame == 5);
    CHECK(t.end_frame == 12);
    CHECK(t.start_sec == doctest::Approx(0.20));
    CHECK(t.end_sec == doctest::Approx(0.48));
  }
  {  // peak at frame zero maps to time zero
    auto t = infer_token_times(one_hot(8, 0), one_hot(8, 0), 0.01, 4);
    CHECK(t.start_frame == 0);
    CHECK(t.start_sec == 0.0);
    CHECK(t.end_sec == 0.0);
  }
  {  // an end before the start is reported as-is
    auto t = infer_token_times(one_hot(10, 7), one_hot(10, 2), 0.01, 4);
    CHECK(t.start_frame == 7);
    CHECK(t.end_frame == 2);
    CHECK(t.end_sec < t.start_sec);
  }
  {  // ties break toward the lowest frame
    std::vector<double> tie = {0.3, 0.3, 0.2, 0.2};
    std::vector<double> tie_late = {0.1, 0.4, 0.4, 0.1};
    auto t = infer_token_times(tie, tie_late, 0.01, 4);
    CHECK(t.start_frame == 0);
    CHECK(t.end_frame == 1);
  }
  {  // frame period and subsampling both scale the axis
    auto t = infer_token_times(one_hot(6, 3), one_hot(6, 3), 0.02, 2);
    CHECK(t.start_sec == doctest::Approx(0.12));
  }
}

TEST_CASE("reference spans map onto the subsampled frame grid") {
  const double fp = 0.01;
  const int sub = 4;  // one grid step = 0.04 s
  {
    auto tm = map_reference_frames(0.20, 0.50, fp, sub, 25);
    CHECK(tm.start == 5);
    CHECK(tm.end == 12);
  }
  {  // zero-length span at zero
    auto tm = map_reference_frames(0.0, 0.0, fp, sub, 25);
    CHECK(tm.start == 0);
    CHECK(tm.end == 0);
  }
  {  // span ending exactly at the audio end stays on the last frame
    auto tm = map_reference_frames(0.90, 1.00, fp, sub, 25);
    CHECK(tm.start == 22);
    CHECK(tm.end == 24);
  }
  {  // spans beyond the audio clamp to the last frame
    auto tm = map_reference_frames(0.90, 2.00, fp, sub, 25);
    CHECK(tm.start == 22);
    CHECK(tm.end == 24);
    auto tm2 = map_reference_frames(1.20, 1.30, fp, sub, 25);
    CHECK(tm2.start == 24);
    CHECK(tm2.end == 24);
  }
  {  // an end on a grid boundary never precedes its start
    auto tm = map_reference_frames(0.04, 0.04, fp, sub, 25);
    CHECK(tm.start == 1);
    CHECK(tm.end == 1);
  }
  CHECK_THROWS_AS(map_reference_frames(-0.1, 0.2, fp, sub, 25), DataError);
  CHECK_THROWS_AS(map_reference_frames(0.5, 0.4, fp, sub, 25), DataError);
}

TEST_CASE("with zero time projections the combined loss adds the uniform "
          "time term") {
  auto cfg = tiny_config();
  auto vocab = toy_vocabulary(4);
  SaAsrModel<double> m(cfg, vocab, 51);
  for (auto& [name, t] : m.params().items())
    if (name.rfind("time.", 0) == 0)
      std::fill(t.data->begin(), t.data->end(), 0.0);

  auto x = random_features<double>(12, cfg.feat_dim, 52);  // 3 encoded frames
  auto ps = random_profiles<double>(2, cfg.profile_dim, 53);
  auto ref = two_speaker_reference(vocab, 3, 2, 3);  // 5 timed tokens

  auto out = m.losses(x, ps, ref);
  CHECK(out.time.value() ==
        doctest::Approx(10.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(out.combined.value() == out.joint.value() + out.time.value());
}

TEST_CASE("combined loss reaches the vocabulary head and the time heads") {
  auto cfg = tiny_config();
  auto vocab = toy_vocabulary(4);
  SaAsrModel<double> m(cfg, vocab, 61);
  auto x = random_features<double>(12, cfg.feat_dim, 62);
  auto ps = random_profiles<double>(2, cfg.profile_dim, 63);
  auto ref = two_speaker_reference(vocab, 3, 2, 3);

  m.params().zero_grad();
  auto loss = m.combined_loss(x, ps, ref);
  num::backward(loss);
  CHECK(grad_abs_sum(m.params().at("dec.out.w")) > 0.0);
  CHECK(grad_abs_sum(m.params().at("enc.l0.attn.wq")) > 0.0);
  CHECK(grad_abs_sum(m.params().at("time.l0.start.q")) > 0.0);
  CHECK(grad_abs_sum(m.params().at("time.l1.end.q")) > 0.0);
  // With the query projections still at their zero initialization the key
  // projections sit in a flat direction: their gradient is exactly zero.
  CHECK(grad_abs_sum(m.params().at("time.l0.start.k")) == 0.0);

  // One optimizer step moves the queries off zero, which unlocks the keys.
  num::AdamConfig ac;
  ac.lr = 1e-2;
  ac.warmup_steps = 1;
  num::AdamState<double> st;
  auto tensors = m.params().tensors();
  num::adam_step(tensors, st, ac);
  m.params().zero_grad();
  auto loss2 = m.combined_loss(x, ps, ref);
  num::backward(loss2);
  CHECK(grad_abs_sum(m.params().at("time.l0.start.k")) > 0.0);
}

TEST_CASE("prefix freezing updates only the time parameters") {
  auto cfg = tiny_config();
  auto vocab = toy_vocabulary(4);
  SaAsrModel<double> m(cfg, vocab, 71);
  auto x = random_features<double>(12, cfg.feat_dim, 72);
  auto ps = random_profiles<double>(2, cfg.profile_dim, 73);
  auto ref = two_speaker_reference(vocab, 3, 2, 3);

  std::vector<std::string> names;
  std::vector<std::vector<double>> before;
  for (auto& [name, t] : m.params().items()) {
    names.push_back(name);
    before.push_back(*t.data);
  }
  auto is_time = [&](size_t i) { return names[i].rfind("time.", 0) == 0; };

  num::AdamConfig ac;
  ac.lr = 1e-2;
  ac.warmup_steps = 1;
  num::AdamState<double> st;
  auto tensors = m.params().tensors();
  for (int step = 0; step < 3; ++step) {
    m.params().zero_grad();
    auto loss = m.combined_loss(x, ps, ref);
    num::backward(loss);
    num::adam_step(tensors, st, ac, is_time);
  }

  bool time_q_moved = false, time_k_moved = false;
  for (size_t i = 0; i < names.size(); ++i) {
    const auto& now = *m.params().items()[i].second.data;
    if (!is_time(i)) {
      CHECK(now == before[i]);  // frozen parameters are bitwise unchanged
    } else if (now != before[i]) {
      if (names[i].back() == 'q') time_q_moved = true;
      if (names[i].back() == 'k') time_k_moved = true;
    }
  }
  CHECK(time_q_moved);
  CHECK(time_k_moved);
}

TEST_SUITE_END();
