#pragma once

// End-to-end speaker-attributed recognizer. One acoustic front-end (two
// stride-2 subsampling convolutions, total factor 4) feeds two transformer
// encoders: a recognition encoder and a speaker encoder. A speaker decoder
// attends over both encodings and emits one query vector per output token;
// cosine similarity between the query and the enrolled profiles gives a
// speaker posterior, whose weighted profile average is injected into the
// first recognition-decoder layer. The recognition decoder emits the token
// posterior, and per-layer time heads estimate each token's start/end frame
// from its post-self-attention states (see alignment.hpp).
//
// All reductions over profiles run in a canonical (id-sorted) order, so every
// output is invariant to the caller's profile ordering: reordering the
// profile set permutes the speaker posterior and speaker choices accordingly
// and leaves tokens and times bit-identical.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sadiar/alignment.hpp"
#include "sadiar/checkpoint.hpp"
#include "sadiar/model_types.hpp"
#include "sadiar/ops.hpp"
#include "sadiar/param_store.hpp"
#include "sadiar/sot.hpp"
#include "sadiar/vocab.hpp"

namespace sadiar {

struct ModelConfig {
  long feat_dim = 16;     // acoustic feature dim
  long model_dim = 64;    // transformer width
  long profile_dim = 16;  // speaker embedding dim
  long time_dim = 16;     // time-head subspace dim
  long ff_dim = 256;      // feed-forward hidden dim
  int enc_layers = 2;
  int spk_enc_layers = 2;
  int dec_layers = 2;
  int spk_dec_layers = 2;
  int heads = 4;
  static constexpr int subsample_factor = 4;  // two stride-2 stages

  void validate() const {
    if (feat_dim < 1 || model_dim < 1 || profile_dim < 1 || time_dim < 1 ||
        ff_dim < 1 || enc_layers < 1 || spk_enc_layers < 1 || dec_layers < 1 ||
        spk_dec_layers < 1 || heads < 1)
      throw DataError("model config: all dims and layer counts must be >= 1");
    if (model_dim % heads != 0)
      throw DataError("model config: heads must divide model_dim");
  }
};

inline nlohmann::json config_json(const ModelConfig& c) {
  return {{"feat_dim", c.feat_dim},
          {"model_dim", c.model_dim},
          {"profile_dim", c.profile_dim},
          {"time_dim", c.time_dim},
          {"ff_dim", c.ff_dim},
          {"enc_layers", c.enc_layers},
          {"spk_enc_layers", c.spk_enc_layers},
          {"dec_layers", c.dec_layers},
          {"spk_dec_layers", c.spk_dec_layers},
          {"heads", c.heads}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.feat_dim = j.at("feat_dim").get<long>();
  c.model_dim = j.at("model_dim").get<long>();
  c.profile_dim = j.at("profile_dim").get<long>();
  c.time_dim = j.at("time_dim").get<long>();
  c.ff_dim = j.at("ff_dim").get<long>();
  c.enc_layers = j.at("enc_layers").get<int>();
  c.spk_enc_layers = j.at("spk_enc_layers").get<int>();
  c.dec_layers = j.at("dec_layers").get<int>();
  c.spk_dec_layers = j.at("spk_dec_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.validate();
  return c;
}

// Profiles stacked in canonical (id-sorted) row order, plus the index maps
// between caller order and canonical order.
template <typename T>
struct CanonicalProfiles {
  num::Tensor<T> mat;                 // {K, profile_dim}, no grad
  std::vector<int> canon;             // canon[j] = caller index of row j
  std::vector<int> caller_to_canon;   // inverse
};

template <typename T>
CanonicalProfiles<T> canonical_profiles(const ProfileSet<T>& profiles) {
  CanonicalProfiles<T> out;
  out.canon = profiles.canonical_order();
  const long k = profiles.size(), d = profiles.dim();
  out.caller_to_canon.resize(size_t(k));
  std::vector<T> flat(size_t(k * d));
  for (long j = 0; j < k; ++j) {
    out.caller_to_canon[size_t(out.canon[size_t(j)])] = int(j);
    const auto& v = profiles.profiles[size_t(out.canon[size_t(j)])].vec;
    std::copy(v.begin(), v.end(), flat.begin() + j * d);
  }
  out.mat = num::Tensor<T>::from({k, d}, std::move(flat));
  return out;
}

// Standalone profile attention: speaker posterior over the profile set for
// one query (caller order) and the posterior-weighted profile average.
template <typename T>
struct ProfileAttentionResult {
  std::vector<T> beta;
  std::vector<T> dbar;
};

template <typename T>
ProfileAttentionResult<T> profile_attention(const std::vector<T>& q,
                                            const ProfileSet<T>& profiles) {
  num::NoGradGuard ng;
  profiles.validate();
  if (long(q.size()) != profiles.dim())
    throw DataError("profile_attention: query dim mismatch");
  auto cp = canonical_profiles(profiles);
  auto qt = num::Tensor<T>::from({1, long(q.size())}, q);
  auto beta_canon = num::softmax_rows(num::cosine_rows(qt, cp.mat));
  const long k = profiles.size(), d = profiles.dim();
  ProfileAttentionResult<T> out;
  out.beta.resize(size_t(k));
  for (long caller = 0; caller < k; ++caller)
    out.beta[size_t(caller)] =
        (*beta_canon.data)[size_t(cp.caller_to_canon[size_t(caller)])];
  out.dbar.assign(size_t(d), T(0));
  for (long j = 0; j < k; ++j) {
    const T b = (*beta_canon.data)[size_t(j)];
    const T* row = cp.mat.ptr() + j * d;
    for (long t = 0; t < d; ++t) out.dbar[size_t(t)] += b * row[t];
  }
  return out;
}

template <typename T>
class SaAsrModel {
 public:
  using Tensor = num::Tensor<T>;
  using Shape = num::Shape;

  SaAsrModel(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
      : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    build_params(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  num::ParamStore<T>& params() { return params_; }
  const num::ParamStore<T>& params() const { return params_; }

  // Output frame count of the subsampling front-end for a given input length.
  static long encoded_frames(long input_frames) {
    return encoded_frame_count(input_frames, ModelConfig::subsample_factor);
  }

  struct Encoded {
    Tensor h_asr;  // {l_h, model_dim}
    Tensor h_spk;  // {l_h, model_dim}
    long l_h = 0;
  };

  // Shared front-end, then the two encoder stacks.
  Encoded encode(const Features<T>& x) const {
    x.validate();
    if (x.dim != cfg_.feat_dim)
      throw DataError("encode: feature dim " + std::to_string(x.dim) +
                      " != configured " + std::to_string(cfg_.feat_dim));
    if (x.frames < ModelConfig::subsample_factor)
      throw DataError("encode: need at least " +
                      std::to_string(int(ModelConfig::subsample_factor)) +
                      " frames, got " + std::to_string(x.frames));
    using namespace num;
    auto x0 = Tensor::from({x.frames, x.dim}, x.data);
    auto c1 = gelu(conv1d_s2(x0, fe_conv1_w_, fe_conv1_b_));
    auto c2 = gelu(conv1d_s2(c1, fe_conv2_w_, fe_conv2_b_));
    auto h0 = add(c2, sinusoidal_pe<T>(c2.shape[0], cfg_.model_dim));
    Encoded out;
    out.l_h = c2.shape[0];
    out.h_asr = run_encoder(h0, enc_);
    out.h_spk = run_encoder(h0, spk_enc_);
    return out;
  }

  // Teacher-forced full-sequence pass: position j is predicted from the
  // reference prefix tokens[0..j-1] (the start symbol is eos).
  struct TeacherOut {
    Tensor token_logits;      // {N, |V|}
    Tensor spk_scores_canon;  // {N, K} cosine scores, canonical order
    Tensor beta_caller;       // {N, K} speaker posterior, caller order
    Tensor dbar;              // {N, profile_dim}
    TimeLogits<T> time;       // {N, l_h} each
    std::vector<int> canon, caller_to_canon;
    long l_h = 0;
  };

  TeacherOut teacher_forward(const Features<T>& x,
                             const ProfileSet<T>& profiles,
                             const std::vector<int>& tokens) const {
    using namespace num;
    profiles.validate();
    if (profiles.dim() != cfg_.profile_dim)
      throw DataError("profiles: dim mismatch");
    if (tokens.empty()) throw DataError("teacher_forward: empty sequence");
    for (int t : tokens)
      if (t < 0 || t >= vocab_.size())
        throw DataError("teacher_forward: token index out of range");
    Encoded enc = encode(x);
    std::vector<int> in_ids(tokens.size());
    in_ids[0] = vocab_.eos_id();
    for (size_t i = 1; i < tokens.size(); ++i) in_ids[i] = tokens[i - 1];

    auto q = speaker_queries(in_ids, enc);
    auto cp = canonical_profiles(profiles);
    TeacherOut out;
    out.spk_scores_canon = cosine_rows(q, cp.mat);
    auto beta_canon = softmax_rows(out.spk_scores_canon);
    out.beta_caller = permute_cols(beta_canon, cp.caller_to_canon);
    out.dbar = matmul(beta_canon, cp.mat);
    auto dec = asr_decode(in_ids, enc.h_asr, out.dbar);
    out.token_logits = dec.logits;
    out.time = time_logits(dec.zbars, enc.h_asr, time_heads_);
    out.canon = std::move(cp.canon);
    out.caller_to_canon = std::move(cp.caller_to_canon);
    out.l_h = enc.l_h;
    return out;
  }

  struct LossOut {
    Tensor joint;     // token CE + speaker CE, all positions
    Tensor time;      // start/end CE, timed tokens only
    Tensor combined;  // joint + time, equal weight
    TeacherOut fw;
  };

  LossOut losses(const Features<T>& x, const ProfileSet<T>& profiles,
                 const SerializedReference& ref) const {
    using namespace num;
    x.validate();
    validate_reference(ref, vocab_, profiles.size(), encoded_frames(x.frames));
    LossOut out;
    out.fw = teacher_forward(x, profiles, ref.tokens);
    std::vector<int> canon_targets(ref.speakers.size());
    for (size_t i = 0; i < ref.speakers.size(); ++i)
      canon_targets[i] = out.fw.caller_to_canon[size_t(ref.speakers[i])];
    auto token_ce = ce_logits_sum(out.fw.token_logits, ref.tokens);
    auto spk_ce = ce_logits_sum(out.fw.spk_scores_canon, canon_targets);
    out.joint = add(token_ce, spk_ce);
    out.time = time_ce_loss(out.fw.time, ref.timings);
    out.combined = add(out.joint, out.time);
    return out;
  }

  Tensor joint_nll_loss(const Features<T>& x, const ProfileSet<T>& profiles,
                        const SerializedReference& ref) const {
    return losses(x, profiles, ref).joint;
  }
  Tensor combined_loss(const Features<T>& x, const ProfileSet<T>& profiles,
                       const SerializedReference& ref) const {
    return losses(x, profiles, ref).combined;
  }

  struct DecodeTrace {
    SerializedHypothesis hyp;
    std::vector<std::vector<T>> betas;  // per emitted token, caller order
    long l_h = 0;
  };

  // Greedy joint decoding: per step, speaker query -> speaker posterior ->
  // argmax speaker -> weighted profile -> token posterior -> argmax token,
  // plus start/end frames from the time heads. Stops at eos or max_len.
  // Argmax ties break toward the lowest index.
  DecodeTrace decode_traced(const Features<T>& x,
                            const ProfileSet<T>& profiles,
                            long max_len = 200) const {
    using namespace num;
    NoGradGuard ng;
    profiles.validate();
    if (profiles.dim() != cfg_.profile_dim)
      throw DataError("profiles: dim mismatch");
    if (max_len < 1) throw DataError("decode: max_len must be >= 1");
    Encoded enc = encode(x);
    auto cp = canonical_profiles(profiles);
    const long k = profiles.size(), fd = cfg_.profile_dim;

    DecodeTrace trace;
    trace.l_h = enc.l_h;
    std::vector<int> in_ids = {vocab_.eos_id()};
    std::vector<T> dbar_flat;
    for (long n = 0; n < max_len; ++n) {
      auto q = speaker_queries(in_ids, enc);
      auto beta_canon = softmax_rows(cosine_rows(q, cp.mat));
      const T* brow = beta_canon.ptr() + n * k;

      std::vector<T> beta_caller(size_t(k), T(0));
      for (long caller = 0; caller < k; ++caller)
        beta_caller[size_t(caller)] =
            brow[cp.caller_to_canon[size_t(caller)]];
      int s_n = 0;
      for (long caller = 1; caller < k; ++caller)
        if (beta_caller[size_t(caller)] > beta_caller[size_t(s_n)])
          s_n = int(caller);

      // weighted profile for this step, accumulated in canonical order
      dbar_flat.resize(size_t((n + 1) * fd), T(0));
      T* drow = dbar_flat.data() + n * fd;
      for (long j = 0; j < k; ++j) {
        const T b = brow[j];
        const T* prow = cp.mat.ptr() + j * fd;
        for (long t = 0; t < fd; ++t) drow[t] += b * prow[t];
      }
      auto dbar = Tensor::from({n + 1, fd}, dbar_flat);

      auto dec = asr_decode(in_ids, enc.h_asr, dbar);
      const T* lrow = dec.logits.ptr() + n * vocab_.size();
      int y_n = 0;
      for (long j = 1; j < vocab_.size(); ++j)
        if (lrow[j] > lrow[y_n]) y_n = int(j);

      auto tl = time_logits(dec.zbars, enc.h_asr, time_heads_);
      auto a_start = softmax_rows(tl.start);
      auto a_end = softmax_rows(tl.end);
      std::vector<T> srow(a_start.ptr() + n * enc.l_h,
                          a_start.ptr() + (n + 1) * enc.l_h);
      std::vector<T> erow(a_end.ptr() + n * enc.l_h,
                          a_end.ptr() + (n + 1) * enc.l_h);
      auto ts = infer_token_times(srow, erow, x.frame_period,
                                  ModelConfig::subsample_factor);

      const bool special = vocab_.is_special(y_n);
      trace.hyp.tokens.push_back(y_n);
      trace.hyp.speakers.push_back(s_n);
      trace.hyp.start_frames.push_back(special ? -1 : ts.start_frame);
      trace.hyp.end_frames.push_back(special ? -1 : ts.end_frame);
      trace.hyp.start_secs.push_back(special ? -1.0 : ts.start_sec);
      trace.hyp.end_secs.push_back(special ? -1.0 : ts.end_sec);
      trace.betas.push_back(std::move(beta_caller));
      if (y_n == vocab_.eos_id()) break;
      in_ids.push_back(y_n);
    }
    return trace;
  }

  SerializedHypothesis decode(const Features<T>& x,
                              const ProfileSet<T>& profiles,
                              long max_len = 200) const {
    return decode_traced(x, profiles, max_len).hyp;
  }

  void save(const std::string& path,
            const nlohmann::json& extra_meta = nullptr) const {
    io::Checkpoint ck;
    ck.meta["config"] = config_json(cfg_);
    ck.meta["vocab"] = {{"size", vocab_.size()},
                        {"sc", vocab_.sc_id()},
                        {"eos", vocab_.eos_id()}};
    if (!extra_meta.is_null()) ck.meta["extra"] = extra_meta;
    io::pack_params(params_, ck);
    io::save_checkpoint(path, ck);
  }

  static SaAsrModel load(const std::string& path, Vocabulary vocab) {
    auto ck = io::load_checkpoint(path);
    ModelConfig cfg = config_from_json(ck.meta.at("config"));
    const auto& vj = ck.meta.at("vocab");
    if (vj.at("size").get<long>() != vocab.size() ||
        vj.at("sc").get<int>() != vocab.sc_id() ||
        vj.at("eos").get<int>() != vocab.eos_id())
      throw DataError("checkpoint: vocabulary does not match");
    SaAsrModel m(cfg, std::move(vocab), 0);
    io::unpack_params(ck, m.params_);
    return m;
  }

 private:
  struct LnP {
    Tensor g, b;
  };
  struct FfP {
    Tensor w1, b1, w2, b2;
  };
  struct EncLayer {
    num::MhaParams<T> attn;
    LnP ln1, ln2;
    FfP ff;
  };
  struct EncoderStack {
    std::vector<EncLayer> layers;
    LnP final_ln;
  };
  struct DecLayer {
    num::MhaParams<T> self_attn, src_attn;
    LnP ln1, ln2, ln3;
    FfP ff;
  };
  struct SpkDecLayer {
    num::MhaParams<T> self_attn, src_spk, src_asr;
    LnP ln1, ln2, ln3, ln4;
    FfP ff;
  };

  void build_params(std::mt19937_64& rng) {
    const long dm = cfg_.model_dim;
    auto uniform = [&](Shape shape, long fan_in) {
      const double s = 1.0 / std::sqrt(double(fan_in));
      std::uniform_real_distribution<double> dist(-s, s);
      std::vector<T> v(size_t(num::numel(shape)));
      for (auto& e : v) e = T(dist(rng));
      return Tensor::from(std::move(shape), std::move(v), true);
    };
    auto weight = [&](const std::string& name, Shape shape) {
      const long fan = shape.back();
      return params_.add(name, uniform(std::move(shape), fan));
    };
    auto zero = [&](const std::string& name, Shape shape) {
      return params_.add(name, Tensor::zeros(std::move(shape), true));
    };
    auto one = [&](const std::string& name, Shape shape) {
      std::vector<T> v(size_t(num::numel(shape)), T(1));
      return params_.add(name, Tensor::from(std::move(shape), std::move(v), true));
    };
    auto ln = [&](const std::string& p) {
      return LnP{one(p + ".g", {dm}), zero(p + ".b", {dm})};
    };
    auto mha = [&](const std::string& p) {
      num::MhaParams<T> m;
      m.wq = weight(p + ".wq", {dm, dm});
      m.bq = zero(p + ".bq", {dm});
      m.wk = weight(p + ".wk", {dm, dm});
      m.bk = zero(p + ".bk", {dm});
      m.wv = weight(p + ".wv", {dm, dm});
      m.bv = zero(p + ".bv", {dm});
      m.wo = weight(p + ".wo", {dm, dm});
      m.bo = zero(p + ".bo", {dm});
      return m;
    };
    auto ff = [&](const std::string& p) {
      return FfP{weight(p + ".w1", {cfg_.ff_dim, dm}), zero(p + ".b1", {cfg_.ff_dim}),
                 weight(p + ".w2", {dm, cfg_.ff_dim}), zero(p + ".b2", {dm})};
    };

    fe_conv1_w_ = weight("fe.conv1.w", {dm, 3 * cfg_.feat_dim});
    fe_conv1_b_ = zero("fe.conv1.b", {dm});
    fe_conv2_w_ = weight("fe.conv2.w", {dm, 3 * dm});
    fe_conv2_b_ = zero("fe.conv2.b", {dm});

    auto stack = [&](const std::string& p, int layers) {
      EncoderStack st;
      for (int l = 0; l < layers; ++l) {
        const std::string lp = p + ".l" + std::to_string(l);
        st.layers.push_back(
            EncLayer{mha(lp + ".attn"), ln(lp + ".ln1"), ln(lp + ".ln2"), ff(lp + ".ff")});
      }
      st.final_ln = ln(p + ".ln");
      return st;
    };
    enc_ = stack("enc", cfg_.enc_layers);
    spk_enc_ = stack("spkenc", cfg_.spk_enc_layers);

    spk_dec_embed_ = weight("spkdec.embed", {vocab_.size(), dm});
    for (int l = 0; l < cfg_.spk_dec_layers; ++l) {
      const std::string lp = "spkdec.l" + std::to_string(l);
      spk_dec_.push_back(SpkDecLayer{mha(lp + ".self"), mha(lp + ".srcspk"),
                                     mha(lp + ".srcasr"), ln(lp + ".ln1"),
                                     ln(lp + ".ln2"), ln(lp + ".ln3"),
                                     ln(lp + ".ln4"), ff(lp + ".ff")});
    }
    spk_dec_ln_ = ln("spkdec.ln");
    spk_dec_out_w_ = weight("spkdec.out.w", {cfg_.profile_dim, dm});
    spk_dec_out_b_ = zero("spkdec.out.b", {cfg_.profile_dim});

    dec_embed_ = weight("dec.embed", {vocab_.size(), dm});
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string lp = "dec.l" + std::to_string(l);
      dec_.push_back(DecLayer{mha(lp + ".self"), mha(lp + ".src"),
                              ln(lp + ".ln1"), ln(lp + ".ln2"), ln(lp + ".ln3"),
                              ff(lp + ".ff")});
    }
    dec_ln_ = ln("dec.ln");
    dec_out_w_ = weight("dec.out.w", {vocab_.size(), dm});
    dec_out_b_ = zero("dec.out.b", {vocab_.size()});
    spk_inject_w_ = weight("dec.spk_inject.w", {dm, cfg_.profile_dim});

    // Time heads: query projections start at zero (logits exactly zero ->
    // uniform posteriors) while keys start random so the zero point is not a
    // stationary saddle of the time loss.
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string lp = "time.l" + std::to_string(l);
      TimeHeadParams<T> h;
      h.start_q = zero(lp + ".start.q", {cfg_.time_dim, dm});
      h.start_k = weight(lp + ".start.k", {cfg_.time_dim, dm});
      h.end_q = zero(lp + ".end.q", {cfg_.time_dim, dm});
      h.end_k = weight(lp + ".end.k", {cfg_.time_dim, dm});
      time_heads_.push_back(h);
    }
  }

  Tensor feed_forward(const Tensor& x, const FfP& p) const {
    using namespace num;
    return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
  }

  Tensor run_encoder(Tensor h, const EncoderStack& st) const {
    using namespace num;
    for (const auto& L : st.layers) {
      auto n1 = layer_norm_rows(h, L.ln1.g, L.ln1.b);
      h = add(h, multi_head_attention(n1, n1, L.attn, cfg_.heads, false));
      auto n2 = layer_norm_rows(h, L.ln2.g, L.ln2.b);
      h = add(h, feed_forward(n2, L.ff));
    }
    return layer_norm_rows(h, st.final_ln.g, st.final_ln.b);
  }

  Tensor embed_inputs(const Tensor& table, const std::vector<int>& ids) const {
    using namespace num;
    auto e = scale(embedding(table, ids), T(std::sqrt(double(cfg_.model_dim))));
    return add(e, sinusoidal_pe<T>(long(ids.size()), cfg_.model_dim));
  }

  // Speaker decoder: masked self-attention, source attention over the
  // speaker encoding then over the recognition encoding, feed-forward; final
  // projection to profile space. Returns one query row per position.
  Tensor speaker_queries(const std::vector<int>& in_ids,
                         const Encoded& enc) const {
    using namespace num;
    auto h = embed_inputs(spk_dec_embed_, in_ids);
    for (const auto& L : spk_dec_) {
      auto n1 = layer_norm_rows(h, L.ln1.g, L.ln1.b);
      h = add(h, multi_head_attention(n1, n1, L.self_attn, cfg_.heads, true));
      auto n2 = layer_norm_rows(h, L.ln2.g, L.ln2.b);
      h = add(h, multi_head_attention(n2, enc.h_spk, L.src_spk, cfg_.heads, false));
      auto n3 = layer_norm_rows(h, L.ln3.g, L.ln3.b);
      h = add(h, multi_head_attention(n3, enc.h_asr, L.src_asr, cfg_.heads, false));
      auto n4 = layer_norm_rows(h, L.ln4.g, L.ln4.b);
      h = add(h, feed_forward(n4, L.ff));
    }
    auto z = layer_norm_rows(h, spk_dec_ln_.g, spk_dec_ln_.b);
    return linear(z, spk_dec_out_w_, spk_dec_out_b_);
  }

  struct AsrDecOut {
    Tensor logits;
    std::vector<Tensor> zbars;  // per layer: post-self-attention states
  };

  AsrDecOut asr_decode(const std::vector<int>& in_ids, const Tensor& h_asr,
                       const Tensor& dbar) const {
    using namespace num;
    auto h = embed_inputs(dec_embed_, in_ids);
    AsrDecOut out;
    for (size_t l = 0; l < dec_.size(); ++l) {
      const auto& L = dec_[l];
      auto n1 = layer_norm_rows(h, L.ln1.g, L.ln1.b);
      h = add(h, multi_head_attention(n1, n1, L.self_attn, cfg_.heads, true));
      out.zbars.push_back(h);  // time-head query tap
      auto n2 = layer_norm_rows(h, L.ln2.g, L.ln2.b);
      h = add(h, multi_head_attention(n2, h_asr, L.src_attn, cfg_.heads, false));
      if (l == 0)  // weighted-profile injection into the feed-forward input
        h = add(h, linear(dbar, spk_inject_w_));
      auto n3 = layer_norm_rows(h, L.ln3.g, L.ln3.b);
      h = add(h, feed_forward(n3, L.ff));
    }
    auto z = layer_norm_rows(h, dec_ln_.g, dec_ln_.b);
    out.logits = linear(z, dec_out_w_, dec_out_b_);
    return out;
  }

  ModelConfig cfg_;
  Vocabulary vocab_;
  num::ParamStore<T> params_;

  Tensor fe_conv1_w_, fe_conv1_b_, fe_conv2_w_, fe_conv2_b_;
  EncoderStack enc_, spk_enc_;
  Tensor spk_dec_embed_;
  std::vector<SpkDecLayer> spk_dec_;
  LnP spk_dec_ln_;
  Tensor spk_dec_out_w_, spk_dec_out_b_;
  Tensor dec_embed_;
  std::vector<DecLayer> dec_;
  LnP dec_ln_;
  Tensor dec_out_w_, dec_out_b_;
  Tensor spk_inject_w_;
  std::vector<TimeHeadParams<T>> time_heads_;
};

}  // namespace sadiar
