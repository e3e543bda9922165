#include "sadiar/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sadiar/io_util.hpp"

namespace sadiar::synth {

using nlohmann::json;

// ------------------------------------------------------------ inventory ----

void InventoryConfig::validate() const {
  if (n_speakers < 1) throw DataError("inventory: need at least one speaker");
  if (feat_dim < 1 || profile_dim < 1)
    throw DataError("inventory: dimensions must be positive");
  if (profile_dim > feat_dim)
    throw DataError("inventory: profile_dim must not exceed feat_dim");
  if (max_pair_cos <= 0.0 || max_pair_cos >= 1.0)
    throw DataError("inventory: max_pair_cos must be in (0, 1)");
  if (pattern_scale <= 0.0)
    throw DataError("inventory: pattern_scale must be positive");
}

long Inventory::speaker_index(const std::string& id) const {
  for (size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i].id == id) return long(i);
  throw DataError("inventory: unknown speaker '" + id + "'");
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

std::vector<double> random_unit(long dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(size_t(dim), 0.0);
  double n = 0.0;
  do {
    for (auto& x : v) x = g(rng);
    n = norm(v);
  } while (n < 1e-12);
  for (auto& x : v) x /= n;
  return v;
}

}  // namespace

void Inventory::validate() const {
  if (feat_dim < 1 || profile_dim < 1 || profile_dim > feat_dim)
    throw DataError("inventory: bad dimensions");
  if (speakers.empty()) throw DataError("inventory: no speakers");
  if (token_patterns.empty()) throw DataError("inventory: no token patterns");
  if (long(projection.size()) != profile_dim)
    throw DataError("inventory: projection row count != profile_dim");
  for (const auto& row : projection)
    if (long(row.size()) != feat_dim)
      throw DataError("inventory: projection column count != feat_dim");
  for (size_t i = 0; i < speakers.size(); ++i) {
    const auto& s = speakers[i];
    if (s.id.empty()) throw DataError("inventory: empty speaker id");
    if (long(s.signature.size()) != feat_dim ||
        long(s.profile.size()) != profile_dim)
      throw DataError("inventory: speaker vector dimension mismatch");
    for (size_t j = 0; j < i; ++j)
      if (speakers[j].id == s.id)
        throw DataError("inventory: duplicate speaker id '" + s.id + "'");
  }
  for (const auto& p : token_patterns)
    if (long(p.size()) != feat_dim)
      throw DataError("inventory: token pattern dimension mismatch");
}

Inventory make_inventory(const Vocabulary& vocab, const InventoryConfig& cfg,
                         uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Inventory inv;
  inv.feat_dim = cfg.feat_dim;
  inv.profile_dim = cfg.profile_dim;
  inv.pattern_scale = cfg.pattern_scale;

  // Signatures: rejection-sample unit vectors until pairwise |cos| clears
  // the separability bound.
  const int max_tries = 20000;
  for (long s = 0; s < cfg.n_speakers; ++s) {
    std::vector<double> cand;
    int tries = 0;
    for (;;) {
      if (++tries > max_tries)
        throw DataError(
            "inventory: cannot fit " + std::to_string(cfg.n_speakers) +
            " speakers with pairwise |cos| < " +
            std::to_string(cfg.max_pair_cos) + " in " +
            std::to_string(cfg.feat_dim) + " dimensions");
      cand = random_unit(cfg.feat_dim, rng);
      bool ok = true;
      for (const auto& prev : inv.speakers)
        if (std::abs(dot(cand, prev.signature)) >= cfg.max_pair_cos) {
          ok = false;
          break;
        }
      if (ok) break;
    }
    SpeakerEntry e;
    char buf[16];
    std::snprintf(buf, sizeof buf, "spk%02ld", s);
    e.id = buf;
    e.signature = std::move(cand);
    inv.speakers.push_back(std::move(e));
  }

  // Projection: Gaussian rows, Gram-Schmidt orthonormalized (profile_dim <=
  // feat_dim guarantees full rank almost surely; retry on degeneracy).
  for (long r = 0; r < cfg.profile_dim; ++r) {
    for (int tries = 0;; ++tries) {
      if (tries > max_tries)
        throw InternalError("inventory: projection orthonormalization failed");
      std::vector<double> row = random_unit(cfg.feat_dim, rng);
      for (const auto& prev : inv.projection) {
        const double c = dot(row, prev);
        for (size_t i = 0; i < row.size(); ++i) row[i] -= c * prev[i];
      }
      const double n = norm(row);
      if (n > 1e-6) {
        for (auto& x : row) x /= n;
        inv.projection.push_back(std::move(row));
        break;
      }
    }
  }

  for (auto& e : inv.speakers) e.profile = project_profile(inv, e.signature);

  // One pattern per regular vocabulary token (specials render nothing).
  for (int t = 0; t < vocab.size(); ++t) {
    if (vocab.is_special(t)) continue;
    auto p = random_unit(cfg.feat_dim, rng);
    for (auto& x : p) x *= cfg.pattern_scale;
    inv.token_patterns.push_back(std::move(p));
  }
  if (inv.token_patterns.empty())
    throw DataError("inventory: vocabulary has no regular tokens");
  // Regular ids must be contiguous from 0 so patterns index by token id.
  for (int t = 0; t < int(inv.token_patterns.size()); ++t)
    if (vocab.is_special(t))
      throw DataError("inventory: specials must follow the regular tokens");

  inv.validate();
  return inv;
}

std::vector<double> project_profile(const Inventory& inv,
                                    const std::vector<double>& mean_frame) {
  if (long(mean_frame.size()) != inv.feat_dim)
    throw DataError("project_profile: dimension mismatch");
  std::vector<double> p(size_t(inv.profile_dim), 0.0);
  for (long r = 0; r < inv.profile_dim; ++r)
    p[size_t(r)] = dot(inv.projection[size_t(r)], mean_frame);
  const double n = norm(p);
  if (n == 0.0) throw DataError("project_profile: zero mean frame");
  for (auto& x : p) x /= n;
  return p;
}

void Inventory::save(const std::string& path) const {
  json j;
  j["feat_dim"] = feat_dim;
  j["profile_dim"] = profile_dim;
  j["pattern_scale"] = pattern_scale;
  j["projection"] = projection;
  j["token_patterns"] = token_patterns;
  json spk = json::array();
  for (const auto& s : speakers)
    spk.push_back(
        {{"id", s.id}, {"signature", s.signature}, {"profile", s.profile}});
  j["speakers"] = spk;
  io::write_file_atomic(path, j.dump(2) + "\n");
}

Inventory Inventory::load(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw DataError("inventory: cannot parse " + path + ": " + e.what());
  }
  Inventory inv;
  try {
    inv.feat_dim = j.at("feat_dim").get<long>();
    inv.profile_dim = j.at("profile_dim").get<long>();
    inv.pattern_scale = j.at("pattern_scale").get<double>();
    inv.projection = j.at("projection").get<std::vector<std::vector<double>>>();
    inv.token_patterns =
        j.at("token_patterns").get<std::vector<std::vector<double>>>();
    for (const auto& s : j.at("speakers")) {
      SpeakerEntry e;
      e.id = s.at("id").get<std::string>();
      e.signature = s.at("signature").get<std::vector<double>>();
      e.profile = s.at("profile").get<std::vector<double>>();
      inv.speakers.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("inventory: bad field in " + path + ": " + e.what());
  }
  inv.validate();
  return inv;
}

// ------------------------------------------------------------ rendering ----

RenderedUtterance render_planned(const Inventory& inv, int speaker,
                                 const std::vector<int>& tokens,
                                 const std::vector<int>& frames_per_token,
                                 const Vocabulary& vocab, double noise_sigma,
                                 std::mt19937_64& rng) {
  if (tokens.empty()) throw DataError("render: empty token list");
  if (tokens.size() != frames_per_token.size())
    throw DataError("render: one frame count per token required");
  if (speaker < 0 || size_t(speaker) >= inv.speakers.size())
    throw DataError("render: speaker index out of range");
  if (noise_sigma < 0.0) throw DataError("render: negative noise sigma");
  const auto& sig = inv.speakers[size_t(speaker)].signature;
  RenderedUtterance out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= vocab.size() || vocab.is_special(t) ||
        size_t(t) >= inv.token_patterns.size())
      throw DataError("render: token must be a regular vocabulary entry "
                      "known to the inventory");
    if (frames_per_token[i] < 1)
      throw DataError("render: token must span at least one frame");
    out.spans.emplace_back(out.n_frames, out.n_frames + frames_per_token[i]);
    const auto& pat = inv.token_patterns[size_t(t)];
    for (int f = 0; f < frames_per_token[i]; ++f) {
      for (long d = 0; d < inv.feat_dim; ++d)
        out.frames.push_back(sig[size_t(d)] + pat[size_t(d)]);
    }
    out.n_frames += frames_per_token[i];
  }
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> g(0.0, noise_sigma);
    for (auto& v : out.frames) v += g(rng);
  }
  return out;
}

RenderedUtterance render_utterance(const Inventory& inv, int speaker,
                                   const std::vector<int>& tokens,
                                   const Vocabulary& vocab,
                                   double noise_sigma, std::mt19937_64& rng,
                                   int min_frames, int max_frames) {
  if (min_frames < 1 || max_frames < min_frames)
    throw DataError("render: bad frame count range");
  std::uniform_int_distribution<int> nf(min_frames, max_frames);
  std::vector<int> counts(tokens.size());
  for (auto& c : counts) c = nf(rng);
  return render_planned(inv, speaker, tokens, counts, vocab, noise_sigma, rng);
}

// ------------------------------------------------------------- mixtures ----

void MixtureConfig::validate() const {
  if (min_speakers < 1 || max_speakers > 5 || min_speakers > max_speakers)
    throw DataError("mixture: speaker count must lie within [1, 5]");
  if (min_utterances < 1 || max_utterances > 5 ||
      min_utterances > max_utterances)
    throw DataError("mixture: utterance count must lie within [1, 5]");
  if (min_speakers > min_utterances)
    throw DataError("mixture: every speaker needs at least one utterance");
  if (min_tokens < 1 || min_tokens > max_tokens)
    throw DataError("mixture: bad token count range");
  if (min_token_frames < 1 || min_token_frames > max_token_frames)
    throw DataError("mixture: bad token duration range");
  if (overlap_prob < 0.0 || overlap_prob > 1.0)
    throw DataError("mixture: overlap probability outside [0, 1]");
  if (overlap_frac_lo <= 0.0 || overlap_frac_hi >= 1.0 ||
      overlap_frac_lo > overlap_frac_hi)
    throw DataError("mixture: overlap fraction range outside (0, 1)");
  if (gap_max_sec < 0.0) throw DataError("mixture: negative gap");
  if (max_distractors < 0) throw DataError("mixture: negative distractors");
  if (noise_sigma < 0.0) throw DataError("mixture: negative noise sigma");
  if (frame_period <= 0.0) throw DataError("mixture: frame period <= 0");
  if (subsample_factor < 1) throw DataError("mixture: subsample factor < 1");
}

MixturePlan plan_mixture(const Inventory& inv, const Vocabulary& vocab,
                         const MixtureConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  inv.validate();
  const long n_inv = long(inv.speakers.size());
  if (n_inv < cfg.min_speakers)
    throw DataError("mixture: inventory smaller than the speaker minimum");

  std::vector<int> regular;
  for (int t = 0; t < vocab.size(); ++t)
    if (!vocab.is_special(t)) regular.push_back(t);
  if (regular.empty()) throw DataError("mixture: no regular tokens");

  auto uniform_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto uniform_real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  const int n_utt = uniform_int(cfg.min_utterances, cfg.max_utterances);
  const int spk_cap =
      int(std::min<long>({long(cfg.max_speakers), long(n_utt), n_inv}));
  const int n_spk = uniform_int(cfg.min_speakers, spk_cap);

  // Distinct speakers via partial Fisher-Yates over inventory indices.
  std::vector<int> pool(size_t(n_inv), 0);
  for (long i = 0; i < n_inv; ++i) pool[size_t(i)] = int(i);
  for (int i = 0; i < n_spk; ++i)
    std::swap(pool[size_t(i)], pool[size_t(uniform_int(i, int(n_inv) - 1))]);
  std::vector<int> chosen(pool.begin(), pool.begin() + n_spk);

  // Every chosen speaker gets one utterance; extras draw uniformly. The
  // assignment order is then shuffled.
  std::vector<int> utt_speaker;
  for (int i = 0; i < n_utt; ++i)
    utt_speaker.push_back(i < n_spk ? chosen[size_t(i)]
                                    : chosen[size_t(uniform_int(0, n_spk - 1))]);
  for (int i = n_utt - 1; i > 0; --i)
    std::swap(utt_speaker[size_t(i)], utt_speaker[size_t(uniform_int(0, i))]);

  MixturePlan plan;
  for (int u = 0; u < n_utt; ++u) {
    UtterancePlan up;
    up.speaker = utt_speaker[size_t(u)];
    const int n_tok = uniform_int(cfg.min_tokens, cfg.max_tokens);
    for (int t = 0; t < n_tok; ++t) {
      up.tokens.push_back(regular[size_t(uniform_int(0, int(regular.size()) - 1))]);
      up.frames_per_token.push_back(
          uniform_int(cfg.min_token_frames, cfg.max_token_frames));
    }
    plan.utterances.push_back(std::move(up));
  }

  // Onsets: consecutive different-speaker pairs overlap with probability
  // overlap_prob by U(frac_lo, frac_hi) x the shorter utterance; otherwise
  // (and always between two utterances of the same speaker, who cannot
  // overlap themselves) a U(0, gap_max) silence separates them.
  auto utt_len = [](const UtterancePlan& u) {
    long n = 0;
    for (int f : u.frames_per_token) n += f;
    return n;
  };
  plan.utterances[0].onset_frame = 0;
  for (size_t u = 1; u < plan.utterances.size(); ++u) {
    auto& cur = plan.utterances[u];
    const auto& prev = plan.utterances[u - 1];
    const long prev_len = utt_len(prev), cur_len = utt_len(cur);
    const long prev_end = prev.onset_frame + prev_len;
    const bool same_speaker = cur.speaker == prev.speaker;
    const bool overlap =
        !same_speaker && uniform_real(0.0, 1.0) < cfg.overlap_prob;
    if (overlap) {
      const double frac = uniform_real(cfg.overlap_frac_lo, cfg.overlap_frac_hi);
      long ov = std::lround(frac * double(std::min(prev_len, cur_len)));
      ov = std::max(1L, std::min(ov, prev_len - 1));
      cur.onset_frame = prev_end - ov;
    } else {
      const double gap_sec = uniform_real(0.0, cfg.gap_max_sec);
      cur.onset_frame = prev_end + std::lround(gap_sec / cfg.frame_period);
    }
  }

  // Profile set: the true speakers plus distractors, in shuffled order.
  const int d_cap = int(std::min<long>(long(cfg.max_distractors), n_inv - n_spk));
  const int n_dis = d_cap > 0 ? uniform_int(0, d_cap) : 0;
  for (int i = 0; i < n_dis; ++i)
    std::swap(pool[size_t(n_spk + i)],
              pool[size_t(uniform_int(n_spk + i, int(n_inv) - 1))]);
  plan.profile_speakers.assign(pool.begin(), pool.begin() + n_spk + n_dis);
  for (int i = int(plan.profile_speakers.size()) - 1; i > 0; --i)
    std::swap(plan.profile_speakers[size_t(i)],
              plan.profile_speakers[size_t(uniform_int(0, i))]);

  plan.noise_seed = rng();
  return plan;
}

namespace detail {

MixtureSample<double> assemble_mixture_d(const Inventory& inv,
                                         const Vocabulary& vocab,
                                         const MixtureConfig& cfg,
                                         const MixturePlan& plan) {
  cfg.validate();
  if (plan.utterances.empty())
    throw DataError("mixture: plan has no utterances");
  if (plan.utterances.size() > 5)
    throw DataError("mixture: more than five utterances");
  if (plan.profile_speakers.empty())
    throw DataError("mixture: plan has no profile set");

  // Canonical assembly order: independent of the caller's utterance order.
  std::vector<const UtterancePlan*> order;
  for (const auto& u : plan.utterances) order.push_back(&u);
  std::sort(order.begin(), order.end(),
            [](const UtterancePlan* a, const UtterancePlan* b) {
              if (a->onset_frame != b->onset_frame)
                return a->onset_frame < b->onset_frame;
              if (a->speaker != b->speaker) return a->speaker < b->speaker;
              if (a->tokens != b->tokens) return a->tokens < b->tokens;
              return a->frames_per_token < b->frames_per_token;
            });

  // Profile slot per inventory speaker index.
  auto slot_of = [&](int speaker) {
    for (size_t i = 0; i < plan.profile_speakers.size(); ++i)
      if (plan.profile_speakers[i] == speaker) return long(i);
    throw DataError("mixture: utterance speaker missing from profile set");
  };

  MixtureSample<double> s;
  s.features.dim = inv.feat_dim;
  s.features.frame_period = cfg.frame_period;

  long total = 0;
  for (const auto* u : order) {
    if (u->onset_frame < 0) throw DataError("mixture: negative onset");
    long len = 0;
    for (int f : u->frames_per_token) len += f;
    total = std::max(total, u->onset_frame + len);
  }
  total = std::max(total, 4L);  // encoder minimum
  s.features.frames = total;
  s.features.data.assign(size_t(total * inv.feat_dim), 0.0);

  const long enc_frames = encoded_frame_count(total, cfg.subsample_factor);
  std::vector<SpeakerBlock> blocks;
  std::vector<std::vector<std::pair<double, double>>> block_sec;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    const auto& u = *order[pos];
    // Noise stream keyed by canonical position, not caller order.
    std::mt19937_64 noise_rng(plan.noise_seed ^
                              (0x9e3779b97f4a7c15ULL * (pos + 1)));
    auto r = render_planned(inv, u.speaker, u.tokens, u.frames_per_token,
                            vocab, cfg.noise_sigma, noise_rng);
    for (long t = 0; t < r.n_frames; ++t)
      for (long d = 0; d < inv.feat_dim; ++d)
        s.features.data[size_t((u.onset_frame + t) * inv.feat_dim + d)] +=
            r.frames[size_t(t * inv.feat_dim + d)];

    SpeakerBlock b;
    b.speaker = int(slot_of(u.speaker));
    b.first_start = double(u.onset_frame) * cfg.frame_period;
    std::vector<std::pair<double, double>> secs;
    for (size_t i = 0; i < u.tokens.size(); ++i) {
      const double a =
          double(u.onset_frame + r.spans[i].first) * cfg.frame_period;
      const double z =
          double(u.onset_frame + r.spans[i].second) * cfg.frame_period;
      b.tokens.push_back(u.tokens[i]);
      b.timings.push_back(map_reference_frames(a, z, cfg.frame_period,
                                               cfg.subsample_factor,
                                               enc_frames));
      secs.emplace_back(a, z);
    }
    blocks.push_back(std::move(b));
    block_sec.push_back(std::move(secs));

    UtteranceMeta meta;
    meta.speaker = inv.speakers[size_t(u.speaker)].id;
    meta.onset_sec = double(u.onset_frame) * cfg.frame_period;
    meta.dur_sec = double(r.n_frames) * cfg.frame_period;
    s.utterances.push_back(std::move(meta));
  }

  for (int spk : plan.profile_speakers) {
    if (spk < 0 || size_t(spk) >= inv.speakers.size())
      throw DataError("mixture: profile speaker out of range");
    SpeakerProfile<double> p;
    p.id = inv.speakers[size_t(spk)].id;
    p.vec = inv.speakers[size_t(spk)].profile;
    s.profiles.profiles.push_back(std::move(p));
  }
  s.profiles.validate();

  // Replicate the serializer's stable (first_start, speaker) ordering so the
  // per-token second spans line up with the serialized reference tokens.
  std::vector<size_t> sorted(blocks.size());
  for (size_t i = 0; i < sorted.size(); ++i) sorted[i] = i;
  std::stable_sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) {
    if (blocks[a].first_start != blocks[b].first_start)
      return blocks[a].first_start < blocks[b].first_start;
    return blocks[a].speaker < blocks[b].speaker;
  });

  s.reference = serialize_sot(blocks, vocab);
  validate_reference(s.reference, vocab, long(s.profiles.size()), enc_frames);

  size_t bi = 0, ti = 0;  // walk regular tokens in serialized order
  for (size_t i = 0; i < s.reference.tokens.size(); ++i) {
    if (vocab.is_special(s.reference.tokens[i])) {
      s.token_times_sec.emplace_back(-1.0, -1.0);
      continue;
    }
    while (bi < sorted.size() && ti >= block_sec[sorted[bi]].size()) {
      ++bi;
      ti = 0;
    }
    if (bi >= sorted.size())
      throw InternalError("mixture: reference/token span walk out of sync");
    s.token_times_sec.push_back(block_sec[sorted[bi]][ti]);
    ++ti;
  }
  return s;
}

}  // namespace detail

// ------------------------------------------------------------- datasets ----

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& s, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= uint32_t(uint8_t(s[off + size_t(i)])) << (8 * i);
  return v;
}

constexpr char kFeatMagic[] = "SADFEAT\n";

}  // namespace

void write_features(const std::string& path, const Features<float>& f) {
  f.validate();
  std::string bytes(kFeatMagic, 8);
  put_u32(bytes, uint32_t(f.frames));
  put_u32(bytes, uint32_t(f.dim));
  static_assert(sizeof(float) == 4);
  const size_t payload = f.data.size() * 4;
  size_t off = bytes.size();
  bytes.resize(bytes.size() + payload);
  // Little-endian byte order on all supported targets.
  std::memcpy(bytes.data() + off, f.data.data(), payload);
  io::write_file_atomic(path, bytes);
}

Features<float> read_features(const std::string& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() < 16 || bytes.compare(0, 8, kFeatMagic, 8) != 0)
    throw DataError("features: bad magic in " + path);
  Features<float> f;
  f.frames = long(get_u32(bytes, 8));
  f.dim = long(get_u32(bytes, 12));
  if (f.frames < 1 || f.dim < 1 || f.frames > (1L << 30) ||
      f.dim > (1L << 20) || f.frames * f.dim > (1L << 31))
    throw DataError("features: implausible shape in " + path);
  const size_t payload = size_t(f.frames) * size_t(f.dim) * 4;
  if (bytes.size() != 16 + payload)
    throw DataError("features: truncated file " + path);
  f.data.resize(size_t(f.frames * f.dim));
  std::memcpy(f.data.data(), bytes.data() + 16, payload);
  f.validate();
  return f;
}

namespace {

json sample_to_json(const std::string& id, const std::string& rel_features,
                    const synth::MixtureSample<float>& s) {
  json j;
  j["id"] = id;
  j["features"] = rel_features;
  j["frames"] = s.features.frames;
  j["dim"] = s.features.dim;
  j["tokens"] = s.reference.tokens;
  j["speakers"] = s.reference.speakers;
  json timings = json::array();
  for (const auto& tm : s.reference.timings)
    timings.push_back({tm.start, tm.end});
  j["timings"] = timings;
  json secs = json::array();
  for (const auto& [a, b] : s.token_times_sec) secs.push_back({a, b});
  j["token_times_sec"] = secs;
  json profs = json::array();
  for (const auto& p : s.profiles.profiles) {
    std::vector<double> vec(p.vec.begin(), p.vec.end());
    profs.push_back({{"id", p.id}, {"vec", vec}});
  }
  j["profiles"] = profs;
  json utts = json::array();
  for (const auto& u : s.utterances)
    utts.push_back({{"speaker", u.speaker},
                    {"onset_sec", u.onset_sec},
                    {"dur_sec", u.dur_sec}});
  j["utterances"] = utts;
  return j;
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.id = j.at("id").get<std::string>();
  e.features_path = j.at("features").get<std::string>();
  e.frames = j.at("frames").get<long>();
  e.dim = j.at("dim").get<long>();
  e.reference.tokens = j.at("tokens").get<std::vector<int>>();
  e.reference.speakers = j.at("speakers").get<std::vector<int>>();
  for (const auto& tm : j.at("timings")) {
    TokenTiming t;
    t.start = tm.at(0).get<long>();
    t.end = tm.at(1).get<long>();
    e.reference.timings.push_back(t);
  }
  for (const auto& p : j.at("token_times_sec"))
    e.token_times_sec.emplace_back(p.at(0).get<double>(),
                                   p.at(1).get<double>());
  for (const auto& p : j.at("profiles")) {
    SpeakerProfile<double> sp;
    sp.id = p.at("id").get<std::string>();
    sp.vec = p.at("vec").get<std::vector<double>>();
    e.profiles.profiles.push_back(std::move(sp));
  }
  for (const auto& u : j.at("utterances")) {
    UtteranceMeta m;
    m.speaker = u.at("speaker").get<std::string>();
    m.onset_sec = u.at("onset_sec").get<double>();
    m.dur_sec = u.at("dur_sec").get<double>();
    e.utterances.push_back(std::move(m));
  }
  return e;
}

}  // namespace

DatasetSummary build_training_set(const Vocabulary& vocab,
                                  const DatasetConfig& cfg,
                                  const std::string& out_dir, int jobs) {
  if (cfg.n_samples < 1)
    throw DataError("dataset: need at least one sample");
  if (cfg.first_sample_index < 0)
    throw DataError("dataset: negative first_sample_index");
  if (jobs < 1) throw DataError("dataset: jobs must be >= 1");
  cfg.mixture.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "features");

  Inventory inv = make_inventory(vocab, cfg.inventory, cfg.seed);
  inv.save((fs::path(out_dir) / "inventory.json").string());
  vocab.save((fs::path(out_dir) / "vocab.txt").string());

  DatasetSummary sum;
  sum.n_samples = cfg.n_samples;
  sum.dir = out_dir;
  sum.speaker_count_histogram.assign(size_t(cfg.mixture.max_speakers) + 1, 0);

  // Samples are independent given their stream index, so workers pull
  // indices from a shared counter and fill per-index slots; the join below
  // stitches results in index order, making output independent of jobs.
  std::vector<std::string> lines(size_t(cfg.n_samples));
  std::vector<int> distinct_counts(size_t(cfg.n_samples), 0);
  std::atomic<long> next{0};
  std::mutex err_mu;
  std::exception_ptr err;

  auto worker = [&]() {
    try {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= cfg.n_samples) return;
        const long stream = cfg.first_sample_index + i;
        std::mt19937_64 rng(cfg.seed + 1 + uint64_t(stream));
        auto plan = plan_mixture(inv, vocab, cfg.mixture, rng);
        auto sample = assemble_mixture<float>(inv, vocab, cfg.mixture, plan);

        std::vector<int> distinct;
        for (const auto& u : plan.utterances)
          if (std::find(distinct.begin(), distinct.end(), u.speaker) ==
              distinct.end())
            distinct.push_back(u.speaker);
        distinct_counts[size_t(i)] = int(distinct.size());

        char id[32];
        std::snprintf(id, sizeof id, "sample_%06ld", stream);
        const std::string rel = std::string("features/") + id + ".bin";
        write_features((fs::path(out_dir) / rel).string(), sample.features);
        lines[size_t(i)] = sample_to_json(id, rel, sample).dump() + "\n";
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!err) err = std::current_exception();
    }
  };

  const int n_threads = int(std::min<long>(jobs, cfg.n_samples));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);

  std::string manifest;
  for (long i = 0; i < cfg.n_samples; ++i) {
    manifest += lines[size_t(i)];
    sum.speaker_count_histogram[size_t(distinct_counts[size_t(i)])] += 1;
  }
  io::write_file_atomic((fs::path(out_dir) / "manifest.jsonl").string(),
                        manifest);
  return sum;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const std::string text = io::read_file(path);
  std::vector<ManifestEntry> out;
  std::istringstream is(text);
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(entry_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("manifest: line " + std::to_string(line_no) + " of " +
                      path + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("manifest: no samples in " + path);
  return out;
}

}  // namespace sadiar::synth
