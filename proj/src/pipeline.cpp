#include "sadiar/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

namespace sadiar {

// ------------------------------------------------------------- config ----

void PipelineConfig::validate() const {
  if (!(window_sec > 0.0) || !(hop_sec > 0.0) || hop_sec > window_sec)
    throw DataError("pipeline: need 0 < hop <= window");
  if (!(max_chunk_sec > 0.0)) throw DataError("pipeline: max chunk <= 0");
  if (!(merge_gap_m > 0.0)) throw DataError("pipeline: merge gap <= 0");
  if (!(max_token_dur_n > 0.0))
    throw DataError("pipeline: max token duration <= 0");
  if (oracle_speakers < 0) throw DataError("pipeline: negative oracle count");
  if (max_speakers < 1) throw DataError("pipeline: max speakers < 1");
  if (energy_threshold < 0.0) throw DataError("pipeline: negative threshold");
  if (min_sil_sec < 0.0) throw DataError("pipeline: negative silence floor");
  if (max_decode_tokens < 1) throw DataError("pipeline: decode cap < 1");
}

// ------------------------------------------------------ speech regions ----

SpeechRegionList detect_speech_from_norms(const std::vector<double>& frame_norm,
                                          double frame_period,
                                          double energy_threshold,
                                          double min_sil_sec) {
  if (!(frame_period > 0.0)) throw DataError("vad: frame period <= 0");
  SpeechRegionList runs;
  const long n = long(frame_norm.size());
  long t = 0;
  while (t < n) {
    if (frame_norm[size_t(t)] > energy_threshold) {
      long b = t;
      while (t < n && frame_norm[size_t(t)] > energy_threshold) ++t;
      runs.push_back({double(b) * frame_period, double(t) * frame_period});
    } else {
      ++t;
    }
  }
  SpeechRegionList out;
  for (const auto& r : runs) {
    if (!out.empty() && r.start_sec - out.back().end_sec < min_sil_sec)
      out.back().end_sec = r.end_sec;
    else
      out.push_back(r);
  }
  return out;
}

// ----------------------------------------------------------- clustering ----

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Cosine affinity with negative similarities clamped to zero and a zero
// diagonal, so row sums are the full graph degrees.
Mat cosine_affinity(const std::vector<std::vector<double>>& emb) {
  const long n = long(emb.size());
  const long d = long(emb[0].size());
  Mat x(n, d);
  for (long i = 0; i < n; ++i) {
    if (long(emb[size_t(i)].size()) != d)
      throw DataError("cluster: inconsistent embedding dims");
    for (long j = 0; j < d; ++j) x(i, j) = emb[size_t(i)][size_t(j)];
  }
  Vec norm = x.rowwise().norm();
  for (long i = 0; i < n; ++i)
    if (!(norm(i) > 0.0) || !std::isfinite(norm(i)))
      throw DataError("cluster: embedding with zero or non-finite norm");
  Mat a = (x * x.transpose()).eval();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      a(i, j) = i == j ? 0.0 : std::max(a(i, j) / (norm(i) * norm(j)), 0.0);
  return a;
}

// Keep each row's p strongest neighbours (value desc, index asc, self
// excluded) at their affinity values, zero the rest, then average with the
// transpose so the result is symmetric.
Mat sparsify_top_p(const Mat& a, int p) {
  const long n = a.rows();
  Mat v = Mat::Zero(n, n);
  std::vector<int> idx;
  for (long i = 0; i < n; ++i) {
    idx.clear();
    for (long j = 0; j < n; ++j)
      if (j != i) idx.push_back(int(j));
    std::sort(idx.begin(), idx.end(), [&](int u, int w) {
      if (a(i, u) != a(i, w)) return a(i, u) > a(i, w);
      return u < w;
    });
    for (int r = 0; r < p && r < int(idx.size()); ++r)
      v(i, idx[size_t(r)]) = a(i, idx[size_t(r)]);
  }
  return 0.5 * (v + v.transpose());
}

// Connected components of the positive-weight graph (union-find).
int component_count(const Mat& v) {
  const long n = v.rows();
  std::vector<int> parent(size_t(n), 0);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int u) {
    while (parent[size_t(u)] != u) {
      parent[size_t(u)] = parent[size_t(parent[size_t(u)])];
      u = parent[size_t(u)];
    }
    return u;
  };
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j)
      if (v(i, j) > 0.0) parent[size_t(find(int(i)))] = find(int(j));
  int comps = 0;
  for (long i = 0; i < n; ++i)
    if (find(int(i)) == int(i)) ++comps;
  return comps;
}

// Laplacian of the sparsified graph with the FULL affinity degrees kept on
// the diagonal: diag(full degrees) - sparsified affinity. Every edge the
// sparsification discards stays on the diagonal as self-absorbed mass.
Mat shifted_laplacian(const Mat& v, const Vec& full_degree) {
  Mat l = -v;
  for (long i = 0; i < v.rows(); ++i) l(i, i) += full_degree(i);
  return l;
}

// Deterministic Lloyd k-means: k distinct start points drawn with the given
// seed, ties toward the lower index, empty clusters re-seeded with the point
// farthest from its centroid. Returns inertia.
double kmeans_once(const Mat& x, int k, uint64_t seed,
                   std::vector<int>& labels) {
  const long n = x.rows();
  std::mt19937_64 rng(seed);
  std::vector<int> pool(size_t(n), 0);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, int(n) - 1);
    std::swap(pool[size_t(i)], pool[size_t(pick(rng))]);
  }
  Mat cent(k, x.cols());
  for (int c = 0; c < k; ++c) cent.row(c) = x.row(pool[size_t(c)]);

  labels.assign(size_t(n), 0);
  double inertia = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = iter == 0;
    inertia = 0.0;
    for (long i = 0; i < n; ++i) {
      int best = 0;
      double bd = (x.row(i) - cent.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (x.row(i) - cent.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (labels[size_t(i)] != best) changed = true;
      labels[size_t(i)] = best;
      inertia += bd;
    }
    if (!changed) break;
    Mat sums = Mat::Zero(k, x.cols());
    std::vector<long> counts(size_t(k), 0);
    for (long i = 0; i < n; ++i) {
      sums.row(labels[size_t(i)]) += x.row(i);
      counts[size_t(labels[size_t(i)])] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[size_t(c)] > 0) {
        cent.row(c) = sums.row(c) / double(counts[size_t(c)]);
        continue;
      }
      long far = 0;
      double fd = -1.0;
      for (long i = 0; i < n; ++i) {
        const double d = (x.row(i) - cent.row(labels[size_t(i)])).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      cent.row(c) = x.row(far);
    }
  }
  return inertia;
}

// Renumber labels by order of first appearance so the result does not
// depend on the k-means start points.
void canonicalize_labels(std::vector<int>& labels, int k) {
  std::vector<int> remap(size_t(k), -1);
  int next = 0;
  for (auto& l : labels) {
    if (remap[size_t(l)] < 0) remap[size_t(l)] = next++;
    l = remap[size_t(l)];
  }
}

}  // namespace

ClusterResult nme_spectral_cluster(
    const std::vector<std::vector<double>>& embeddings, int oracle_count,
    int max_speakers) {
  if (embeddings.empty()) throw DataError("cluster: no embeddings");
  if (max_speakers < 1) throw DataError("cluster: max speakers < 1");
  const long n = long(embeddings.size());

  ClusterResult res;
  if (n == 1) {
    res.labels = {0};
    res.num_speakers = 1;
    return res;
  }
  Mat a = cosine_affinity(embeddings);

  // An oracle count capped by the point count; n clusters of n points is
  // the identity labeling and needs no spectral step.
  const int oracle = oracle_count > 0 ? int(std::min<long>(oracle_count, n)) : 0;
  if (oracle == int(n)) {
    res.labels.resize(size_t(n));
    std::iota(res.labels.begin(), res.labels.end(), 0);
    res.num_speakers = int(n);
    return res;
  }

  // Each neighbour count p keeps the p strongest neighbours per row and is
  // scored by the density-penalized normalized eigengap r = p / (n * g),
  // g = (lambda_{k+1} - lambda_k) / lambda_max, smallest r wins. The
  // spectrum comes from the shifted Laplacian diag(full degrees) -
  // sparsified affinity: discarding strong (within-cluster) edges leaves
  // their mass on the diagonal, pushing the small eigenvalues up and
  // crushing the gap, while discarding only weak cross-cluster edges keeps
  // a clean gap at the cluster count. Without the shift the score is
  // degenerate in both directions: the complete graph always shows a
  // perfect gap for k = 1, and an overly sparse graph that fragments into
  // mutual-nearest-neighbour islands shows a perfect gap at its island
  // count. When estimating, k is the sparsified graph's component count
  // (capped by max_speakers); an oracle count replaces it outright.
  const Vec full_degree = a.rowwise().sum();
  const int k_cap = int(std::min<long>(max_speakers, n - 1));
  int best_p = 0, best_k = 0;
  double best_r = std::numeric_limits<double>::infinity();
  double best_gap = 0.0;
  for (int p = 1; p <= int(n) - 1; ++p) {
    Mat v = sparsify_top_p(a, p);
    int k = oracle;  // oracle < n here, so ev(k) below exists
    if (oracle == 0) {
      k = component_count(v);
      if (k > k_cap) continue;  // fragmented beyond any plausible count
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(shifted_laplacian(v, full_degree),
                                          Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();  // ascending
    const double lmax = ev(n - 1);
    if (!(lmax > 1e-12)) continue;  // empty graph (all-zero affinities)
    const double gap = (ev(k) - ev(k - 1)) / lmax;
    if (!(gap > 1e-12)) continue;
    const double r = double(p) / (double(n) * gap);
    if (r < best_r) {
      best_r = r;
      best_p = p;
      best_k = k;
      best_gap = gap;
    }
  }
  if (best_p == 0) {
    if (oracle == 0) throw InternalError("cluster: no usable sparsification");
    best_p = int(n) - 1;  // oracle disagrees with every gap: full graph
    best_k = oracle;
  }

  res.num_speakers = best_k;
  res.chosen_p = best_p;
  res.eigengap_ratio = best_gap;
  if (best_k == 1) {
    res.labels.assign(size_t(n), 0);
    return res;
  }

  Mat l = shifted_laplacian(sparsify_top_p(a, best_p), full_degree);
  Eigen::SelfAdjointEigenSolver<Mat> es(l);
  Mat spectral = es.eigenvectors().leftCols(best_k);
  // On well-separated data those eigenvectors are supported on one graph
  // component each; normalizing the rows turns every point into (+-) a unit
  // coordinate vector, which k-means separates exactly.
  for (long i = 0; i < n; ++i) {
    const double rn = spectral.row(i).norm();
    if (rn > 1e-12) spectral.row(i) /= rn;
  }

  std::vector<int> best_labels;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> labels;
    const double inertia = kmeans_once(spectral, best_k, seed, labels);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = std::move(labels);
    }
  }
  canonicalize_labels(best_labels, best_k);
  res.labels = std::move(best_labels);
  return res;
}

ProfileSet<double> cluster_centroids(
    const std::vector<std::vector<double>>& embeddings,
    const std::vector<int>& labels, int num_speakers) {
  if (embeddings.size() != labels.size())
    throw DataError("centroids: one label per embedding required");
  if (num_speakers < 1) throw DataError("centroids: no clusters");
  if (embeddings.empty()) throw DataError("centroids: no embeddings");
  const long d = long(embeddings[0].size());
  std::vector<std::vector<double>> mean(size_t(num_speakers),
                                        std::vector<double>(size_t(d), 0.0));
  std::vector<long> count(size_t(num_speakers), 0);
  for (size_t i = 0; i < embeddings.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= num_speakers)
      throw DataError("centroids: label outside [0, num_speakers)");
    if (long(embeddings[i].size()) != d)
      throw DataError("centroids: inconsistent embedding dims");
    for (long j = 0; j < d; ++j) mean[size_t(l)][size_t(j)] += embeddings[i][size_t(j)];
    count[size_t(l)] += 1;
  }
  ProfileSet<double> out;
  for (int c = 0; c < num_speakers; ++c) {
    if (count[size_t(c)] == 0)
      throw DataError("centroids: cluster " + std::to_string(c) + " is empty");
    double sq = 0.0;
    for (auto& v : mean[size_t(c)]) {
      v /= double(count[size_t(c)]);
      sq += v * v;
    }
    if (!(sq > 1e-24))
      throw DataError("centroids: cluster " + std::to_string(c) +
                      " has a zero-norm mean");
    const double inv = 1.0 / std::sqrt(sq);
    SpeakerProfile<double> p;
    p.id = "spk" + std::to_string(c);
    p.vec = mean[size_t(c)];
    for (auto& v : p.vec) v *= inv;
    out.profiles.push_back(std::move(p));
  }
  return out;
}

// ------------------------------------------------------------- chunking ----

std::vector<std::pair<double, double>> chunk_audio(
    const SpeechRegionList& regions, double max_chunk_sec) {
  if (!(max_chunk_sec > 0.0)) throw DataError("chunking: max chunk <= 0");
  std::vector<std::pair<double, double>> pieces;
  for (size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    if (!(r.start_sec < r.end_sec))
      throw DataError("chunking: empty or reversed region");
    if (i > 0 && regions[i - 1].end_sec > r.start_sec)
      throw DataError("chunking: regions out of order");
    const double lo = i == 0 ? r.start_sec
                             : 0.5 * (regions[i - 1].end_sec + r.start_sec);
    const double hi = i + 1 == regions.size()
                          ? r.end_sec
                          : 0.5 * (r.end_sec + regions[i + 1].start_sec);
    pieces.push_back({lo, hi});
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [lo, hi] : pieces) {
    const double len = hi - lo;
    if (len <= max_chunk_sec + 1e-9) {
      out.push_back({lo, hi});
      continue;
    }
    const long parts = long(std::ceil(len / max_chunk_sec - 1e-12));
    const double step = len / double(parts);
    for (long j = 0; j < parts; ++j)
      out.push_back({lo + double(j) * step,
                     j + 1 == parts ? hi : lo + double(j + 1) * step});
  }
  return out;
}

// --------------------------------------------------- segment conversion ----

DiarSegmentList tokens_to_segments(const SerializedHypothesis& hyp,
                                   const std::vector<std::string>& speaker_ids,
                                   double merge_gap_m,
                                   double max_token_dur_n) {
  if (!(merge_gap_m > 0.0) || !(max_token_dur_n > 0.0))
    throw DataError("segments: merge gap and duration cap must be positive");
  const size_t n = hyp.tokens.size();
  if (hyp.speakers.size() != n || hyp.start_secs.size() != n ||
      hyp.end_secs.size() != n)
    throw InternalError("segments: ragged hypothesis arrays");

  struct Tok {
    double start, end;
  };
  std::map<std::string, std::vector<Tok>> per_speaker;
  for (size_t i = 0; i < n; ++i) {
    const double a = hyp.start_secs[i], b = hyp.end_secs[i];
    if (a < 0.0 || b < 0.0) continue;  // untimed (special) token
    if (b < a) continue;               // reversed estimate
    if (b - a >= max_token_dur_n) continue;  // implausibly long token
    const int s = hyp.speakers[i];
    if (s < 0 || size_t(s) >= speaker_ids.size())
      throw DataError("segments: speaker index outside the id list");
    per_speaker[speaker_ids[size_t(s)]].push_back({a, b});
  }

  DiarSegmentList out;
  for (auto& [id, toks] : per_speaker) {
    std::sort(toks.begin(), toks.end(), [](const Tok& x, const Tok& y) {
      if (x.start != y.start) return x.start < y.start;
      return x.end < y.end;
    });
    size_t i = 0;
    while (i < toks.size()) {
      double lo = toks[i].start, hi = toks[i].end;
      size_t j = i + 1;
      while (j < toks.size() && toks[j].start - hi < merge_gap_m) {
        hi = std::max(hi, toks[j].end);
        ++j;
      }
      if (hi > lo) out.push_back({id, lo, hi});
      i = j;
    }
  }
  std::sort(out.begin(), out.end(), [](const DiarSegment& a,
                                       const DiarSegment& b) {
    if (a.start_sec != b.start_sec) return a.start_sec < b.start_sec;
    return a.speaker < b.speaker;
  });
  return out;
}

// ---------------------------------------------------------- transcripts ----

std::string to_rttm(const DiarSegmentList& segments,
                    const std::string& recording_id) {
  std::string out;
  char buf[64];
  for (const auto& s : segments) {
    std::snprintf(buf, sizeof buf, "%.2f %.2f", s.start_sec,
                  s.end_sec - s.start_sec);
    out += "SPEAKER " + recording_id + " 1 " + buf + " <NA> <NA> " +
           s.speaker + " <NA> <NA>\n";
  }
  return out;
}

std::string to_transcript_json(const Transcript& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, words] : t.by_speaker) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& w : words)
      arr.push_back({{"token", w.token},
                     {"start", w.start_sec},
                     {"end", w.end_sec}});
    j[id] = arr;
  }
  return j.dump(2) + "\n";
}

}  // namespace sadiar
