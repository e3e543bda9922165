#include "sadiar/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace sadiar {

// ------------------------------------------------------------ assignment ----

namespace {

// Grid resolution: one instant per 10 ms.
long grid(double sec) { return std::lround(sec * 100.0); }

// Maximum-total assignment via a memoized search over (row, used-column
// mask). Requires cols <= 16 (callers transpose so the smaller side is the
// column side). Ties prefer matching over skipping and lower columns.
struct MaxAssign {
  const std::vector<std::vector<double>>& w;
  int rows, cols;
  std::vector<double> memo;
  std::vector<char> seen;

  MaxAssign(const std::vector<std::vector<double>>& w_, int r, int c)
      : w(w_), rows(r), cols(c), memo(size_t(r + 1) << c, 0.0),
        seen(size_t(r + 1) << c, 0) {}

  double best(int i, int mask) {
    if (i == rows) return 0.0;
    const size_t key = (size_t(i) << cols) | size_t(mask);
    if (seen[key]) return memo[key];
    double b = best(i + 1, mask);  // leave row i unmatched
    for (int j = 0; j < cols; ++j)
      if (!(mask & (1 << j)))
        b = std::max(b, w[size_t(i)][size_t(j)] + best(i + 1, mask | (1 << j)));
    seen[key] = 1;
    memo[key] = b;
    return b;
  }

  std::vector<int> solve() {
    std::vector<int> out(size_t(rows), -1);
    int mask = 0;
    for (int i = 0; i < rows; ++i) {
      const double b = best(i, mask);
      int pick = -1;
      for (int j = 0; j < cols; ++j)
        if (!(mask & (1 << j)) &&
            w[size_t(i)][size_t(j)] + best(i + 1, mask | (1 << j)) == b) {
          pick = j;
          break;
        }
      if (pick >= 0) mask |= 1 << pick;
      out[size_t(i)] = pick;
    }
    return out;
  }
};

}  // namespace

std::vector<int> map_speakers_optimal(
    const std::vector<std::vector<double>>& overlap) {
  const int rows = int(overlap.size());
  if (rows == 0) return {};
  const int cols = int(overlap[0].size());
  for (const auto& row : overlap) {
    if (int(row.size()) != cols)
      throw DataError("map_speakers_optimal: ragged matrix");
    for (double v : row)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw DataError("map_speakers_optimal: negative or non-finite entry");
  }
  if (cols == 0) return std::vector<int>(size_t(rows), -1);
  if (std::min(rows, cols) > 16 || std::max(rows, cols) > 64)
    throw DataError("map_speakers_optimal: too many speakers");

  if (cols <= rows) {
    MaxAssign a(overlap, rows, cols);
    return a.solve();
  }
  // More columns than rows: solve the transpose, then invert the mapping.
  std::vector<std::vector<double>> t(size_t(cols),
                                     std::vector<double>(size_t(rows), 0.0));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) t[size_t(j)][size_t(i)] = overlap[size_t(i)][size_t(j)];
  MaxAssign a(t, cols, rows);
  std::vector<int> inv = a.solve();
  std::vector<int> out(size_t(rows), -1);
  for (int j = 0; j < cols; ++j)
    if (inv[size_t(j)] >= 0) out[size_t(inv[size_t(j)])] = j;
  return out;
}

// ------------------------------------------------------------------ DER ----

namespace {

// Per-speaker activity timelines on the 10 ms grid; segments of one speaker
// union-merge so a speaker counts at most once per instant.
std::map<std::string, std::vector<char>> timelines(const DiarSegmentList& segs,
                                                   long horizon) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& s : segs) {
    auto& line = out[s.speaker];
    if (line.empty()) line.assign(size_t(horizon), 0);
    const long b = std::max(0L, grid(s.start_sec));
    const long e = std::min(horizon, grid(s.end_sec));
    for (long t = b; t < e; ++t) line[size_t(t)] = 1;
  }
  return out;
}

void validate_segments(const DiarSegmentList& segs, const char* which) {
  for (const auto& s : segs) {
    if (!std::isfinite(s.start_sec) || !std::isfinite(s.end_sec))
      throw DataError(std::string("der: non-finite time in ") + which);
    if (s.start_sec < 0.0 || s.end_sec < 0.0)
      throw DataError(std::string("der: negative time in ") + which);
    if (s.end_sec < s.start_sec)
      throw DataError(std::string("der: segment ends before it starts in ") +
                      which);
  }
}

}  // namespace

DerReport der(const DiarSegmentList& ref, const DiarSegmentList& hyp,
              double collar_sec) {
  validate_segments(ref, "reference");
  validate_segments(hyp, "hypothesis");
  if (!(collar_sec >= 0.0) || !std::isfinite(collar_sec))
    throw DataError("der: negative collar");

  long horizon = 0;
  for (const auto& s : ref) horizon = std::max(horizon, grid(s.end_sec));
  for (const auto& s : hyp) horizon = std::max(horizon, grid(s.end_sec));

  const auto ref_lines = timelines(ref, horizon);
  const auto hyp_lines = timelines(hyp, horizon);

  // No-score zones: +-collar around every reference segment boundary.
  std::vector<char> no_score(size_t(horizon), 0);
  if (collar_sec > 0.0)
    for (const auto& s : ref)
      for (double b : {s.start_sec, s.end_sec}) {
        const long lo = std::max(0L, grid(b - collar_sec));
        const long hi = std::min(horizon, grid(b + collar_sec));
        for (long t = lo; t < hi; ++t) no_score[size_t(t)] = 1;
      }

  std::vector<std::string> ref_names, hyp_names;
  std::vector<const std::vector<char>*> rl, hl;
  for (const auto& [name, line] : ref_lines) {
    ref_names.push_back(name);
    rl.push_back(&line);
  }
  for (const auto& [name, line] : hyp_lines) {
    hyp_names.push_back(name);
    hl.push_back(&line);
  }

  // Matched time per (ref, hyp) speaker pair over scored instants.
  std::vector<std::vector<double>> overlap(
      rl.size(), std::vector<double>(hl.size(), 0.0));
  for (size_t i = 0; i < rl.size(); ++i)
    for (size_t j = 0; j < hl.size(); ++j) {
      long m = 0;
      for (long t = 0; t < horizon; ++t)
        m += !no_score[size_t(t)] && (*rl[i])[size_t(t)] && (*hl[j])[size_t(t)];
      overlap[i][j] = double(m);
    }
  const std::vector<int> mapping = map_speakers_optimal(overlap);

  DerReport rep;
  for (long t = 0; t < horizon; ++t) {
    if (no_score[size_t(t)]) continue;
    long nr = 0, nh = 0, ncorrect = 0;
    for (size_t i = 0; i < rl.size(); ++i) {
      if (!(*rl[i])[size_t(t)]) continue;
      ++nr;
      const int j = mapping[i];
      if (j >= 0 && (*hl[size_t(j)])[size_t(t)]) ++ncorrect;
    }
    for (const auto* line : hl) nh += (*line)[size_t(t)];
    rep.ref_instants += nr;
    rep.miss_instants += std::max(0L, nr - nh);
    rep.fa_instants += std::max(0L, nh - nr);
    rep.ser_instants += std::min(nr, nh) - ncorrect;
  }
  if (rep.ref_instants == 0)
    throw DataError("der: reference has no scored speech");

  const double den = double(rep.ref_instants);
  rep.total_ref_speech_sec = den / 100.0;
  rep.miss = 100.0 * double(rep.miss_instants) / den;
  rep.fa = 100.0 * double(rep.fa_instants) / den;
  rep.ser = 100.0 * double(rep.ser_instants) / den;
  rep.der = 100.0 * double(rep.der_instants()) / den;
  for (size_t i = 0; i < rl.size(); ++i)
    if (mapping[i] >= 0 && overlap[i][size_t(mapping[i])] > 0.0)
      rep.speaker_mapping.push_back(
          {ref_names[i], hyp_names[size_t(mapping[i])]});
  return rep;
}

// ------------------------------------------------------------------ WER ----

WerCounts wer(const std::vector<std::string>& ref,
              const std::vector<std::string>& hyp) {
  const size_t m = ref.size(), n = hyp.size();
  std::vector<std::vector<long>> d(m + 1, std::vector<long>(n + 1, 0));
  for (size_t i = 0; i <= m; ++i) d[i][0] = long(i);
  for (size_t j = 0; j <= n; ++j) d[0][j] = long(j);
  for (size_t i = 1; i <= m; ++i)
    for (size_t j = 1; j <= n; ++j) {
      const long sub = d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }

  WerCounts out;
  out.ref_words = long(m);
  size_t i = m, j = n;  // backtrace: match/substitution, deletion, insertion
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  out.rate = 100.0 * double(out.edits()) / double(std::max<long>(1, out.ref_words));
  return out;
}

// ---------------------------------------------------------------- cpWER ----

namespace {

// Minimum-total perfect matching on a k x k cost matrix (k <= 16): forward
// dynamic program over used-column masks with per-row parent choices.
std::vector<int> min_assignment(const std::vector<std::vector<long>>& cost) {
  const int k = int(cost.size());
  const long inf = std::numeric_limits<long>::max() / 2;
  std::vector<long> dp(size_t(1) << k, inf);
  std::vector<std::vector<int>> choice(size_t(k),
                                       std::vector<int>(size_t(1) << k, -1));
  dp[0] = 0;
  for (int i = 0; i < k; ++i) {
    std::vector<long> next(size_t(1) << k, inf);
    for (int mask = 0; mask < (1 << k); ++mask) {
      if (dp[size_t(mask)] >= inf) continue;
      for (int j = 0; j < k; ++j) {
        if (mask & (1 << j)) continue;
        const long c = dp[size_t(mask)] + cost[size_t(i)][size_t(j)];
        if (c < next[size_t(mask | (1 << j))]) {
          next[size_t(mask | (1 << j))] = c;
          choice[size_t(i)][size_t(mask | (1 << j))] = j;
        }
      }
    }
    dp.swap(next);
  }
  std::vector<int> out(size_t(k), -1);
  int mask = (1 << k) - 1;
  for (int i = k - 1; i >= 0; --i) {
    const int j = choice[size_t(i)][size_t(mask)];
    out[size_t(i)] = j;
    mask &= ~(1 << j);
  }
  return out;
}

}  // namespace

CpWerReport cpwer(const std::map<std::string, std::vector<std::string>>& ref,
                  const std::map<std::string, std::vector<std::string>>& hyp) {
  if (ref.empty()) throw DataError("cpwer: no reference speakers");

  std::vector<std::string> ref_names, hyp_names;
  std::vector<const std::vector<std::string>*> ref_words, hyp_words;
  for (const auto& [name, words] : ref) {
    ref_names.push_back(name);
    ref_words.push_back(&words);
  }
  for (const auto& [name, words] : hyp) {
    hyp_names.push_back(name);
    hyp_words.push_back(&words);
  }
  const int nr = int(ref_names.size()), nh = int(hyp_names.size());
  const int k = std::max(nr, nh);  // pad the smaller side with empty speakers
  if (k > 16) throw DataError("cpwer: more than 16 speakers");

  const std::vector<std::string> empty;
  auto words_of = [&](const std::vector<const std::vector<std::string>*>& v,
                      int i) -> const std::vector<std::string>& {
    return i < int(v.size()) ? *v[size_t(i)] : empty;
  };

  std::vector<std::vector<WerCounts>> pair_counts(
      size_t(k), std::vector<WerCounts>(size_t(k), WerCounts{}));
  std::vector<std::vector<long>> cost(size_t(k), std::vector<long>(size_t(k), 0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      pair_counts[size_t(i)][size_t(j)] =
          wer(words_of(ref_words, i), words_of(hyp_words, j));
      cost[size_t(i)][size_t(j)] = pair_counts[size_t(i)][size_t(j)].edits();
    }

  std::vector<int> best_perm;
  if (k <= 8) {
    // Lexicographic enumeration; the strict < keeps the first minimum.
    std::vector<int> perm(size_t(k), 0);
    std::iota(perm.begin(), perm.end(), 0);
    long best = std::numeric_limits<long>::max();
    do {
      long total = 0;
      for (int i = 0; i < k; ++i) total += cost[size_t(i)][size_t(perm[size_t(i)])];
      if (total < best) {
        best = total;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best_perm = min_assignment(cost);
  }

  CpWerReport rep;
  for (int i = 0; i < k; ++i) {
    const int j = best_perm[size_t(i)];
    const WerCounts& c = pair_counts[size_t(i)][size_t(j)];
    rep.substitutions += c.substitutions;
    rep.deletions += c.deletions;
    rep.insertions += c.insertions;
    rep.ref_words += c.ref_words;
    if (i >= nr && words_of(hyp_words, j).empty()) continue;  // pad vs pad
    CpWerPair p;
    p.ref_speaker = i < nr ? ref_names[size_t(i)] : std::string();
    p.hyp_speaker = j < nh ? hyp_names[size_t(j)] : std::string();
    p.counts = c;
    rep.pairs.push_back(std::move(p));
  }
  rep.cpwer = 100.0 * double(rep.edits()) /
              double(std::max<long>(1, rep.ref_words));
  return rep;
}

// --------------------------------------------------------------- report ----

namespace {

// Fix a double to 6 significant digits so emitted reports are byte-stable.
double round6(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::atof(buf);
}

}  // namespace

std::string score_report_json(const ScoreReport& report) {
  nlohmann::json j = nlohmann::json::object();
  if (report.der) {
    const DerReport& d = *report.der;
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [r, h] : d.speaker_mapping) m[r] = h;
    j["der"] = {{"ser", round6(d.ser)},
                {"miss", round6(d.miss)},
                {"fa", round6(d.fa)},
                {"der", round6(d.der)},
                {"ser_instants", d.ser_instants},
                {"miss_instants", d.miss_instants},
                {"fa_instants", d.fa_instants},
                {"der_instants", d.der_instants()},
                {"ref_instants", d.ref_instants},
                {"total_ref_speech_sec", round6(d.total_ref_speech_sec)},
                {"speaker_mapping", m}};
  }
  if (report.cpwer) {
    const CpWerReport& c = *report.cpwer;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : c.pairs)
      pairs.push_back({{"ref", p.ref_speaker},
                       {"hyp", p.hyp_speaker},
                       {"substitutions", p.counts.substitutions},
                       {"deletions", p.counts.deletions},
                       {"insertions", p.counts.insertions},
                       {"ref_words", p.counts.ref_words},
                       {"rate", round6(p.counts.rate)}});
    j["cpwer"] = {{"cpwer", round6(c.cpwer)},
                  {"substitutions", c.substitutions},
                  {"deletions", c.deletions},
                  {"insertions", c.insertions},
                  {"ref_words", c.ref_words},
                  {"pairs", pairs}};
  }
  return j.dump(2) + "\n";
}

std::string score_report_table(const ScoreReport& report) {
  std::string out;
  char buf[160];
  if (report.der) {
    const DerReport& d = *report.der;
    out += "            SER     Miss       FA      DER\n";
    std::snprintf(buf, sizeof buf, "diar   %7.2f%% %7.2f%% %7.2f%% %7.2f%%\n",
                  d.ser, d.miss, d.fa, d.der);
    out += buf;
    std::snprintf(buf, sizeof buf, "ref speech %.2f s\n",
                  d.total_ref_speech_sec);
    out += buf;
    out += "mapping:";
    for (const auto& [r, h] : d.speaker_mapping) out += " " + r + "->" + h;
    if (d.speaker_mapping.empty()) out += " (none)";
    out += "\n";
  }
  if (report.cpwer) {
    const CpWerReport& c = *report.cpwer;
    std::snprintf(buf, sizeof buf,
                  "cpWER  %7.2f%%  (S=%ld D=%ld I=%ld / %ld ref words)\n",
                  c.cpwer, c.substitutions, c.deletions, c.insertions,
                  c.ref_words);
    out += buf;
  }
  return out;
}

}  // namespace sadiar
