#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sadiar/errors.hpp"
#include "sadiar/scoring.hpp"

TEST_SUITE_BEGIN("scoring");

using namespace sadiar;

namespace {

DiarSegment seg(const std::string& spk, double a, double b) {
  return DiarSegment{spk, a, b};
}

std::vector<std::string> words(std::initializer_list<const char*> w) {
  return std::vector<std::string>(w.begin(), w.end());
}

// Test-local edit distance (plain DP, no backtrace) used as an oracle.
long edit_distance(const std::vector<std::string>& a,
                   const std::vector<std::string>& b) {
  std::vector<long> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0L);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = long(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      long best = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      best = std::min(best, prev[j] + 1);
      best = std::min(best, cur[j - 1] + 1);
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Maximum total over injective partial row->column mappings, by recursion.
long brute_best_matching(const std::vector<std::vector<long>>& ov, size_t i,
                         std::vector<char>& used) {
  if (i == ov.size()) return 0;
  long best = brute_best_matching(ov, i + 1, used);
  for (size_t j = 0; j < ov[i].size(); ++j) {
    if (used[j]) continue;
    used[j] = 1;
    best = std::max(best, ov[i][j] + brute_best_matching(ov, i + 1, used));
    used[j] = 0;
  }
  return best;
}

long brute_best_matching(const std::vector<std::vector<long>>& ov) {
  std::vector<char> used(ov.empty() ? 0 : ov[0].size(), 0);
  return brute_best_matching(ov, 0, used);
}

// Instant-level diarization scorer built directly from segment membership:
// an independent implementation of the same definition der() claims.
struct BruteDer {
  long ref_instants = 0, miss = 0, fa = 0, ser = 0;
};

BruteDer brute_der(const DiarSegmentList& ref, const DiarSegmentList& hyp) {
  auto names_of = [](const DiarSegmentList& s) {
    std::set<std::string> n;
    for (const auto& x : s) n.insert(x.speaker);
    return std::vector<std::string>(n.begin(), n.end());
  };
  const auto rn = names_of(ref), hn = names_of(hyp);
  long horizon = 0;
  for (const auto& s : ref) horizon = std::max(horizon, std::lround(s.end_sec * 100));
  for (const auto& s : hyp) horizon = std::max(horizon, std::lround(s.end_sec * 100));
  auto active = [](const DiarSegmentList& segs, const std::string& spk, long t) {
    for (const auto& s : segs)
      if (s.speaker == spk && std::lround(s.start_sec * 100) <= t &&
          t < std::lround(s.end_sec * 100))
        return true;
    return false;
  };
  // matched time per (ref, hyp) speaker pair, then the best injective map
  std::vector<std::vector<long>> ov(rn.size(), std::vector<long>(hn.size(), 0));
  for (size_t i = 0; i < rn.size(); ++i)
    for (size_t j = 0; j < hn.size(); ++j)
      for (long t = 0; t < horizon; ++t)
        ov[i][j] += active(ref, rn[i], t) && active(hyp, hn[j], t);
  const long matched = brute_best_matching(ov);

  BruteDer out;
  long min_sum = 0;
  for (long t = 0; t < horizon; ++t) {
    long nr = 0, nh = 0;
    for (const auto& n : rn) nr += active(ref, n, t);
    for (const auto& n : hn) nh += active(hyp, n, t);
    out.ref_instants += nr;
    out.miss += std::max(0L, nr - nh);
    out.fa += std::max(0L, nh - nr);
    min_sum += std::min(nr, nh);
  }
  out.ser = min_sum - matched;
  return out;
}

}  // namespace

TEST_CASE("wer: word-level edit counts and rate") {
  const auto ten = words({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});

  SUBCASE("identical sequences have zero error") {
    const WerCounts c = wer(ten, ten);
    CHECK(c.substitutions == 0);
    CHECK(c.deletions == 0);
    CHECK(c.insertions == 0);
    CHECK(c.ref_words == 10);
    CHECK(c.rate == 0.0);
  }
  SUBCASE("one substitution in ten words is 10%") {
    auto hyp = ten;
    hyp[3] = "X";
    const WerCounts c = wer(ten, hyp);
    CHECK(c.substitutions == 1);
    CHECK(c.deletions == 0);
    CHECK(c.insertions == 0);
    CHECK(c.rate == doctest::Approx(10.0));
  }
  SUBCASE("empty hypothesis against five words is 100% deletions") {
    const WerCounts c = wer(words({"a", "b", "c", "d", "e"}), {});
    CHECK(c.deletions == 5);
    CHECK(c.substitutions == 0);
    CHECK(c.insertions == 0);
    CHECK(c.rate == doctest::Approx(100.0));
  }
  SUBCASE("empty reference divides by max(1, ref_words)") {
    const WerCounts c = wer({}, words({"a", "b", "c"}));
    CHECK(c.insertions == 3);
    CHECK(c.ref_words == 0);
    CHECK(c.rate == doctest::Approx(300.0));
  }
  SUBCASE("both empty") {
    const WerCounts c = wer({}, {});
    CHECK(c.edits() == 0);
    CHECK(c.rate == 0.0);
  }
  SUBCASE("kitten/sitting letters: 2 substitutions + 1 insertion") {
    const auto r = words({"k", "i", "t", "t", "e", "n"});
    const auto h = words({"s", "i", "t", "t", "i", "n", "g"});
    const WerCounts c = wer(r, h);
    CHECK(c.substitutions == 2);
    CHECK(c.insertions == 1);
    CHECK(c.deletions == 0);
    CHECK(c.edits() == 3);
    CHECK(c.rate == doctest::Approx(50.0));
  }
}

TEST_CASE("wer: structural invariants against an independent distance") {
  std::mt19937 rng(991);
  const std::vector<std::string> alpha = {"aa", "bb", "cc"};
  auto rand_seq = [&](size_t max_len) {
    std::vector<std::string> s(rng() % (max_len + 1));
    for (auto& w : s) w = alpha[rng() % alpha.size()];
    return s;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = rand_seq(6), b = rand_seq(6), c = rand_seq(6);
    const WerCounts ab = wer(a, b), ba = wer(b, a);
    // total edits equal the reference edit distance
    CHECK(ab.edits() == edit_distance(a, b));
    // distance symmetry and the fixed deletion/insertion imbalance
    CHECK(ab.edits() == ba.edits());
    CHECK(ab.deletions - ab.insertions == long(a.size()) - long(b.size()));
    CHECK(ab.substitutions <= long(std::min(a.size(), b.size())));
    CHECK(ab.deletions >= std::max(0L, long(a.size()) - long(b.size())));
    CHECK(ab.insertions >= std::max(0L, long(b.size()) - long(a.size())));
    // triangle inequality on totals
    CHECK(wer(a, c).edits() <= ab.edits() + wer(b, c).edits());
  }
}

TEST_CASE("map_speakers_optimal: exact assignment") {
  SUBCASE("diagonal-dominant matrix maps to the identity") {
    const std::vector<std::vector<double>> m = {
        {9, 1, 0}, {2, 8, 1}, {0, 1, 7}};
    CHECK(map_speakers_optimal(m) == std::vector<int>({0, 1, 2}));
  }
  SUBCASE("permuted diagonal maps to the inverse permutation") {
    // mass sits at (0,2), (1,0), (2,1)
    const std::vector<std::vector<double>> m = {
        {0, 1, 9}, {8, 0, 1}, {1, 7, 0}};
    CHECK(map_speakers_optimal(m) == std::vector<int>({2, 0, 1}));
  }
  SUBCASE("rectangular: extra rows stay unmatched") {
    const std::vector<std::vector<double>> m = {
        {5, 0}, {0, 5}, {1, 1}, {2, 0}};
    const auto r = map_speakers_optimal(m);
    REQUIRE(r.size() == 4);
    CHECK(r[0] == 0);
    CHECK(r[1] == 1);
    CHECK(r[2] == -1);
    CHECK(r[3] == -1);
  }
  SUBCASE("rectangular: more columns than rows") {
    const std::vector<std::vector<double>> m = {{0, 0, 9, 0}, {0, 6, 1, 0}};
    CHECK(map_speakers_optimal(m) == std::vector<int>({2, 1}));
  }
  SUBCASE("ties prefer matching and lower columns") {
    const std::vector<std::vector<double>> z = {{0, 0}, {0, 0}};
    CHECK(map_speakers_optimal(z) == std::vector<int>({0, 1}));
    const std::vector<std::vector<double>> ones = {{1, 1}, {1, 1}};
    CHECK(map_speakers_optimal(ones) == std::vector<int>({0, 1}));
  }
  SUBCASE("empty input") {
    CHECK(map_speakers_optimal({}).empty());
    const std::vector<std::vector<double>> no_cols = {{}, {}};
    CHECK(map_speakers_optimal(no_cols) == std::vector<int>({-1, -1}));
  }
  SUBCASE("invalid input is rejected") {
    CHECK_THROWS_AS(map_speakers_optimal({{1, 2}, {3}}), DataError);
    CHECK_THROWS_AS(map_speakers_optimal({{1, -2}}), DataError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(map_speakers_optimal({{nan}}), DataError);
  }
  SUBCASE("random matrices match brute force totals") {
    std::mt19937 rng(417);
    for (int trial = 0; trial < 200; ++trial) {
      const size_t rows = 1 + rng() % 6, cols = 1 + rng() % 6;
      std::vector<std::vector<double>> m(rows, std::vector<double>(cols, 0.0));
      std::vector<std::vector<long>> ml(rows, std::vector<long>(cols, 0));
      for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) {
          ml[i][j] = long(rng() % 20);
          m[i][j] = double(ml[i][j]);
        }
      const auto r = map_speakers_optimal(m);
      long total = 0;
      std::set<int> used;
      for (size_t i = 0; i < rows; ++i)
        if (r[i] >= 0) {
          CHECK(used.insert(r[i]).second);  // injective
          total += ml[i][size_t(r[i])];
        }
      CHECK(total == brute_best_matching(ml));
    }
  }
}

TEST_CASE("cpwer: concatenated per-speaker word error") {
  SUBCASE("identical transcripts score zero") {
    const std::map<std::string, std::vector<std::string>> t = {
        {"A", words({"x", "y", "z"})}, {"B", words({"u", "v"})}};
    const CpWerReport r = cpwer(t, t);
    CHECK(r.cpwer == 0.0);
    CHECK(r.edits() == 0);
    CHECK(r.ref_words == 5);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].ref_speaker == "A");
    CHECK(r.pairs[0].hyp_speaker == "A");
  }
  SUBCASE("permuted hypothesis labels still score zero") {
    const std::map<std::string, std::vector<std::string>> ref = {
        {"A", words({"x", "y", "z"})}, {"B", words({"u", "v"})}};
    const std::map<std::string, std::vector<std::string>> hyp = {
        {"P", words({"u", "v"})}, {"Q", words({"x", "y", "z"})}};
    const CpWerReport r = cpwer(ref, hyp);
    CHECK(r.cpwer == 0.0);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].ref_speaker == "A");
    CHECK(r.pairs[0].hyp_speaker == "Q");
    CHECK(r.pairs[1].ref_speaker == "B");
    CHECK(r.pairs[1].hyp_speaker == "P");
  }
  SUBCASE("one substitution in twenty words is 5%") {
    std::vector<std::string> r20(20, "w"), h20 = r20;
    for (size_t i = 0; i < r20.size(); ++i) r20[i] += std::to_string(i);
    h20 = r20;
    h20[7] = "wrong";
    const CpWerReport r = cpwer({{"A", r20}}, {{"A", h20}});
    CHECK(r.substitutions == 1);
    CHECK(r.ref_words == 20);
    CHECK(r.cpwer == doctest::Approx(5.0));
  }
  SUBCASE("spurious hypothesis speaker adds pure insertions") {
    const auto ten = words({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    const CpWerReport base = cpwer({{"A", ten}}, {{"A", ten}});
    const CpWerReport extra =
        cpwer({{"A", ten}}, {{"A", ten}, {"B", words({"p", "q", "r"})}});
    CHECK(extra.edits() == base.edits() + 3);
    CHECK(extra.insertions == 3);
    CHECK(extra.substitutions == 0);
    CHECK(extra.deletions == 0);
    CHECK(extra.cpwer == doctest::Approx(30.0));
    // the unmatched speaker shows up with an empty reference name
    bool found = false;
    for (const auto& p : extra.pairs)
      if (p.ref_speaker.empty() && p.hyp_speaker == "B") {
        found = true;
        CHECK(p.counts.insertions == 3);
      }
    CHECK(found);
  }
  SUBCASE("missing hypothesis speaker becomes deletions") {
    const CpWerReport r =
        cpwer({{"A", words({"a", "b"})}, {"B", words({"c", "d", "e"})}},
              {{"A", words({"a", "b"})}});
    CHECK(r.deletions == 3);
    CHECK(r.cpwer == doctest::Approx(60.0));
  }
  SUBCASE("equal-cost pairings pick the lexicographically first permutation") {
    // every pairing costs one substitution per pair; identity wins
    const CpWerReport r =
        cpwer({{"A", words({"x"})}, {"B", words({"y"})}},
              {{"P", words({"u"})}, {"Q", words({"v"})}});
    CHECK(r.edits() == 2);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].ref_speaker == "A");
    CHECK(r.pairs[0].hyp_speaker == "P");
    CHECK(r.pairs[1].ref_speaker == "B");
    CHECK(r.pairs[1].hyp_speaker == "Q");
  }
  SUBCASE("empty reference map is rejected") {
    CHECK_THROWS_AS(cpwer({}, {{"A", words({"a"})}}), DataError);
  }
  SUBCASE("too many speakers are rejected") {
    std::map<std::string, std::vector<std::string>> big;
    for (int i = 0; i < 17; ++i) big["s" + std::to_string(i)] = words({"a"});
    CHECK_THROWS_AS(cpwer(big, big), DataError);
  }
  SUBCASE("random cases match a brute-force pairing search") {
    std::mt19937 rng(552);
    const std::vector<std::string> alpha = {"aa", "bb", "cc"};
    auto rand_map = [&](int max_spk, bool allow_empty) {
      std::map<std::string, std::vector<std::string>> m;
      const int n = allow_empty ? int(rng() % (max_spk + 1))
                                : 1 + int(rng() % max_spk);
      for (int s = 0; s < n; ++s) {
        std::vector<std::string> w(rng() % 6);
        for (auto& x : w) x = alpha[rng() % alpha.size()];
        m["spk" + std::to_string(s)] = w;
      }
      return m;
    };
    for (int trial = 0; trial < 100; ++trial) {
      const auto ref = rand_map(4, false);
      const auto hyp = rand_map(4, true);
      const CpWerReport got = cpwer(ref, hyp);

      // brute force: pad to a square of word lists, try all permutations
      std::vector<std::vector<std::string>> rv, hv;
      for (const auto& [n, w] : ref) rv.push_back(w);
      for (const auto& [n, w] : hyp) hv.push_back(w);
      const size_t k = std::max(rv.size(), hv.size());
      rv.resize(k);
      hv.resize(k);
      std::vector<int> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      long best = -1;
      do {
        long tot = 0;
        for (size_t i = 0; i < k; ++i)
          tot += edit_distance(rv[i], hv[size_t(perm[i])]);
        if (best < 0 || tot < best) best = tot;
      } while (std::next_permutation(perm.begin(), perm.end()));

      CHECK(got.edits() == best);
      long ref_total = 0;
      for (const auto& [n, w] : ref) ref_total += long(w.size());
      CHECK(got.ref_words == ref_total);
      CHECK(got.cpwer ==
            doctest::Approx(100.0 * double(best) /
                            double(std::max<long>(1, ref_total))));
      // renaming hypothesis speakers must not change the score
      std::map<std::string, std::vector<std::string>> renamed;
      for (const auto& [n, w] : hyp) renamed["zz" + n] = w;
      CHECK(cpwer(ref, renamed).edits() == best);
    }
  }
}

TEST_CASE("der: instant-level diarization error") {
  SUBCASE("identical segmentation under any labeling scores zero") {
    const DiarSegmentList ref = {seg("A", 0.0, 10.0), seg("B", 3.0, 7.0)};
    const DiarSegmentList hyp = {seg("w", 3.0, 7.0), seg("q", 0.0, 10.0)};
    const DerReport r = der(ref, hyp);
    CHECK(r.miss_instants == 0);
    CHECK(r.fa_instants == 0);
    CHECK(r.ser_instants == 0);
    CHECK(r.der == 0.0);
    CHECK(r.ref_instants == 1400);
    CHECK(r.total_ref_speech_sec == doctest::Approx(14.0));
    REQUIRE(r.speaker_mapping.size() == 2);
    CHECK(r.speaker_mapping[0] == std::pair<std::string, std::string>("A", "q"));
    CHECK(r.speaker_mapping[1] == std::pair<std::string, std::string>("B", "w"));
  }
  SUBCASE("empty hypothesis is pure miss") {
    const DerReport r = der({seg("A", 0.0, 10.0)}, {});
    CHECK(r.miss_instants == 1000);
    CHECK(r.ref_instants == 1000);
    CHECK(r.fa_instants == 0);
    CHECK(r.ser_instants == 0);
    CHECK(r.miss == doctest::Approx(100.0));
    CHECK(r.der == doctest::Approx(100.0));
    CHECK(r.speaker_mapping.empty());
  }
  SUBCASE("one second of wrong speaker over ten seconds is 10% SER") {
    const DiarSegmentList ref = {seg("A", 0.0, 5.0), seg("B", 5.0, 10.0)};
    const DiarSegmentList hyp = {seg("a", 0.0, 5.0), seg("b", 5.0, 9.0),
                                 seg("a", 9.0, 10.0)};
    const DerReport r = der(ref, hyp);
    CHECK(r.ser_instants == 100);
    CHECK(r.miss_instants == 0);
    CHECK(r.fa_instants == 0);
    CHECK(r.ser == doctest::Approx(10.0));
    CHECK(r.der == doctest::Approx(10.0));
  }
  SUBCASE("overlapped reference counts every active speaker") {
    const DiarSegmentList ref = {seg("A", 0.0, 10.0), seg("B", 0.0, 10.0)};
    const DerReport r = der(ref, {seg("A", 0.0, 10.0)});
    CHECK(r.ref_instants == 2000);
    CHECK(r.miss_instants == 1000);
    CHECK(r.ser_instants == 0);
    CHECK(r.miss == doctest::Approx(50.0));
    CHECK(r.der == doctest::Approx(50.0));
  }
  SUBCASE("false alarm beyond the reference extent still counts") {
    const DerReport r =
        der({seg("A", 0.0, 1.0)}, {seg("A", 0.0, 1.0), seg("A", 2.0, 3.0)});
    CHECK(r.fa_instants == 100);
    CHECK(r.fa == doctest::Approx(100.0));
    CHECK(r.miss_instants == 0);
    CHECK(r.ser_instants == 0);
  }
  SUBCASE("same-speaker overlapping segments union-merge") {
    const DerReport r = der({seg("A", 0.0, 1.0), seg("A", 0.5, 1.5)},
                            {seg("A", 0.0, 1.5)});
    CHECK(r.ref_instants == 150);
    CHECK(r.der == 0.0);
  }
  SUBCASE("zero-length segments contribute nothing") {
    const DerReport r =
        der({seg("A", 0.0, 1.0), seg("A", 2.0, 2.0)}, {seg("A", 0.0, 1.0)});
    CHECK(r.ref_instants == 100);
    CHECK(r.der == 0.0);
  }
  SUBCASE("invalid input is rejected") {
    CHECK_THROWS_AS(der({seg("A", -1.0, 1.0)}, {}), DataError);
    CHECK_THROWS_AS(der({seg("A", 2.0, 1.0)}, {}), DataError);
    CHECK_THROWS_AS(der({seg("A", 0.0, 1.0)}, {seg("B", 3.0, 2.0)}), DataError);
    CHECK_THROWS_AS(der({seg("A", 0.0, 1.0)}, {}, -0.1), DataError);
    CHECK_THROWS_AS(der({}, {seg("A", 0.0, 1.0)}), DataError);
    CHECK_THROWS_AS(der({seg("A", 1.0, 1.0)}, {}), DataError);  // no speech
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(der({seg("A", 0.0, inf)}, {}), DataError);
  }
  SUBCASE("collar excludes boundary error") {
    const DiarSegmentList ref = {seg("A", 0.0, 10.0)};
    const DiarSegmentList hyp = {seg("A", 0.2, 10.0)};
    const DerReport strict = der(ref, hyp, 0.0);
    CHECK(strict.miss_instants == 20);
    CHECK(strict.der > 0.0);
    const DerReport lax = der(ref, hyp, 0.25);
    CHECK(lax.miss_instants == 0);
    CHECK(lax.der == 0.0);
    CHECK(lax.ref_instants == 950);  // 25 instants dropped at each boundary
  }
}

TEST_CASE("der: random cases match the instant-level oracle") {
  std::mt19937 rng(4242);
  const std::vector<std::string> ref_names = {"A", "B", "C", "D"};
  const std::vector<std::string> hyp_names = {"w", "x", "y", "z"};
  auto rand_segments = [&](const std::vector<std::string>& pool, int max_segs,
                           int min_segs) {
    DiarSegmentList out;
    const int n = min_segs + int(rng() % (max_segs - min_segs + 1));
    const size_t n_spk = 1 + rng() % pool.size();
    for (int i = 0; i < n; ++i) {
      const long a = long(rng() % 500);
      const long d = 1 + long(rng() % 200);
      out.push_back(seg(pool[rng() % n_spk], double(a) * 0.01,
                        double(a + d) * 0.01));
    }
    return out;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const DiarSegmentList ref = rand_segments(ref_names, 10, 1);
    const DiarSegmentList hyp = rand_segments(hyp_names, 10, 0);

    const DerReport got = der(ref, hyp);
    const BruteDer want = brute_der(ref, hyp);
    CHECK(got.ref_instants == want.ref_instants);
    CHECK(got.miss_instants == want.miss);
    CHECK(got.fa_instants == want.fa);
    CHECK(got.ser_instants == want.ser);
    CHECK(got.der_instants() == want.miss + want.fa + want.ser);
    CHECK(got.der == doctest::Approx(got.miss + got.fa + got.ser)
                         .epsilon(1e-12));

    // invariance: shuffle segments and relabel hypothesis speakers
    DiarSegmentList ref2 = ref, hyp2 = hyp;
    std::shuffle(ref2.begin(), ref2.end(), rng);
    std::shuffle(hyp2.begin(), hyp2.end(), rng);
    for (auto& s : hyp2) s.speaker = "spk_" + s.speaker + "_r";
    const DerReport again = der(ref2, hyp2);
    CHECK(again.miss_instants == got.miss_instants);
    CHECK(again.fa_instants == got.fa_instants);
    CHECK(again.ser_instants == got.ser_instants);
    CHECK(again.ref_instants == got.ref_instants);
  }
}

TEST_CASE("score report emitters") {
  const DiarSegmentList ref = {seg("A", 0.0, 5.0), seg("B", 5.0, 10.0)};
  const DiarSegmentList hyp = {seg("a", 0.0, 5.0), seg("b", 5.0, 9.0),
                               seg("a", 9.0, 10.0)};
  ScoreReport rep;
  rep.der = der(ref, hyp);
  rep.cpwer = cpwer({{"A", words({"x", "y"})}, {"B", words({"u"})}},
                    {{"A", words({"x", "z"})}, {"B", words({"u"})}});

  SUBCASE("json parses back with exact integer identity") {
    const std::string js = score_report_json(rep);
    const auto j = nlohmann::json::parse(js);
    CHECK(j.at("der").at("ser_instants").get<long>() == 100);
    CHECK(j.at("der").at("der_instants").get<long>() ==
          j.at("der").at("ser_instants").get<long>() +
              j.at("der").at("miss_instants").get<long>() +
              j.at("der").at("fa_instants").get<long>());
    CHECK(j.at("der").at("ref_instants").get<long>() == 1000);
    CHECK(j.at("der").at("der").get<double>() == doctest::Approx(10.0));
    CHECK(j.at("der").at("speaker_mapping").at("A").get<std::string>() == "a");
    CHECK(j.at("cpwer").at("substitutions").get<long>() == 1);
    CHECK(j.at("cpwer").at("ref_words").get<long>() == 3);
    CHECK(j.at("cpwer").at("pairs").size() == 2);
    // emission is deterministic
    CHECK(score_report_json(rep) == js);
  }
  SUBCASE("numbers are fixed to six significant digits") {
    // 1/3 of the reference is missed: 33.3333...% must round at 6 digits
    ScoreReport thirds;
    thirds.der = der({seg("A", 0.0, 0.03)}, {seg("A", 0.0, 0.02)});
    const std::string js = score_report_json(thirds);
    CHECK(js.find("33.3333") != std::string::npos);
    CHECK(js.find("33.33333") == std::string::npos);
  }
  SUBCASE("partial reports omit the other block") {
    ScoreReport only_der;
    only_der.der = rep.der;
    const auto j = nlohmann::json::parse(score_report_json(only_der));
    CHECK(j.contains("der"));
    CHECK(!j.contains("cpwer"));
  }
  SUBCASE("table mentions every headline number") {
    const std::string t = score_report_table(rep);
    CHECK(t.find("SER") != std::string::npos);
    CHECK(t.find("Miss") != std::string::npos);
    CHECK(t.find("FA") != std::string::npos);
    CHECK(t.find("DER") != std::string::npos);
    CHECK(t.find("cpWER") != std::string::npos);
    CHECK(t.find("A->a") != std::string::npos);
    CHECK(t.find("10.00%") != std::string::npos);
  }
}

TEST_SUITE_END();
