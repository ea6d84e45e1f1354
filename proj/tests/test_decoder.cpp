#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mdrec/decoder.hpp"
#include "mdrec/error.hpp"
#include "mdrec/rng.hpp"

using namespace mdrec;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Independent oracle: best CTC alignment of one spelling via plain
// Viterbi over the blank-augmented label sequence.
double best_alignment_logp(const ProbMatrix& probs, int t0, int t1,
                           const std::vector<int>& spelling) {
  const int s_len = 2 * static_cast<int>(spelling.size()) + 1;
  auto label_at = [&](int s) { return s % 2 == 0 ? 0 : spelling[s / 2]; };
  auto lp = [&](int t, int cls) {
    double p = probs.p(cls, t);
    return p > 0.0 ? std::log(p) : kNegInf;
  };
  std::vector<double> v(s_len, kNegInf), nv(s_len);
  v[0] = lp(t0, 0);
  if (s_len > 1) v[1] = lp(t0, label_at(1));
  for (int t = t0 + 1; t < t1; ++t) {
    for (int s = 0; s < s_len; ++s) {
      double best = v[s];
      if (s >= 1) best = std::max(best, v[s - 1]);
      if (s >= 2 && label_at(s) != 0 && label_at(s) != label_at(s - 2))
        best = std::max(best, v[s - 2]);
      nv[s] = best == kNegInf ? kNegInf : best + lp(t, label_at(s));
    }
    v.swap(nv);
  }
  double best = v[s_len - 1];
  if (s_len > 1) best = std::max(best, v[s_len - 2]);
  return best;
}

// Exhaustive per-word scoring with the same image-order spelling
// convention and tie-breaking as the implementation contract.
std::optional<ViterbiResult> oracle_word_viterbi(const ProbMatrix& probs, int t0, int t1,
                                                 const std::vector<std::string>& words,
                                                 const Alphabet& alphabet) {
  std::optional<ViterbiResult> best;
  double best_logp = kNegInf;
  for (const std::string& w : words) {
    std::vector<int> spelling = alphabet.tokenize(w);
    if (is_arabic_word(w)) std::reverse(spelling.begin(), spelling.end());
    double lp = best_alignment_logp(probs, t0, t1, spelling);
    if (lp == kNegInf) continue;
    if (lp > best_logp || (lp == best_logp && best && w < best->word)) {
      best_logp = lp;
      best = ViterbiResult{w, std::exp(lp / (t1 - t0))};
    }
  }
  return best;
}

ProbMatrix random_probs(int t_frames, int classes, Rng& rng) {
  ProbMatrix probs;
  probs.p.resize(classes, t_frames);
  for (int t = 0; t < t_frames; ++t) {
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) {
      probs.p(k, t) = 0.02 + rng.unit();
      sum += probs.p(k, t);
    }
    probs.p.col(t) /= sum;
  }
  return probs;
}

Alphabet latin_alphabet() { return Alphabet({" ", "a", "b", "c", "d"}); }

// Sets frame t to put `mass` on class `cls` and the rest uniformly.
void set_frame(ProbMatrix& probs, int t, int cls, double mass) {
  const int classes = probs.classes();
  probs.p.col(t).setConstant((1.0 - mass) / (classes - 1));
  probs.p(cls, t) = mass;
}

}  // namespace

TEST_CASE("best_path takes per-frame argmax, collapses and maps") {
  Alphabet a = latin_alphabet();  // classes: 1=" ",2=a,3=b,4=c,5=d
  ProbMatrix probs;
  probs.p.resize(a.outputs(), 3);
  probs.p.setConstant(0.01);
  probs.p(2, 0) = 0.9;  // 'a'
  probs.p(0, 1) = 0.9;  // blank
  probs.p(3, 2) = 0.9;  // 'b'
  CHECK(best_path(probs, a) == "ab");

  // All frames blank-dominated -> empty text.
  ProbMatrix blanky;
  blanky.p.resize(a.outputs(), 4);
  blanky.p.setConstant(0.05);
  for (int t = 0; t < 4; ++t) blanky.p(0, t) = 0.7;
  CHECK(best_path(blanky, a).empty());

  // Exact tie between blank (index 0) and 'a' -> blank wins.
  ProbMatrix tie;
  tie.p.resize(a.outputs(), 1);
  tie.p.setConstant(0.02);
  tie.p(0, 0) = 0.46;
  tie.p(2, 0) = 0.46;
  CHECK(best_path(tie, a).empty());
}

TEST_CASE("word_viterbi: single candidate equals its best alignment") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"ab"}, a);
  Rng rng(3);
  ProbMatrix probs = random_probs(5, a.outputs(), rng);
  auto res = word_viterbi(probs, 0, 5, lex);
  REQUIRE(res.has_value());
  CHECK(res->word == "ab");
  double oracle = best_alignment_logp(probs, 0, 5, a.tokenize("ab"));
  CHECK(res->score == doctest::Approx(std::exp(oracle / 5)).epsilon(1e-12));
}

TEST_CASE("word_viterbi: concentrated probs recover the word with high score") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"ab", "ba", "cd", "dc", "abc"}, a);
  ProbMatrix probs;
  probs.p.resize(a.outputs(), 4);
  set_frame(probs, 0, 2, 0.99);  // a
  set_frame(probs, 1, 2, 0.99);  // a
  set_frame(probs, 2, 3, 0.99);  // b
  set_frame(probs, 3, 3, 0.99);  // b
  auto res = word_viterbi(probs, 0, 4, lex);
  REQUIRE(res.has_value());
  CHECK(res->word == "ab");
  CHECK(res->score >= 0.99);
}

TEST_CASE("word_viterbi equals the exhaustive oracle on fuzzed instances") {
  Alphabet a = latin_alphabet();
  Rng rng(99);
  const std::string letters = "abcd";
  int done = 0;
  while (done < 400) {
    // Random small lexicon.
    std::set<std::string> uniq;
    int n_words = rng.range_int(1, 40);
    for (int i = 0; i < n_words; ++i) {
      int len = rng.range_int(1, 4);
      std::string w;
      for (int k = 0; k < len; ++k) w += letters[rng.below(4)];
      uniq.insert(w);
    }
    std::vector<std::string> words(uniq.begin(), uniq.end());
    Lexicon lex(words, a);
    int t_frames = rng.range_int(1, 8);
    ProbMatrix probs = random_probs(t_frames, a.outputs(), rng);

    auto got = word_viterbi(probs, 0, t_frames, lex);
    auto want = oracle_word_viterbi(probs, 0, t_frames, words, a);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->word == want->word);
      CHECK(got->score == doctest::Approx(want->score).epsilon(1e-12));
    }
    ++done;
  }
}

TEST_CASE("word_viterbi ignores probabilities of non-participating classes") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"ab", "ba"}, a);  // only classes a=2, b=3 and blank participate
  Rng rng(17);
  for (int iter = 0; iter < 50; ++iter) {
    ProbMatrix probs = random_probs(6, a.outputs(), rng);
    auto before = word_viterbi(probs, 0, 6, lex);
    ProbMatrix permuted = probs;
    permuted.p.row(1).swap(permuted.p.row(4));  // swap " " and "c" rows
    permuted.p.row(4).swap(permuted.p.row(5));  // rotate in "d"
    auto after = word_viterbi(permuted, 0, 6, lex);
    REQUIRE(before.has_value() == after.has_value());
    if (before) {
      CHECK(before->word == after->word);
      CHECK(before->score == after->score);
    }
  }
}

TEST_CASE("word_viterbi: no feasible word and error cases") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"abc"}, a);
  ProbMatrix probs;
  probs.p.resize(a.outputs(), 2);  // too short for "abc"
  probs.p.setConstant(1.0 / a.outputs());
  CHECK_FALSE(word_viterbi(probs, 0, 2, lex).has_value());

  Lexicon empty;
  CHECK_THROWS_AS(word_viterbi(probs, 0, 2, empty), Error);
}

TEST_CASE("decode_segment applies the theta threshold") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"ab"}, a);
  ProbMatrix probs;
  probs.p.resize(a.outputs(), 2);
  // Frame probabilities chosen so the best path for "ab" has geometric
  // mean exactly 0.5: p(a)=0.5, p(b)=0.5 per frame.
  set_frame(probs, 0, 2, 0.5);
  set_frame(probs, 1, 3, 0.5);

  DecoderConfig dict_on;
  dict_on.use_dictionary = true;
  dict_on.theta = 0.36787944117144233;  // 1/e
  CHECK(decode_segment(probs, 0, 2, a, lex, dict_on) == "ab");  // 0.5 >= 1/e

  dict_on.theta = 0.60653065971263342;  // 1/sqrt(e): raw reading preferred
  CHECK(decode_segment(probs, 0, 2, a, lex, dict_on) == best_path(probs, a));

  DecoderConfig off;
  CHECK(decode_segment(probs, 0, 2, a, lex, off) == best_path(probs, a));

  // Low-confidence case falls back under the default theta too.
  ProbMatrix weak;
  weak.p.resize(a.outputs(), 2);
  set_frame(weak, 0, 2, 0.2);
  set_frame(weak, 1, 3, 0.2);
  dict_on.theta = 0.36787944117144233;
  auto vit = word_viterbi(weak, 0, 2, lex);
  REQUIRE(vit.has_value());
  CHECK(vit->score < dict_on.theta);
  CHECK(decode_segment(weak, 0, 2, a, lex, dict_on) == best_path(weak, a));
}

TEST_CASE("raising theta never switches from fallback to dictionary") {
  Alphabet a = latin_alphabet();
  Lexicon lex({"ab", "cd", "abc"}, a);
  Rng rng(5);
  for (int iter = 0; iter < 40; ++iter) {
    ProbMatrix probs = random_probs(rng.range_int(2, 7), a.outputs(), rng);
    DecoderConfig cfg;
    cfg.use_dictionary = true;
    bool was_dict = true;
    for (double theta : {1e-9, 0.2, 0.36787944117144233, 0.5, 0.60653065971263342, 0.9, 0.999}) {
      cfg.theta = theta;
      auto vit = word_viterbi(probs, 0, probs.frames(), lex);
      bool is_dict = vit && vit->score >= theta;
      std::string out = decode_segment(probs, 0, probs.frames(), a, lex, cfg);
      if (is_dict) CHECK(out == vit->word);
      if (!was_dict) CHECK_FALSE(is_dict);
      was_dict = is_dict;
    }
  }
}

TEST_CASE("is_arabic_word classifies by Arabic unicode segments") {
  CHECK(is_arabic_word("كتاب"));  // كتاب
  CHECK_FALSE(is_arabic_word("abc"));
  CHECK_FALSE(is_arabic_word(""));
  CHECK_FALSE(is_arabic_word("2013"));      // digits only: no letters
  CHECK_FALSE(is_arabic_word("abب"));  // mixed scripts
  CHECK(is_arabic_word("ب2013"));      // Arabic letter + digits
  CHECK_FALSE(is_arabic_word("..."));
}

TEST_CASE("bidi_fix reverses word order and Arabic word interiors") {
  Alphabet a({" ", "a", "b", "c", "ب", "ت", "ن"});
  CHECK(bidi_fix({"abc"}, {false}, a) == "abc");

  // Two Arabic words in spatial order -> reversed order and interiors.
  std::string w1 = "بت";        // بت
  std::string w2 = "تن";        // تن
  std::string rev_w1 = "تب";
  std::string rev_w2 = "نت";
  CHECK(bidi_fix({w1, w2}, {true, true}, a) == rev_w2 + " " + rev_w1);

  // Latin token keeps its interior and its slot in the reversal.
  Alphabet digits({" ", "0", "1", "2", "3", "ب", "ت", "ن"});
  CHECK(bidi_fix({w1, "2013", w2}, {true, false, true}, digits) ==
        rev_w2 + " 2013 " + rev_w1);

  // Involution on all-Arabic lines.
  std::vector<std::string> spatial{w1, w2};
  std::string once = bidi_fix(spatial, {true, true}, a);
  std::vector<std::string> words_once = split_words(once);
  std::vector<bool> flags(words_once.size(), true);
  CHECK(bidi_fix(words_once, flags, a) == w1 + " " + w2);
}

TEST_CASE("decode_line splits at space frames and fixes direction") {
  Alphabet a = latin_alphabet();
  const int sp = 1, ca = 2, cb = 3;
  ProbMatrix probs;
  probs.p.resize(a.outputs(), 5);
  set_frame(probs, 0, ca, 0.9);
  set_frame(probs, 1, ca, 0.9);
  set_frame(probs, 2, sp, 0.9);
  set_frame(probs, 3, cb, 0.9);
  set_frame(probs, 4, cb, 0.9);
  DecoderConfig cfg;
  // Spatial words ["a", "b"] -> logical "b a" after the word reversal.
  CHECK(decode_line(probs, a, nullptr, cfg) == "b a");

  ProbMatrix empty;
  empty.p.resize(a.outputs(), 0);
  CHECK(decode_line(empty, a, nullptr, cfg).empty());
}

TEST_CASE("decode_line: single segment without spaces equals bidi of best path") {
  Alphabet a = latin_alphabet();
  Rng rng(8);
  for (int iter = 0; iter < 30; ++iter) {
    ProbMatrix probs = random_probs(6, a.outputs(), rng);
    probs.p.row(1).setConstant(1e-6);  // suppress the space class
    for (int t = 0; t < 6; ++t) probs.p.col(t) /= probs.p.col(t).sum();
    DecoderConfig cfg;
    std::string bp = best_path(probs, a);
    std::vector<std::string> words = split_words(bp);
    std::vector<bool> flags(words.size());
    for (size_t i = 0; i < words.size(); ++i) flags[i] = is_arabic_word(words[i]);
    CHECK(decode_line(probs, a, nullptr, cfg) == bidi_fix(words, flags, a));
  }
}

TEST_CASE("decode_line applies the dictionary only to Arabic segments") {
  // Alphabet with Arabic letters and Latin letters; lexicon corrects an
  // Arabic segment while a Latin segment passes through raw.
  Alphabet a({" ", "a", "b", "ب", "ت", "ن"});
  const int sp = 1, ca = 2, cb = 3, beh = 4, teh = 5, noon = 6;
  // Lexicon holds the logical word تب = (teh, beh); written right-to-left
  // its image-order classes are (beh, teh).
  std::string arabic_word = "تب";
  Lexicon lex({arabic_word}, a);

  ProbMatrix probs;
  probs.p.resize(a.outputs(), 7);
  set_frame(probs, 0, ca, 0.9);
  set_frame(probs, 1, cb, 0.9);
  set_frame(probs, 2, sp, 0.9);
  // Arabic segment: clear beh, then ambiguous teh/noon favoring noon.
  set_frame(probs, 3, beh, 0.8);
  set_frame(probs, 4, beh, 0.8);
  probs.p.col(5).setConstant(0.01);
  probs.p(noon, 5) = 0.50;
  probs.p(teh, 5) = 0.45;
  probs.p.col(5) /= probs.p.col(5).sum();
  set_frame(probs, 6, teh, 0.0);  // uniform-ish tail
  probs.p.col(6).setConstant(1.0 / a.outputs());

  DecoderConfig raw_cfg;
  std::string raw = decode_line(probs, a, nullptr, raw_cfg);

  DecoderConfig dict_cfg;
  dict_cfg.use_dictionary = true;
  dict_cfg.theta = 0.2;
  std::string corrected = decode_line(probs, a, &lex, dict_cfg);

  // Latin part "ab" is left alone; Arabic segment becomes the lexicon
  // word in logical order after bidi.
  CHECK(corrected == arabic_word + " ab");
  CHECK(raw != corrected);
}

TEST_CASE("spatial_class_sequence is the rendering-order target") {
  Alphabet a({" ", "a", "b", "ب", "ت"});
  // Logical "ab بت": words reversed spatially, Arabic word reversed
  // internally: spatial = (beh=4? no: بت tokenizes to (ب=4, ت=5) ->
  // reversed (5, 4)) ... final: [ت ب] space [a b].
  std::vector<int> seq = spatial_class_sequence("ab بت", a);
  CHECK(seq == std::vector<int>{5, 4, 1, 2, 3});
  CHECK(spatial_class_sequence("", a).empty());
}
