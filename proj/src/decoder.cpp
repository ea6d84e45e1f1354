#include "mdrec/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "mdrec/ctc.hpp"
#include "mdrec/error.hpp"

namespace mdrec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Lexicon::Lexicon(std::vector<std::string> words, const Alphabet& alphabet) {
  std::set<std::string> uniq(words.begin(), words.end());
  uniq.erase("");
  words_.assign(uniq.begin(), uniq.end());
  nodes_.push_back(Node{});  // root
  for (size_t wi = 0; wi < words_.size(); ++wi) {
    // Index words by their class sequence as written in the image: Arabic
    // runs right-to-left, so their spelling is reversed. The later bidi
    // step restores logical order.
    std::vector<int> spelling = alphabet.tokenize(words_[wi]);
    if (is_arabic_word(words_[wi])) std::reverse(spelling.begin(), spelling.end());
    int cur = 0;
    for (int cls : spelling) {
      auto& ch = nodes_[cur].children;
      auto it = std::lower_bound(ch.begin(), ch.end(), std::make_pair(cls, -1));
      if (it != ch.end() && it->first == cls) {
        cur = it->second;
      } else {
        Node n;
        n.parent = cur;
        n.cls = cls;
        int id = static_cast<int>(nodes_.size());
        // Re-fetch children after potential reallocation.
        nodes_.push_back(n);
        auto& ch2 = nodes_[cur].children;
        ch2.insert(std::lower_bound(ch2.begin(), ch2.end(), std::make_pair(cls, -1)),
                   {cls, id});
        cur = id;
      }
    }
    nodes_[cur].word = static_cast<int>(wi);
  }
}

std::vector<std::string> load_wordlist(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return words;
}

void save_wordlist(const std::vector<std::string>& words, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path);
  for (const std::string& w : words) out << w << "\n";
  if (!out) fail(Errc::io, "write failed for " + path);
}

std::vector<int> best_path_indices(const ProbMatrix& probs, int t_begin, int t_end) {
  std::vector<int> out;
  out.reserve(std::max(0, t_end - t_begin));
  for (int t = t_begin; t < t_end; ++t) {
    int best = 0;
    double best_p = probs.p(0, t);
    for (int k = 1; k < probs.classes(); ++k)
      if (probs.p(k, t) > best_p) {  // strict: ties keep the lowest index
        best_p = probs.p(k, t);
        best = k;
      }
    out.push_back(best);
  }
  return out;
}

std::string best_path(const ProbMatrix& probs, const Alphabet& alphabet) {
  return alphabet.to_text(collapse(best_path_indices(probs, 0, probs.frames())));
}

std::optional<ViterbiResult> word_viterbi(const ProbMatrix& probs, int t_begin, int t_end,
                                          const Lexicon& lex) {
  if (lex.empty()) fail(Errc::empty_input, "word_viterbi: empty lexicon");
  const int t_len = t_end - t_begin;
  if (t_len < 1) fail(Errc::empty_input, "word_viterbi: empty segment");

  const auto& nodes = lex.nodes();
  const size_t n = nodes.size();
  // Token-passing state per trie node: best log path probability with the
  // node's prefix consumed, split by whether the last frame emitted the
  // node's class ("label") or a blank after it ("blank").
  std::vector<double> label(n, kNegInf), blank(n, kNegInf);
  std::vector<double> next_label(n), next_blank(n);

  auto logp = [&](int t, int cls) {
    double p = probs.p(cls, t);
    return p > 0.0 ? std::log(p) : kNegInf;
  };

  blank[0] = logp(t_begin, 0);
  for (size_t i = 1; i < n; ++i)
    if (nodes[i].parent == 0) label[i] = logp(t_begin, nodes[i].cls);

  for (int t = t_begin + 1; t < t_end; ++t) {
    for (size_t i = 0; i < n; ++i) {
      // Stay: blank after blank-or-label of the same prefix; repeat label.
      next_blank[i] = std::max(blank[i], label[i]);
      next_blank[i] = next_blank[i] == kNegInf ? kNegInf : next_blank[i] + logp(t, 0);
      double enter = kNegInf;
      if (i > 0) {
        const int par = nodes[i].parent;
        enter = blank[par];
        if (nodes[par].cls != nodes[i].cls || par == 0)
          enter = std::max(enter, label[par]);  // direct label-to-label transition
        enter = std::max(enter, label[i]);      // repeated emission of the same label
      }
      next_label[i] = enter == kNegInf ? kNegInf : enter + logp(t, nodes[i].cls);
    }
    label.swap(next_label);
    blank.swap(next_blank);
  }

  int best_word = -1;
  double best_logp = kNegInf;
  for (size_t i = 0; i < n; ++i) {
    if (nodes[i].word < 0) continue;
    double v = std::max(label[i], blank[i]);
    if (v == kNegInf) continue;
    if (v > best_logp ||
        (v == best_logp && best_word >= 0 &&
         lex.words()[nodes[i].word] < lex.words()[best_word])) {
      best_logp = v;
      best_word = nodes[i].word;
    }
  }
  if (best_word < 0) return std::nullopt;
  ViterbiResult res;
  res.word = lex.words()[best_word];
  res.score = std::exp(best_logp / t_len);
  return res;
}

std::string decode_segment(const ProbMatrix& probs, int t_begin, int t_end,
                           const Alphabet& alphabet, const Lexicon& lex,
                           const DecoderConfig& cfg) {
  auto raw = [&] {
    return alphabet.to_text(collapse(best_path_indices(probs, t_begin, t_end)));
  };
  if (!cfg.use_dictionary || lex.empty()) return raw();
  auto vit = word_viterbi(probs, t_begin, t_end, lex);
  if (vit && vit->score >= cfg.theta) {
    // Emit the word as written in the image; the bidi step that follows
    // line assembly restores logical order for Arabic words.
    std::string w = vit->word;
    if (is_arabic_word(w)) {
      std::vector<int> cls = alphabet.tokenize(w);
      std::reverse(cls.begin(), cls.end());
      w = alphabet.to_text(cls);
    }
    return w;
  }
  return raw();
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

std::string bidi_fix(const std::vector<std::string>& words, const std::vector<bool>& arabic,
                     const Alphabet& alphabet) {
  if (words.size() != arabic.size())
    fail(Errc::invalid_config, "bidi_fix: one flag per word required");
  std::string out;
  for (size_t i = words.size(); i-- > 0;) {
    std::string w = words[i];
    if (arabic[i]) {
      std::vector<int> cls = alphabet.tokenize(w);
      std::reverse(cls.begin(), cls.end());
      w = alphabet.to_text(cls);
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string decode_line(const ProbMatrix& probs, const Alphabet& alphabet, const Lexicon* lex,
                        const DecoderConfig& cfg) {
  const int t_frames = probs.frames();
  if (t_frames == 0) return "";
  std::vector<int> arg = best_path_indices(probs, 0, t_frames);
  const int space = alphabet.space_index();

  std::vector<std::string> words;
  int seg_start = 0;
  auto flush = [&](int seg_end) {
    if (seg_end <= seg_start) return;
    std::vector<int> seg(arg.begin() + seg_start, arg.begin() + seg_end);
    std::string text = alphabet.to_text(collapse(seg));
    if (text.empty()) return;
    if (lex && cfg.use_dictionary && is_arabic_word(text))
      text = decode_segment(probs, seg_start, seg_end, alphabet, *lex, cfg);
    if (!text.empty()) words.push_back(text);
  };
  for (int t = 0; t < t_frames; ++t) {
    if (space != 0 && arg[t] == space) {
      flush(t);
      seg_start = t + 1;
    }
  }
  flush(t_frames);

  std::vector<bool> arabic(words.size());
  for (size_t i = 0; i < words.size(); ++i) arabic[i] = is_arabic_word(words[i]);
  return bidi_fix(words, arabic, alphabet);
}

std::vector<int> spatial_class_sequence(const std::string& text, const Alphabet& alphabet) {
  std::vector<std::string> words = split_words(text);
  const int space = alphabet.space_index();
  std::vector<int> out;
  for (size_t i = words.size(); i-- > 0;) {
    std::vector<int> cls = alphabet.tokenize(words[i]);
    if (is_arabic_word(words[i])) std::reverse(cls.begin(), cls.end());
    out.insert(out.end(), cls.begin(), cls.end());
    if (i > 0) {
      if (space == 0) fail(Errc::invalid_config, "alphabet has no space class");
      out.push_back(space);
    }
  }
  return out;
}

}  // namespace mdrec
