#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdrec/alphabet.hpp"
#include "mdrec/network.hpp"

namespace mdrec {

// Deduplicated word set with a prefix-tree index over class sequences.
class Lexicon {
 public:
  Lexicon() = default;
  // Words are deduplicated and sorted; every word must be spellable.
  Lexicon(std::vector<std::string> words, const Alphabet& alphabet);

  const std::vector<std::string>& words() const { return words_; }
  bool empty() const { return words_.empty(); }

  struct Node {
    std::vector<std::pair<int, int>> children;  // (class index, node id), sorted
    int parent = -1;
    int cls = 0;        // class on the incoming edge
    int word = -1;      // index into words() when a word ends here
  };
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<std::string> words_;
  std::vector<Node> nodes_;
};

// One word per line, UTF-8, sorted, deduplicated.
std::vector<std::string> load_wordlist(const std::string& path);
void save_wordlist(const std::vector<std::string>& words, const std::string& path);

struct DecoderConfig {
  double theta = 0.36787944117144233;  // geometric-mean confidence threshold
  bool use_dictionary = false;
};

// Per-frame argmax indices (ties -> lowest index).
std::vector<int> best_path_indices(const ProbMatrix& probs, int t_begin, int t_end);

// Argmax per frame, collapsed and mapped to text.
std::string best_path(const ProbMatrix& probs, const Alphabet& alphabet);

struct ViterbiResult {
  std::string word;
  double score = 0.0;  // per-frame geometric mean of the best path probability
};

// Most probable lexicon word over the frame range [t_begin, t_end) by
// token passing over the prefix tree, matching each word's image-order
// class sequence; ties break to the lexicographically smallest word.
// Empty result = no word is feasible in the segment.
std::optional<ViterbiResult> word_viterbi(const ProbMatrix& probs, int t_begin, int t_end,
                                          const Lexicon& lex);

// Dictionary word when its confidence reaches cfg.theta, otherwise the raw
// best path of the segment.
std::string decode_segment(const ProbMatrix& probs, int t_begin, int t_end,
                           const Alphabet& alphabet, const Lexicon& lex,
                           const DecoderConfig& cfg);

// Reverses the spatial word order into logical reading order and the class
// order inside Arabic-flagged words.
std::string bidi_fix(const std::vector<std::string>& words, const std::vector<bool>& arabic,
                     const Alphabet& alphabet);

// Splits at space-class frames, applies the dictionary to Arabic segments,
// joins with single spaces and fixes directionality.
std::string decode_line(const ProbMatrix& probs, const Alphabet& alphabet, const Lexicon* lex,
                        const DecoderConfig& cfg);

// Spatial (left-to-right) class sequence of a logical-order transcript:
// word order reversed, classes of Arabic words reversed, single space
// class between words. This is the CTC training target for a rendered
// line and the inverse of what decode_line's bidi step undoes.
std::vector<int> spatial_class_sequence(const std::string& text, const Alphabet& alphabet);

std::vector<std::string> split_words(const std::string& text);

}  // namespace mdrec
