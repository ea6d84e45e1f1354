#pragma once

#include <map>
#include <string>
#include <vector>

namespace mdrec {

// Ordered character classes; a class may span several codepoints (the
// multi-dot signs). Index 0 is the implicit blank, classes occupy 1..C.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> classes,
                    std::string blank_placeholder = "<blank>");

  int size() const { return static_cast<int>(classes_.size()); }  // C, excluding blank
  int outputs() const { return size() + 1; }

  // 1-based class index -> class string.
  const std::string& class_str(int index) const;
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& blank_placeholder() const { return blank_placeholder_; }

  // Index of the designated space class, or 0 if absent.
  int space_index() const { return space_index_; }

  // Greedy longest-match tokenization into class indices; raises
  // Errc::unspellable when the text cannot be covered.
  std::vector<int> tokenize(const std::string& text) const;
  bool spellable(const std::string& text) const;

  // Concatenates class strings; index 0 (blank) is skipped.
  std::string to_text(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> classes_;
  std::string blank_placeholder_ = "<blank>";
  std::map<std::vector<uint32_t>, int> lookup_;  // codepoint sequence -> 1-based index
  int space_index_ = 0;
  size_t max_class_cps_ = 0;
};

// File format: UTF-8, first line is the blank placeholder, then one class
// per line. Duplicate or empty classes are errors.
Alphabet load_alphabet(const std::string& path);
void save_alphabet(const Alphabet& a, const std::string& path);

// True iff the word has at least one letter and every letter codepoint
// lies in the Arabic Unicode segments (U+0600-06FF, U+0750-077F,
// U+FB50-FDFF, U+FE70-FEFF). Digits and punctuation are ignored.
bool is_arabic_word(const std::string& word);

// Letter test used by is_arabic_word; covers ASCII/Latin-1/Latin Extended
// letters and the letter-bearing parts of the Arabic blocks.
bool is_letter_codepoint(uint32_t cp);

}  // namespace mdrec
