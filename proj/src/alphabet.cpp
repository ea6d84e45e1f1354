#include "mdrec/alphabet.hpp"

#include <fstream>
#include <sstream>

#include "mdrec/error.hpp"
#include "mdrec/utf8.hpp"

namespace mdrec {

Alphabet::Alphabet(std::vector<std::string> classes, std::string blank_placeholder)
    : classes_(std::move(classes)), blank_placeholder_(std::move(blank_placeholder)) {
  for (size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].empty()) fail(Errc::malformed, "alphabet: empty class at index " + std::to_string(i + 1));
    std::vector<uint32_t> cps = utf8_decode(classes_[i]);
    if (!lookup_.emplace(cps, static_cast<int>(i + 1)).second)
      fail(Errc::duplicate_key, "alphabet: duplicate class \"" + classes_[i] + "\"");
    max_class_cps_ = std::max(max_class_cps_, cps.size());
    if (classes_[i] == " ") space_index_ = static_cast<int>(i + 1);
  }
}

const std::string& Alphabet::class_str(int index) const {
  if (index < 1 || index > size()) fail(Errc::invalid_config, "alphabet: class index out of range");
  return classes_[index - 1];
}

std::vector<int> Alphabet::tokenize(const std::string& text) const {
  std::vector<uint32_t> cps = utf8_decode(text);
  std::vector<int> out;
  size_t i = 0;
  while (i < cps.size()) {
    int match = 0;
    size_t match_len = 0;
    size_t max_len = std::min(max_class_cps_, cps.size() - i);
    for (size_t len = max_len; len >= 1; --len) {
      std::vector<uint32_t> key(cps.begin() + i, cps.begin() + i + len);
      auto it = lookup_.find(key);
      if (it != lookup_.end()) {
        match = it->second;
        match_len = len;
        break;
      }
    }
    if (match == 0)
      fail(Errc::unspellable, "text not spellable with the alphabet near \"" +
                                  utf8_encode_one(cps[i]) + "\"");
    out.push_back(match);
    i += match_len;
  }
  return out;
}

bool Alphabet::spellable(const std::string& text) const {
  try {
    tokenize(text);
    return true;
  } catch (const Error& e) {
    if (e.code() == Errc::unspellable) return false;
    throw;
  }
}

std::string Alphabet::to_text(const std::vector<int>& indices) const {
  std::string out;
  for (int idx : indices)
    if (idx != 0) out += class_str(idx);
  return out;
}

Alphabet load_alphabet(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) fail(Errc::malformed, path + ": empty alphabet file");
  std::string placeholder = lines.front();
  std::vector<std::string> classes(lines.begin() + 1, lines.end());
  if (classes.empty()) fail(Errc::malformed, path + ": alphabet has no classes");
  return Alphabet(std::move(classes), std::move(placeholder));
}

void save_alphabet(const Alphabet& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path);
  out << a.blank_placeholder() << "\n";
  for (const std::string& c : a.classes()) out << c << "\n";
  if (!out) fail(Errc::io, "write failed for " + path);
}

namespace {

inline bool in_range(uint32_t cp, uint32_t lo, uint32_t hi) { return cp >= lo && cp <= hi; }

bool is_arabic_block(uint32_t cp) {
  return in_range(cp, 0x0600, 0x06FF) || in_range(cp, 0x0750, 0x077F) ||
         in_range(cp, 0xFB50, 0xFDFF) || in_range(cp, 0xFE70, 0xFEFF);
}

}  // namespace

bool is_letter_codepoint(uint32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  // Latin-1 and Latin Extended letters, excluding multiply/divide signs.
  if (in_range(cp, 0x00C0, 0x024F) && cp != 0x00D7 && cp != 0x00F7) return true;
  if (is_arabic_block(cp)) {
    // Everything in the Arabic blocks counts as a letter except the
    // explicit digits, punctuation and format signs.
    if (in_range(cp, 0x0600, 0x0605)) return false;  // number signs
    if (cp == 0x060C || cp == 0x060D || cp == 0x061B || cp == 0x061E || cp == 0x061F)
      return false;                                  // punctuation
    if (in_range(cp, 0x0660, 0x0669)) return false;  // Arabic-Indic digits
    if (in_range(cp, 0x066A, 0x066D)) return false;  // percent etc.
    if (cp == 0x06D4) return false;                  // full stop
    if (in_range(cp, 0x06F0, 0x06F9)) return false;  // extended digits
    return true;
  }
  return false;
}

bool is_arabic_word(const std::string& word) {
  std::vector<uint32_t> cps = utf8_decode(word);
  bool has_letter = false;
  for (uint32_t cp : cps) {
    if (!is_letter_codepoint(cp)) continue;
    if (!is_arabic_block(cp)) return false;
    has_letter = true;
  }
  return has_letter;
}

}  // namespace mdrec
