#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mdrec/alphabet.hpp"
#include "mdrec/image.hpp"
#include "mdrec/rng.hpp"

namespace mdrec {

// Built-in stroke font: polylines in glyph-box coordinates, u in [0, 0.5],
// v in [0, 1.35] with v = 1 on the baseline. Covers Latin-like letters
// a..n, digits, space, period/ellipsis and a set of Arabic-block letters.
using Stroke = std::vector<std::array<double, 2>>;
struct Glyph {
  std::vector<Stroke> strokes;
};
const std::map<uint32_t, Glyph>& builtin_font();
// Codepoints covered by the font, as one UTF-8 string.
std::string builtin_glyphs();

struct SynthConfig {
  std::string glyphs;               // enabled glyph codepoints (UTF-8); empty = whole font
  int words_per_line_min = 3;
  int words_per_line_max = 6;
  int word_len_min = 2;
  int word_len_max = 5;
  int vocab_size = 0;               // 0 = fresh random words, else fixed vocabulary
  double wobble_amplitude = 6.0;    // baseline sine amplitude, px
  double wobble_wavelength = 350.0; // baseline sine wavelength, px
  double slant_min = -0.25;         // per-line shear range, radians
  double slant_max = 0.25;
  double stroke_thickness = 3.0;    // px
  double noise = 0.03;              // additive gaussian sigma
  int height_min = 120;             // raw canvas height range, px
  int height_max = 260;
  double glyph_height = 44.0;       // baseline-relative glyph size, px
  int margin = 26;                  // left/right margin, px

  void validate() const;
};

// Renders `text` along a sinusoidal baseline with a random per-line slant
// and additive noise. Words are laid out right-to-left across the line and
// Arabic words run right-to-left internally, matching the reading order
// restored by the decoder's bidi step. Deterministic given the rng state.
GrayImage synth_line(const std::string& text, const SynthConfig& cfg, Rng& rng);

// Corpus: pages, each a list of (line image reference, transcript).
struct LineRef {
  std::string page_id;
  std::string line_id;
  std::string image_path;
  std::string transcript;
};
struct Page {
  std::string id;
  std::vector<LineRef> lines;
};
struct Corpus {
  std::vector<Page> pages;
  size_t line_count() const;
  std::vector<const LineRef*> all_lines() const;
  std::vector<std::string> transcripts() const;
};

// Directory layout: pages/<page_id>/<line_id>.pgm plus transcripts.tsv
// (UTF-8, "page_id<TAB>line_id<TAB>text"). An empty or missing directory
// loads as an empty corpus.
Corpus load_corpus(const std::string& dir);

class CorpusWriter {
 public:
  explicit CorpusWriter(std::string dir);
  void add_line(const std::string& page_id, const std::string& line_id, const GrayImage& img,
                const std::string& transcript);
  // Writes transcripts.tsv sorted by (page_id, line_id).
  void finalize();

 private:
  std::string dir_;
  std::vector<std::array<std::string, 3>> rows_;
};

// Tokenize transcripts on spaces, count, keep tokens occurring at least
// min_occurrences times (optionally Arabic words only), dedupe, sort.
std::vector<std::string> build_dictionary(const std::vector<std::string>& transcripts,
                                          int min_occurrences, bool arabic_only);

// Collects all codepoints of the transcripts into classes, merging runs of
// '.' into double/triple-dot classes; the space class is always present.
Alphabet derive_alphabet(const std::vector<std::string>& transcripts);

// Generates a synthetic corpus under `dir` (images + transcripts.tsv) and
// writes the derived alphabet to dir/alphabet.txt. Words are drawn from a
// per-script letter pool; a fixed vocabulary is used when cfg.vocab_size
// is positive.
void generate_corpus(const std::string& dir, int pages, int lines_per_page,
                     const SynthConfig& cfg, uint64_t seed);

}  // namespace mdrec
