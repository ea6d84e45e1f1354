#include "mdrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mdrec/decoder.hpp"
#include "mdrec/error.hpp"
#include "mdrec/utf8.hpp"

namespace fs = std::filesystem;

namespace mdrec {

namespace {

Stroke box(double x0, double v0, double x1, double v1) {
  return {{x0, v0}, {x1, v0}, {x1, v1}, {x0, v1}, {x0, v0}};
}

Stroke dot(double x, double v) { return {{x, v - 0.04}, {x, v + 0.04}}; }

std::map<uint32_t, Glyph> make_font() {
  std::map<uint32_t, Glyph> f;
  auto put = [&f](uint32_t cp, std::vector<Stroke> strokes) { f[cp] = Glyph{std::move(strokes)}; };

  // Latin-like letters.
  put('a', {box(0.05, 0.55, 0.45, 1.0)});
  put('b', {{{0.05, 0.0}, {0.05, 1.0}}, box(0.05, 0.55, 0.45, 1.0)});
  put('c', {{{0.45, 0.55}, {0.05, 0.55}, {0.05, 1.0}, {0.45, 1.0}}});
  put('d', {{{0.45, 0.0}, {0.45, 1.0}}, box(0.05, 0.55, 0.45, 1.0)});
  put('e', {{{0.45, 0.78}, {0.05, 0.78}, {0.05, 0.55}, {0.45, 0.55}, {0.45, 1.0}, {0.05, 1.0}}});
  put('f', {{{0.40, 0.05}, {0.18, 0.05}, {0.18, 1.0}}, {{0.02, 0.5}, {0.38, 0.5}}});
  put('g', {box(0.05, 0.55, 0.45, 0.95), {{0.45, 0.95}, {0.45, 1.3}, {0.08, 1.3}}});
  put('h', {{{0.05, 0.0}, {0.05, 1.0}}, {{0.05, 0.55}, {0.45, 0.55}, {0.45, 1.0}}});
  put('i', {{{0.25, 0.55}, {0.25, 1.0}}, dot(0.25, 0.34)});
  put('j', {{{0.30, 0.55}, {0.30, 1.2}, {0.05, 1.3}}, dot(0.30, 0.34)});
  put('k', {{{0.05, 0.0}, {0.05, 1.0}}, {{0.45, 0.5}, {0.05, 0.8}}, {{0.22, 0.68}, {0.45, 1.0}}});
  put('l', {{{0.25, 0.0}, {0.25, 1.0}}});
  put('m', {{{0.05, 1.0}, {0.05, 0.55}, {0.25, 0.72}, {0.45, 0.55}, {0.45, 1.0}}});
  put('n', {{{0.05, 1.0}, {0.05, 0.55}, {0.45, 0.55}, {0.45, 1.0}}});

  // Digits.
  put('0', {box(0.05, 0.1, 0.45, 1.0)});
  put('1', {{{0.12, 0.28}, {0.30, 0.1}, {0.30, 1.0}}});
  put('2', {{{0.05, 0.3}, {0.05, 0.1}, {0.45, 0.1}, {0.45, 0.5}, {0.05, 1.0}, {0.45, 1.0}}});
  put('3', {{{0.05, 0.1}, {0.45, 0.1}, {0.45, 1.0}, {0.05, 1.0}}, {{0.18, 0.55}, {0.45, 0.55}}});
  put('4', {{{0.35, 1.0}, {0.35, 0.1}, {0.05, 0.62}, {0.45, 0.62}}});
  put('5', {{{0.45, 0.1}, {0.05, 0.1}, {0.05, 0.5}, {0.45, 0.5}, {0.45, 1.0}, {0.05, 1.0}}});
  put('6', {{{0.45, 0.1}, {0.05, 0.1}, {0.05, 1.0}, {0.45, 1.0}, {0.45, 0.52}, {0.05, 0.52}}});
  put('7', {{{0.05, 0.1}, {0.45, 0.1}, {0.15, 1.0}}});
  put('8', {box(0.05, 0.1, 0.45, 0.52), box(0.05, 0.52, 0.45, 1.0)});
  put('9', {{{0.05, 1.0}, {0.45, 1.0}, {0.45, 0.1}, {0.05, 0.1}, {0.05, 0.5}, {0.45, 0.5}}});

  // Period and ellipsis.
  put('.', {dot(0.12, 0.96)});
  put(0x2026, {dot(0.08, 0.96), dot(0.25, 0.96), dot(0.42, 0.96)});

  // Arabic-block letters, drawn as simple distinct stroke patterns.
  put(0x0627, {{{0.25, 0.05}, {0.25, 1.0}}});                                        // alef
  put(0x0628, {{{0.02, 0.6}, {0.02, 1.0}, {0.48, 1.0}, {0.48, 0.6}}, dot(0.25, 1.18)});  // beh
  put(0x062A, {{{0.02, 0.6}, {0.02, 1.0}, {0.48, 1.0}, {0.48, 0.6}}, dot(0.15, 0.42),
               dot(0.35, 0.42)});                                                    // teh
  put(0x062B, {{{0.02, 0.6}, {0.02, 1.0}, {0.48, 1.0}, {0.48, 0.6}}, dot(0.10, 0.45),
               dot(0.25, 0.3), dot(0.40, 0.45)});                                    // theh
  put(0x062D, {{{0.45, 0.2}, {0.05, 0.4}, {0.45, 0.6}, {0.18, 1.25}}});              // hah
  put(0x062F, {{{0.15, 0.35}, {0.40, 0.62}, {0.05, 1.0}, {0.47, 1.0}}});             // dal
  put(0x0631, {{{0.35, 0.5}, {0.35, 0.9}, {0.05, 1.28}}});                           // reh
  put(0x0633, {{{0.02, 0.72}, {0.10, 1.0}, {0.18, 0.72}, {0.26, 1.0}, {0.34, 0.72},
                {0.42, 1.0}, {0.48, 0.72}}});                                        // seen
  put(0x0639, {{{0.45, 0.22}, {0.10, 0.35}, {0.40, 0.5}, {0.05, 0.7}, {0.30, 1.22}}});  // ain
  put(0x0641, {box(0.2, 0.5, 0.4, 0.7), {{0.4, 0.7}, {0.4, 1.0}, {0.02, 1.0}}, dot(0.3, 0.26)});  // feh
  put(0x0642, {box(0.2, 0.5, 0.4, 0.7), {{0.4, 0.7}, {0.4, 1.2}, {0.05, 1.2}},
               dot(0.2, 0.26), dot(0.4, 0.26)});                                     // qaf
  put(0x0644, {{{0.40, 0.05}, {0.40, 1.0}, {0.05, 1.0}, {0.05, 0.78}}});             // lam
  put(0x0645, {box(0.15, 0.55, 0.40, 0.8), {{0.15, 0.8}, {0.15, 1.3}}});             // meem
  put(0x0646, {{{0.05, 0.6}, {0.10, 1.0}, {0.40, 1.0}, {0.45, 0.6}}, dot(0.25, 0.38)});  // noon

  f[' '] = Glyph{};  // advance only
  return f;
}

double dist_point_segment(double px, double py, const std::array<double, 2>& a,
                          const std::array<double, 2>& b) {
  double vx = b[0] - a[0], vy = b[1] - a[1];
  double wx = px - a[0], wy = py - a[1];
  double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Draws a thick antialiased segment; ink combines by max.
void draw_segment(GrayImage& img, std::array<double, 2> a, std::array<double, 2> b,
                  double thickness) {
  double r = thickness / 2.0 + 0.5;
  int x0 = static_cast<int>(std::floor(std::min(a[0], b[0]) - r)) - 1;
  int x1 = static_cast<int>(std::ceil(std::max(a[0], b[0]) + r)) + 1;
  int y0 = static_cast<int>(std::floor(std::min(a[1], b[1]) - r)) - 1;
  int y1 = static_cast<int>(std::ceil(std::max(a[1], b[1]) + r)) + 1;
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width - 1);
  y1 = std::min(y1, img.height - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double d = dist_point_segment(x, y, a, b);
      double cov = std::clamp(thickness / 2.0 + 0.5 - d, 0.0, 1.0);
      if (cov > img.at(x, y)) img.at(x, y) = cov;
    }
}

}  // namespace

const std::map<uint32_t, Glyph>& builtin_font() {
  static const std::map<uint32_t, Glyph> font = make_font();
  return font;
}

std::string builtin_glyphs() {
  std::string s;
  for (const auto& [cp, g] : builtin_font()) s += utf8_encode_one(cp);
  return s;
}

void SynthConfig::validate() const {
  if (words_per_line_min < 1 || words_per_line_max < words_per_line_min)
    fail(Errc::invalid_config, "synth: bad words-per-line range");
  if (word_len_min < 1 || word_len_max < word_len_min)
    fail(Errc::invalid_config, "synth: bad word length range");
  if (height_min < 40 || height_max < height_min) fail(Errc::invalid_config, "synth: bad height range");
  if (stroke_thickness <= 0 || glyph_height <= 0) fail(Errc::invalid_config, "synth: bad stroke geometry");
  if (noise < 0 || wobble_amplitude < 0) fail(Errc::invalid_config, "synth: negative noise or wobble");
  if (slant_max < slant_min) fail(Errc::invalid_config, "synth: bad slant range");
}

GrayImage synth_line(const std::string& text, const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto& font = builtin_font();

  // Spatial glyph sequence: words right-to-left across the line, Arabic
  // words right-to-left internally.
  std::vector<uint32_t> seq;
  std::vector<std::string> words = split_words(text);
  for (size_t i = words.size(); i-- > 0;) {
    std::vector<uint32_t> cps = utf8_decode(words[i]);
    if (is_arabic_word(words[i])) std::reverse(cps.begin(), cps.end());
    seq.insert(seq.end(), cps.begin(), cps.end());
    if (i > 0) seq.push_back(' ');
  }
  for (uint32_t cp : seq)
    if (!font.count(cp))
      fail(Errc::unspellable, "synth_line: no glyph for codepoint " + std::to_string(cp));

  const double g = cfg.glyph_height;
  const double advance = 0.68 * g;
  const double space_advance = 0.55 * g;

  const int height = rng.range_int(cfg.height_min, cfg.height_max);
  double pen = cfg.margin;
  std::vector<double> origins(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    origins[i] = pen;
    pen += seq[i] == ' ' ? space_advance : advance;
  }
  const int width = static_cast<int>(std::ceil(pen)) + cfg.margin;

  GrayImage img(width, height);
  const double base_center = 0.62 * height;
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const double slant = rng.uniform(cfg.slant_min, cfg.slant_max);
  const double tan_slant = std::tan(slant);

  for (size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] == ' ') continue;
    const Glyph& glyph = font.at(seq[i]);
    const double cx = origins[i] + 0.25 * g;
    const double baseline =
        base_center + cfg.wobble_amplitude * std::sin(2.0 * M_PI * cx / cfg.wobble_wavelength + phase);
    for (const Stroke& stroke : glyph.strokes)
      for (size_t k = 1; k < stroke.size(); ++k) {
        auto map = [&](const std::array<double, 2>& p) -> std::array<double, 2> {
          double yoff = (p[1] - 1.0) * g;  // 0 at baseline, negative above
          double x = origins[i] + p[0] * g - yoff * tan_slant;
          return {x, baseline + yoff};
        };
        draw_segment(img, map(stroke[k - 1]), map(stroke[k]), cfg.stroke_thickness);
      }
  }

  if (cfg.noise > 0.0)
    for (double& v : img.px) v = std::clamp(v + cfg.noise * rng.normal(), 0.0, 1.0);
  return img;
}

size_t Corpus::line_count() const {
  size_t n = 0;
  for (const Page& p : pages) n += p.lines.size();
  return n;
}

std::vector<const LineRef*> Corpus::all_lines() const {
  std::vector<const LineRef*> out;
  for (const Page& p : pages)
    for (const LineRef& l : p.lines) out.push_back(&l);
  return out;
}

std::vector<std::string> Corpus::transcripts() const {
  std::vector<std::string> out;
  for (const Page& p : pages)
    for (const LineRef& l : p.lines) out.push_back(l.transcript);
  return out;
}

namespace {

void check_id(const std::string& id, const std::string& what) {
  if (id.empty()) fail(Errc::malformed, what + " id is empty");
  for (char c : id)
    if (c == '/' || c == '\\' || c == '\t' || c == '\n')
      fail(Errc::malformed, what + " id contains a path or separator character: " + id);
  if (id == "." || id == "..") fail(Errc::malformed, what + " id is a reserved name");
}

}  // namespace

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  fs::path tsv = fs::path(dir) / "transcripts.tsv";
  if (!fs::exists(tsv)) return corpus;  // empty directory -> empty corpus
  std::ifstream in(tsv, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + tsv.string());

  std::map<std::string, std::map<std::string, LineRef>> pages;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos)
      fail(Errc::malformed,
           tsv.string() + ":" + std::to_string(lineno) + ": expected page<TAB>line<TAB>text");
    LineRef ref;
    ref.page_id = line.substr(0, t1);
    ref.line_id = line.substr(t1 + 1, t2 - t1 - 1);
    ref.transcript = line.substr(t2 + 1);
    check_id(ref.page_id, "page");
    check_id(ref.line_id, "line");
    if (!seen.insert({ref.page_id, ref.line_id}).second)
      fail(Errc::duplicate_key, tsv.string() + ":" + std::to_string(lineno) + ": duplicate key " +
                                    ref.page_id + "/" + ref.line_id);
    fs::path img = fs::path(dir) / "pages" / ref.page_id / (ref.line_id + ".pgm");
    if (!fs::exists(img))
      fail(Errc::missing_file, "missing image for transcript row " + ref.page_id + "/" +
                                   ref.line_id + " (expected " + img.string() + ")");
    ref.image_path = img.string();
    pages[ref.page_id][ref.line_id] = std::move(ref);
  }
  for (auto& [pid, lines] : pages) {
    Page p;
    p.id = pid;
    for (auto& [lid, ref] : lines) p.lines.push_back(std::move(ref));
    corpus.pages.push_back(std::move(p));
  }
  return corpus;
}

CorpusWriter::CorpusWriter(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(fs::path(dir_) / "pages");
}

void CorpusWriter::add_line(const std::string& page_id, const std::string& line_id,
                            const GrayImage& img, const std::string& transcript) {
  check_id(page_id, "page");
  check_id(line_id, "line");
  if (transcript.find('\t') != std::string::npos || transcript.find('\n') != std::string::npos)
    fail(Errc::malformed, "transcript contains tab or newline");
  fs::path pdir = fs::path(dir_) / "pages" / page_id;
  fs::create_directories(pdir);
  save_pgm(img, (pdir / (line_id + ".pgm")).string());
  rows_.push_back({page_id, line_id, transcript});
}

void CorpusWriter::finalize() {
  std::sort(rows_.begin(), rows_.end());
  for (size_t i = 1; i < rows_.size(); ++i)
    if (rows_[i][0] == rows_[i - 1][0] && rows_[i][1] == rows_[i - 1][1])
      fail(Errc::duplicate_key, "duplicate corpus key " + rows_[i][0] + "/" + rows_[i][1]);
  fs::path tsv = fs::path(dir_) / "transcripts.tsv";
  std::ofstream out(tsv, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + tsv.string());
  for (const auto& r : rows_) out << r[0] << "\t" << r[1] << "\t" << r[2] << "\n";
  if (!out) fail(Errc::io, "write failed for " + tsv.string());
}

std::vector<std::string> build_dictionary(const std::vector<std::string>& transcripts,
                                          int min_occurrences, bool arabic_only) {
  if (min_occurrences < 1) fail(Errc::invalid_config, "build_dictionary: min_occurrences must be >= 1");
  std::map<std::string, int> counts;
  for (const std::string& t : transcripts)
    for (const std::string& w : split_words(t)) ++counts[w];
  std::vector<std::string> words;
  for (const auto& [w, n] : counts) {
    if (n < min_occurrences) continue;
    if (arabic_only && !is_arabic_word(w)) continue;
    words.push_back(w);
  }
  return words;  // map iteration is already sorted and unique
}

Alphabet derive_alphabet(const std::vector<std::string>& transcripts) {
  if (transcripts.empty()) fail(Errc::empty_input, "derive_alphabet: empty corpus");
  std::set<std::string> classes;
  classes.insert(" ");
  for (const std::string& t : transcripts) {
    std::vector<uint32_t> cps = utf8_decode(t);
    size_t i = 0;
    while (i < cps.size()) {
      if (cps[i] == '.') {
        size_t run = 0;
        while (i + run < cps.size() && cps[i + run] == '.') ++run;
        // Longest multi-dot classes first: runs split into "...", "..", ".".
        while (run >= 3) {
          classes.insert("...");
          run -= 3;
        }
        if (run == 2) classes.insert("..");
        if (run == 1) classes.insert(".");
        while (i < cps.size() && cps[i] == '.') ++i;
      } else {
        if (cps[i] != ' ') classes.insert(utf8_encode_one(cps[i]));
        ++i;
      }
    }
  }
  return Alphabet(std::vector<std::string>(classes.begin(), classes.end()));
}

namespace {

// Splits the enabled glyph codepoints into per-script word-letter pools.
struct GlyphPools {
  std::vector<uint32_t> latin, arabic, digits;
};

GlyphPools make_pools(const std::string& glyphs) {
  GlyphPools pools;
  std::string enabled = glyphs.empty() ? builtin_glyphs() : glyphs;
  const auto& font = builtin_font();
  for (uint32_t cp : utf8_decode(enabled)) {
    if (!font.count(cp)) fail(Errc::unspellable, "glyph set: no glyph for codepoint " + std::to_string(cp));
    if (cp >= 'a' && cp <= 'z')
      pools.latin.push_back(cp);
    else if (cp >= '0' && cp <= '9')
      pools.digits.push_back(cp);
    else if (cp >= 0x0600 && cp <= 0x06FF)
      pools.arabic.push_back(cp);
  }
  return pools;
}

std::string random_word(const GlyphPools& pools, const SynthConfig& cfg, Rng& rng) {
  std::vector<const std::vector<uint32_t>*> nonempty;
  if (!pools.arabic.empty()) nonempty.push_back(&pools.arabic);
  if (!pools.latin.empty()) nonempty.push_back(&pools.latin);
  if (!pools.digits.empty()) nonempty.push_back(&pools.digits);
  if (nonempty.empty()) fail(Errc::empty_input, "glyph set has no word-forming characters");
  const auto& pool = *nonempty[rng.below(nonempty.size())];
  int len = rng.range_int(cfg.word_len_min, cfg.word_len_max);
  std::vector<uint32_t> cps;
  for (int i = 0; i < len; ++i) cps.push_back(pool[rng.below(pool.size())]);
  return utf8_encode(cps);
}

}  // namespace

void generate_corpus(const std::string& dir, int pages, int lines_per_page,
                     const SynthConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (pages < 1 || lines_per_page < 1) fail(Errc::invalid_config, "generate_corpus: need >= 1 page and line");
  Rng rng(seed);
  GlyphPools pools = make_pools(cfg.glyphs);

  std::vector<std::string> vocab;
  if (cfg.vocab_size > 0) {
    std::set<std::string> uniq;
    int guard = 0;
    while (static_cast<int>(uniq.size()) < cfg.vocab_size) {
      uniq.insert(random_word(pools, cfg, rng));
      if (++guard > cfg.vocab_size * 1000)
        fail(Errc::invalid_config, "generate_corpus: glyph set too small for requested vocabulary");
    }
    vocab.assign(uniq.begin(), uniq.end());
  }

  CorpusWriter writer(dir);
  std::vector<std::string> transcripts;
  char pbuf[32], lbuf[32];
  for (int p = 0; p < pages; ++p) {
    std::snprintf(pbuf, sizeof(pbuf), "p%04d", p);
    for (int l = 0; l < lines_per_page; ++l) {
      std::snprintf(lbuf, sizeof(lbuf), "l%03d", l);
      int n_words = rng.range_int(cfg.words_per_line_min, cfg.words_per_line_max);
      std::vector<std::string> words;
      for (int wi = 0; wi < n_words; ++wi)
        words.push_back(vocab.empty() ? random_word(pools, cfg, rng)
                                      : vocab[rng.below(vocab.size())]);
      std::string text;
      for (size_t wi = 0; wi < words.size(); ++wi) {
        if (wi) text += ' ';
        text += words[wi];
      }
      GrayImage img = synth_line(text, cfg, rng);
      writer.add_line(pbuf, lbuf, img, text);
      transcripts.push_back(text);
    }
  }
  writer.finalize();
  save_alphabet(derive_alphabet(transcripts), (fs::path(dir) / "alphabet.txt").string());
}

}  // namespace mdrec
