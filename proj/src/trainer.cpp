#include "mdrec/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include "binio.hpp"
#include "mdrec/ctc.hpp"
#include "mdrec/error.hpp"
#include "mdrec/utf8.hpp"

namespace fs = std::filesystem;

namespace mdrec {

Schedule make_schedule(ScheduleVariant variant) {
  Schedule s;
  s.variant = variant;
  if (variant == ScheduleVariant::s)
    s.rows = {{44, 1e-3}, {60, 5e-4}, {198, 2e-4}, {228, 1e-4}, {283, 5e-5}};
  else
    s.rows = {{44, 1e-3}, {60, 5e-4}, {198, 2e-4}, {276, 1e-4}, {277, 5e-5}};
  return s;
}

double schedule_lr(const Schedule& s, int epoch) {
  if (epoch < 1) fail(Errc::invalid_config, "schedule_lr: epochs start at 1");
  for (const auto& [last, rate] : s.rows)
    if (epoch <= last) return rate;
  return s.rows.back().second;  // beyond the final range the last rate persists
}

double schedule_lr(ScheduleVariant variant, int epoch) {
  return schedule_lr(make_schedule(variant), epoch);
}

void sgd_step(NetParams& params, NetParams& velocity, const NetParams& grads, double rate,
              double momentum) {
  std::string bad;
  if (!all_finite(grads, &bad))
    fail(Errc::numeric, "sgd_step: non-finite gradient in tensor " + bad);
  scale(velocity, momentum);
  axpy(-rate, grads, velocity);
  axpy(1.0, velocity, params);
}

std::vector<const LineRef*> sample_epoch(const Corpus& corpus, Rng& rng) {
  std::vector<const LineRef*> lines;
  lines.reserve(corpus.pages.size());
  for (const Page& p : corpus.pages) {
    if (p.lines.empty()) fail(Errc::empty_input, "sample_epoch: page " + p.id + " has no lines");
    lines.push_back(&p.lines[rng.below(p.lines.size())]);
  }
  rng.shuffle(lines);
  return lines;
}

namespace {

template <class T>
long levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<long> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<long>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<long>(i);
    for (size_t j = 1; j <= m; ++j) {
      long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

long edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return levenshtein(a, b);
}

long edit_distance_cp(const std::string& a, const std::string& b) {
  return levenshtein(utf8_decode(a), utf8_decode(b));
}

EvalResult score_pairs(const std::vector<LineScore>& pairs) {
  long word_err = 0, word_ref = 0, cp_err = 0, cp_ref = 0;
  for (const LineScore& p : pairs) {
    std::vector<std::string> hyp_words = split_words(p.hyp);
    std::vector<std::string> ref_words = split_words(p.ref);
    word_err += edit_distance(hyp_words, ref_words);
    word_ref += static_cast<long>(ref_words.size());
    cp_err += edit_distance_cp(p.hyp, p.ref);
    cp_ref += static_cast<long>(utf8_decode(p.ref).size());
  }
  if (word_ref == 0) fail(Errc::empty_input, "evaluate: empty reference set");
  EvalResult res;
  res.lines = pairs;
  res.wer = 100.0 * static_cast<double>(word_err) / static_cast<double>(word_ref);
  res.cer = cp_ref == 0 ? 0.0 : 100.0 * static_cast<double>(cp_err) / static_cast<double>(cp_ref);
  return res;
}

EvalResult evaluate(const NetParams& params, const Corpus& corpus, const Alphabet& alphabet,
                    const Lexicon* lex, const DecoderConfig& dec) {
  std::vector<LineScore> pairs;
  for (const Page& page : corpus.pages)
    for (const LineRef& line : page.lines) {
      GrayImage img = load_pgm(line.image_path);
      ProbMatrix probs = net_forward(img, params);
      LineScore sc;
      sc.key = page.id + "/" + line.line_id;
      sc.hyp = decode_line(probs, alphabet, lex, dec);
      sc.ref = line.transcript;
      pairs.push_back(std::move(sc));
    }
  return score_pairs(pairs);
}

namespace {

constexpr char kStateMagic[4] = {'T', 'R', 'N', 'S'};

void append_metrics(const std::string& path, const EpochStats& st, bool write_header) {
  std::ofstream out(path, write_header ? std::ios::trunc : std::ios::app);
  if (!out) fail(Errc::io, "cannot write " + path);
  if (write_header) out << "epoch,lr,mean_loss,train_cer,val_cer\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.6f,", st.epoch, st.lr, st.mean_loss,
                st.train_cer);
  out << buf;
  if (st.val_cer) {
    std::snprintf(buf, sizeof(buf), "%.6f", *st.val_cer);
    out << buf;
  }
  out << "\n";
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Errc::io, "cannot write " + path);
  write_params(os, state.params);
  binio::write_bytes(os, kStateMagic, 4);
  binio::write_u64(os, static_cast<uint64_t>(state.epoch));
  binio::write_str(os, state.rng_state);
  state.velocity.for_each_tensor([&os](const std::string&, const double* p, size_t n) {
    binio::write_bytes(os, p, n * sizeof(double));
  });
  if (!os) fail(Errc::io, "write failed for " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::io, "cannot open " + path);
  TrainState state;
  state.params = read_params(is);
  char magic[4];
  binio::read_bytes(is, magic, 4, "train state magic");
  if (std::memcmp(magic, kStateMagic, 4) != 0)
    fail(Errc::bad_magic, path + ": missing train state block");
  state.epoch = static_cast<int>(binio::read_u64(is, "train state epoch"));
  state.rng_state = binio::read_str(is, "train state rng");
  state.velocity = zeros_like(state.params.cfg);
  state.velocity.for_each_tensor([&is](const std::string& name, double* p, size_t n) {
    binio::read_bytes(is, p, n * sizeof(double), "velocity tensor " + name);
  });
  return state;
}

TrainResult train(const TrainConfig& cfg, const Corpus& data, const Alphabet& alphabet,
                  const std::string& out_dir) {
  if (cfg.epochs < 0) fail(Errc::invalid_config, "train: negative epoch count");
  if (cfg.net.alphabet_size != alphabet.size())
    fail(Errc::invalid_config, "train: net alphabet size does not match the alphabet");
  if (data.pages.empty()) fail(Errc::empty_input, "train: empty dataset");
  fs::create_directories(out_dir);
  const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.bin").string();
  const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();

  TrainState state;
  bool resumed = false;
  if (fs::exists(ckpt_path)) {
    state = load_checkpoint(ckpt_path);
    if (!(state.params.cfg == cfg.net))
      fail(Errc::invalid_config, "train: checkpoint in " + out_dir + " has a different net config");
    resumed = true;
    if (!cfg.quiet)
      std::cerr << "resuming from " << ckpt_path << " after epoch " << state.epoch << "\n";
  } else {
    state.params = init_params(cfg.net, cfg.seed);
    state.velocity = zeros_like(cfg.net);
    state.epoch = 0;
    Rng rng(cfg.seed);
    state.rng_state = rng.state();
  }

  std::optional<Corpus> val;
  if (!cfg.val_dir.empty()) val = load_corpus(cfg.val_dir);

  Rng rng;
  rng.set_state(state.rng_state);
  Schedule sched = cfg.custom_schedule ? *cfg.custom_schedule : make_schedule(cfg.variant);
  std::unordered_map<std::string, GrayImage> image_cache;
  auto get_image = [&](const std::string& path) -> const GrayImage& {
    auto it = image_cache.find(path);
    if (it == image_cache.end()) it = image_cache.emplace(path, load_pgm(path)).first;
    return it->second;
  };

  TrainResult result;
  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = schedule_lr(sched, epoch);
    std::vector<const LineRef*> lines = sample_epoch(data, rng);
    double loss_sum = 0.0;
    long loss_count = 0, cer_err = 0, cer_ref = 0, infeasible = 0;

    for (const LineRef* line : lines) {
      const GrayImage& img = get_image(line->image_path);
      std::vector<int> target = spatial_class_sequence(line->transcript, alphabet);
      ForwardCache cache;
      ProbMatrix probs = net_forward(img, state.params, &cache);
      CtcResult ctc;
      try {
        ctc = ctc_loss_grad(probs, target);
      } catch (const Error& e) {
        if (e.code() != Errc::infeasible_target) throw;
        ++infeasible;
        if (!cfg.quiet)
          std::cerr << "epoch " << epoch << ": infeasible target for " << line->page_id << "/"
                    << line->line_id << ": " << e.what() << "\n";
        continue;
      }
      NetParams grads = net_backward(state.params, cache, ctc.d_logits);
      if (cfg.clip > 0.0) clip_inplace(grads, cfg.clip);
      try {
        sgd_step(state.params, state.velocity, grads, lr, cfg.momentum);
      } catch (const Error& e) {
        fail(e.code(), "epoch " + std::to_string(epoch) + ", line " + line->page_id + "/" +
                           line->line_id + ": " + e.what());
      }
      loss_sum += ctc.loss;
      ++loss_count;
      std::vector<int> hyp = collapse(best_path_indices(probs, 0, probs.frames()));
      cer_err += levenshtein(hyp, target);
      cer_ref += static_cast<long>(target.size());
    }

    if (infeasible > 0 &&
        static_cast<double>(infeasible) > 0.01 * static_cast<double>(lines.size()))
      fail(Errc::infeasible_target,
           "epoch " + std::to_string(epoch) + ": " + std::to_string(infeasible) + " of " +
               std::to_string(lines.size()) + " lines have infeasible targets (data bug?)");

    std::string bad;
    if (!all_finite(state.params, &bad) || !all_finite(state.velocity, &bad))
      fail(Errc::numeric, "epoch " + std::to_string(epoch) + ": non-finite values in " + bad);

    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    st.train_cer = cer_ref > 0 ? 100.0 * static_cast<double>(cer_err) / cer_ref : 0.0;
    if (val) {
      DecoderConfig dec;
      EvalResult ev = evaluate(state.params, *val, alphabet, nullptr, dec);
      st.val_cer = ev.cer;
    }

    state.epoch = epoch;
    state.rng_state = rng.state();
    save_checkpoint(state, ckpt_path);
    append_metrics(metrics_path, st, epoch == 1 && !resumed);
    result.log.push_back(st);
    if (!cfg.quiet) {
      std::cerr << "epoch " << epoch << " lr " << lr << " loss " << st.mean_loss << " cer "
                << st.train_cer;
      if (st.val_cer) std::cerr << " val_cer " << *st.val_cer;
      std::cerr << "\n";
    }
  }

  result.params = state.params;
  return result;
}

}  // namespace mdrec
