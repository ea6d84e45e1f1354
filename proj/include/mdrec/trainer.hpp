#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdrec/dataset.hpp"
#include "mdrec/decoder.hpp"
#include "mdrec/network.hpp"

namespace mdrec {

enum class ScheduleVariant { s, l };

// Piecewise-constant learning-rate schedule: contiguous epoch ranges from
// epoch 1; the last rate persists beyond the final range.
struct Schedule {
  ScheduleVariant variant;
  std::vector<std::pair<int, double>> rows;  // (last epoch of range, rate)
};

Schedule make_schedule(ScheduleVariant variant);
double schedule_lr(const Schedule& s, int epoch);
double schedule_lr(ScheduleVariant variant, int epoch);

// velocity <- momentum*velocity - rate*grads; params <- params + velocity.
// Non-finite gradients abort with the offending tensor named.
void sgd_step(NetParams& params, NetParams& velocity, const NetParams& grads, double rate,
              double momentum = 0.9);

// One uniformly chosen line per page, order shuffled.
std::vector<const LineRef*> sample_epoch(const Corpus& corpus, Rng& rng);

// Word- and character-level Levenshtein distance.
long edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
long edit_distance_cp(const std::string& a, const std::string& b);

struct LineScore {
  std::string key;  // page/line
  std::string hyp;
  std::string ref;
};

struct EvalResult {
  double wer = 0.0;  // percent
  double cer = 0.0;  // percent
  std::vector<LineScore> lines;
};

// Decodes every line of the corpus and scores it against the transcripts.
EvalResult evaluate(const NetParams& params, const Corpus& corpus, const Alphabet& alphabet,
                    const Lexicon* lex, const DecoderConfig& dec);

// WER/CER of already-decoded hypothesis/reference pairs (by shared key).
EvalResult score_pairs(const std::vector<LineScore>& pairs);

struct TrainConfig {
  NetConfig net;
  ScheduleVariant variant = ScheduleVariant::s;
  std::optional<Schedule> custom_schedule;  // overrides the variant table
  int epochs = 1;
  double momentum = 0.9;
  double clip = 1.0;  // per-component gradient clip bound
  uint64_t seed = 1;
  std::string val_dir;  // optional corpus evaluated each epoch
  bool quiet = false;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double train_cer = 0.0;                // percent, on the sampled lines
  std::optional<double> val_cer;         // percent, when a validation set is configured
};

struct TrainState {
  NetParams params;
  NetParams velocity;
  int epoch = 0;          // last completed epoch
  std::string rng_state;
};

// Checkpoint container: the network format plus a TrainState extension
// block (epoch, rng state, velocity tensors).
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

struct TrainResult {
  NetParams params;
  std::vector<EpochStats> log;
};

// Online momentum SGD over the paper-style epochs (one random line per
// page). Writes out_dir/checkpoint.bin and appends out_dir/metrics.csv
// after every epoch; resumes from an existing checkpoint in out_dir.
TrainResult train(const TrainConfig& cfg, const Corpus& data, const Alphabet& alphabet,
                  const std::string& out_dir);

}  // namespace mdrec
