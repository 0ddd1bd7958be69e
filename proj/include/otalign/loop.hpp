#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "otalign/embedding.hpp"
#include "otalign/lexicon.hpp"
#include "otalign/ot.hpp"
#include "otalign/projector.hpp"
#include "otalign/recognizer.hpp"
#include "otalign/synth.hpp"

namespace otalign {

enum class Provenance { Seed, Pseudo };

struct AlignedItem {
  int id = 0;
  std::string label;
  Provenance provenance = Provenance::Seed;
  int round = 0;  // promotion round, 0 for seeds
};

// Partition of the working image set. Seed items are never relabeled and
// pseudo-labels are never revoked, so the aligned side only grows.
struct Pool {
  std::vector<AlignedItem> aligned;
  std::vector<int> unaligned;

  void validate(std::size_t total) const;  // throws on bookkeeping errors
  nlohmann::json to_json() const;
  static Pool from_json(const nlohmann::json& j);
};

struct LoopConfig {
  int promotions_per_round = 200;  // K
  int rounds_max = 50;
  double rho_syn = 0.5;
  int pretrain_epochs = 5;
  int phase_a_epochs = 2;
  int batch_size = 32;
  double lambda_phoc = 0.5;
  AdamOptions recognizer_adam;     // lr defaults to 1e-3
  ProjectorTrainOptions projector;
  std::uint64_t seed = 0;
};

struct RoundReport {
  int round = 0;
  int promotions = 0;
  double precision = -1.0;  // fraction of correct promotions; -1 when none
  std::size_t aligned_size = 0;
  std::size_t unaligned_size = 0;
  double cer = 0.0;
  double wer = 0.0;
  double recognizer_loss = 0.0;  // mean loss of the last adaptation epoch
  double projector_loss = 0.0;   // final combined projector loss
  bool sinkhorn_converged = true;
  double sinkhorn_violation = 0.0;

  nlohmann::json to_json() const;
  static RoundReport from_json(const nlohmann::json& j);
};

struct Promotion {
  int id = 0;
  std::string label;
  int word = 0;
  double entropy = 0.0;
};

// Ranks unaligned rows by ascending entropy (ties: lower id), takes at most
// k_budget, labels each with the argmax word of its row distribution (ties:
// lower word index) and moves them into the aligned set.
std::vector<Promotion> promote(const TransportPlan& plan,
                               const std::vector<int>& row_ids, Pool& pool,
                               const Lexicon& lexicon, int k_budget, int round);

struct EvalResult {
  double cer = 0.0;
  double wer = 0.0;
};

// Greedy CTC decoding against ground truth:
// CER = sum of edit distances / sum of reference lengths,
// WER = fraction of exact mismatches.
EvalResult evaluate(const RecognizerParams& params,
                    const std::vector<const DatasetItem*>& split);

struct RunInputs {
  const Dataset* working = nullptr;
  const Dataset* synthetic = nullptr;  // labeled pretraining pool
  const Lexicon* lexicon = nullptr;
  const EmbeddingSpace* embedding = nullptr;
  RecognizerConfig recognizer_cfg;
  ProjectorConfig projector_cfg;
  std::vector<std::pair<int, std::string>> seed_labels;
  LoopConfig loop;
  std::filesystem::path out_dir;  // empty: keep everything in memory
};

struct RunResult {
  std::vector<RoundReport> reports;
  RecognizerParams recognizer;
  ProjectorParams projector;
  Pool pool;
};

struct ResumeState {
  int last_round = 0;
  Pool pool;
  RecognizerParams recognizer;
  ProjectorParams projector;
  std::vector<RoundReport> reports;
};

// Stage II driver. Round 0 is synthetic pretraining plus adaptation on the
// seed labels; each later round recomputes descriptors, trains the
// projector, solves the coupling over the whole working pool, promotes the
// most confident rows, fine-tunes the recognizer on the enlarged aligned
// set and evaluates on the held-out split. Stops when the unaligned pool is
// empty or rounds_max is reached.
RunResult run(const RunInputs& in, const ResumeState* resume = nullptr);

}  // namespace otalign
