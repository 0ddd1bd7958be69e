#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "otalign/image.hpp"
#include "otalign/lexicon.hpp"
#include "otalign/matrix.hpp"
#include "otalign/optimizer.hpp"
#include "otalign/rng.hpp"

namespace otalign {

// Character classes for the CTC head. Class 0 is the blank; symbol i of the
// alphabet maps to class i+1.
struct Alphabet {
  std::string symbols{kDefaultAlphabet};
  static constexpr int kBlank = 0;

  int num_classes() const { return static_cast<int>(symbols.size()) + 1; }
  int class_of(char c) const;    // throws for characters outside the alphabet
  char symbol_of(int cls) const; // cls in [1, |symbols|]
};

// The recognizer maps a canonical 32x128 word image to
//   - per-frame character logits (CTC branch),
//   - a holistic descriptor z = W_desc * mean(frame hiddens),
//   - a PHOC prediction sigmoid(W_phoc z + b).
// Frames come from a sliding window over image columns; each column is
// first reduced to per-band vertical maxima.
struct RecognizerConfig {
  int hidden = 64;
  int descriptor_dim = 64;
  int window = 5;
  int stride = 2;
  int band = 4;  // vertical max-pool band height, must divide 32
  Alphabet alphabet;
  PhocConfig phoc;

  int bands_per_column() const { return kCanonicalHeight / band; }
  int feature_dim() const { return window * bands_per_column(); }
  int frames() const { return (kCanonicalWidth - window) / stride + 1; }
  void validate() const;
};

struct RecognizerParams {
  RecognizerConfig cfg;
  Mat w_enc;                   // hidden x feature_dim
  std::vector<double> b_enc;   // hidden
  Mat w_cls;                   // num_classes x hidden
  std::vector<double> b_cls;   // num_classes
  Mat w_desc;                  // descriptor_dim x hidden (linear, no bias)
  Mat w_phoc;                  // phoc_dim x descriptor_dim
  std::vector<double> b_phoc;  // phoc_dim

  static RecognizerParams init(const RecognizerConfig& cfg, Rng rng);
  std::size_t param_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

struct RecognizerForward {
  Mat features;  // frames x feature_dim
  Mat hidden;    // frames x hidden, tanh activations
  Mat logits;    // frames x num_classes
  std::vector<double> hidden_mean;
  std::vector<double> z;
  std::vector<double> phoc_pre;
  std::vector<double> phoc_pred;
};

RecognizerForward forward(const RecognizerParams& params, const WordImage& img);

struct CtcResult {
  double loss = 0.0;
  Mat grad_logits;
};

// Negative log-probability of all blank-augmented alignments collapsing to
// target, computed by the forward-backward recursion in log space. The
// gradient is softmax(logits) minus the state posteriors.
CtcResult ctc_loss(const Mat& logits, const std::string& target,
                   const Alphabet& alphabet);

// Per-frame argmax (ties to the lowest class index), collapse repeats,
// strip blanks.
std::string ctc_greedy_decode(const Mat& logits, const Alphabet& alphabet);

struct PhocLoss {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. the predicted probabilities
};

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7].
PhocLoss phoc_loss(std::span<const double> pred, const PhocVector& truth);

struct TrainSample {
  const WordImage* image = nullptr;
  std::string label;
};
using Batch = std::vector<TrainSample>;

struct RecognizerTrainOptions {
  int epochs = 1;
  int batch_size = 32;
  double lambda_phoc = 0.5;
  double rho_syn = 0.5;
  AdamOptions adam;  // lr defaults to 1e-3
  std::uint64_t seed = 0;
};

// Each batch holds ceil(batch_size * rho_syn) synthetic samples, the rest
// drawn from the aligned pool; batches cover the aligned pool once per call.
std::vector<Batch> compose_batches(const std::vector<TrainSample>& aligned,
                                   const std::vector<TrainSample>& synthetic,
                                   double rho_syn, int batch_size, Rng& rng);

// Adds grad_scale times the full parameter gradient of
// ctc + lambda_phoc * phoc to grad_accum (layout of flatten()); returns the
// sample loss.
double sample_loss_grad(const RecognizerParams& params, const WordImage& img,
                        const std::string& label, double lambda_phoc,
                        std::vector<double>& grad_accum, double grad_scale);

// Adam over freshly composed batches each epoch; returns per-epoch mean
// loss. Aborts with std::runtime_error if the loss goes non-finite.
std::vector<double> train_recognizer(RecognizerParams& params,
                                     const std::vector<TrainSample>& aligned,
                                     const std::vector<TrainSample>& synthetic,
                                     const RecognizerTrainOptions& opts);

void save_recognizer(const std::filesystem::path& path, const RecognizerParams& params);
RecognizerParams load_recognizer(const std::filesystem::path& path);

}  // namespace otalign
