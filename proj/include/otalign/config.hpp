#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace otalign {

// Malformed configuration or bad usage; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Whole-experiment configuration. JSON round-trips through from_json /
// to_json; every default is materialized in the emitted snapshot so a run
// can be reproduced from it alone.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out = "runs/exp";
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";

  struct DatasetCfg {
    std::string dir;  // defaults to <out>/dataset
    int vocab_size = 200;
    int word_len_min = 2;
    int word_len_max = 8;
    double zipf_s = 1.0;
    int n_tokens = 2000;
    double shear_max = 2.0;
    double offset_max = 2.0;
    double noise_sigma = 0.08;
    bool thickness_jitter = true;
    std::array<double, 3> split_fractions{0.7, 0.1, 0.2};
  } dataset;

  struct PretrainCfg {
    int n_tokens = 1200;
    double zipf_s = 1.0;
    double shear_max = 0.5;
    double offset_max = 0.5;
    double noise_sigma = 0.01;
    bool thickness_jitter = false;
    int epochs = 5;
  } pretrain;

  struct LexiconCfg {
    std::string prior = "empirical";  // empirical | uniform | zipf
    double zipf_s = 1.0;
  } lexicon;

  struct PhocCfg {
    std::vector<int> levels = {1, 2, 3, 4};
  } phoc;

  struct EmbeddingCfg {
    int dim = 100;
    int max_iters = 500;
    double tol = 1e-9;
  } embedding;

  struct SinkhornCfg {
    double epsilon = 0.1;
    int max_iters = 2000;
    double tol = 1e-6;
  } sinkhorn;

  struct RecognizerCfg {
    int hidden = 64;
    int descriptor_dim = 64;
    int window = 5;
    int stride = 2;
    int band = 4;
    double lr = 1e-3;
    int batch_size = 32;
    double lambda_phoc = 0.5;
  } recognizer;

  struct ProjectorCfg {
    int hidden = 128;
    double lr = 1e-4;
    double lambda_ot = 1e-2;
    int epochs = 30;
  } projector;

  struct LoopCfg {
    double seed_fraction = 0.05;
    int promotions_per_round = 200;
    int rounds_max = 50;
    double rho_syn = 0.5;
    int phase_a_epochs = 2;
  } loop;

  struct AblateCfg {
    std::vector<std::string> priors = {"empirical", "uniform"};
    std::vector<double> lambda_phoc = {0.5, 0.0};
    std::vector<double> seed_fractions = {0.05};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
  } ablate;

  // Strict: unknown keys raise ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;  // throws ConfigError

  std::filesystem::path dataset_dir() const;
};

ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace otalign
