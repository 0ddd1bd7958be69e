#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "otalign/config.hpp"
#include "otalign/loop.hpp"
#include "otalign/synth.hpp"

namespace otalign {

// Derived pieces shared by run / ablate / eval: lexicon and embedding built
// from the working corpus, seed labels drawn from the train split.
struct PreparedExperiment {
  Dataset synthetic;
  Lexicon lexicon;
  EmbeddingSpace embedding;
  std::vector<std::pair<int, std::string>> seed_labels;
  RecognizerConfig recognizer_cfg;
  ProjectorConfig projector_cfg;
  LoopConfig loop_cfg;
};

std::vector<std::string> experiment_vocab(const ExperimentConfig& cfg);
Dataset build_working_dataset(const ExperimentConfig& cfg);
Dataset build_pretrain_dataset(const ExperimentConfig& cfg);

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg,
                                      const Dataset& working);

// Full pipeline on an already-built working dataset. out_dir empty keeps
// everything in memory.
RunResult run_experiment(const ExperimentConfig& cfg, const Dataset& working,
                         const std::filesystem::path& out_dir,
                         const ResumeState* resume = nullptr);

}  // namespace otalign
