#include "otalign/experiment.hpp"

#include <algorithm>
#include <cmath>

namespace otalign {

std::vector<std::string> experiment_vocab(const ExperimentConfig& cfg) {
  return generate_vocab(cfg.dataset.vocab_size, cfg.dataset.word_len_min,
                        cfg.dataset.word_len_max, cfg.alphabet,
                        Rng(cfg.seed).fork("vocab"));
}

Dataset build_working_dataset(const ExperimentConfig& cfg) {
  const Rng root(cfg.seed);
  CorpusSpec corpus{experiment_vocab(cfg), cfg.dataset.zipf_s,
                    cfg.dataset.n_tokens, root.fork("corpus").seed()};
  RenderSpec render{cfg.dataset.shear_max, cfg.dataset.offset_max,
                    cfg.dataset.noise_sigma, cfg.dataset.thickness_jitter,
                    root.fork("render").seed()};
  return gen_dataset(corpus, render, cfg.dataset.split_fractions,
                     root.fork("split").seed());
}

Dataset build_pretrain_dataset(const ExperimentConfig& cfg) {
  const Rng root(cfg.seed);
  CorpusSpec corpus{experiment_vocab(cfg), cfg.pretrain.zipf_s,
                    cfg.pretrain.n_tokens, root.fork("pretrain_corpus").seed()};
  RenderSpec render{cfg.pretrain.shear_max, cfg.pretrain.offset_max,
                    cfg.pretrain.noise_sigma, cfg.pretrain.thickness_jitter,
                    root.fork("pretrain_render").seed()};
  return gen_dataset(corpus, render, {1.0, 0.0, 0.0},
                     root.fork("pretrain_split").seed());
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg,
                                      const Dataset& working) {
  PreparedExperiment prep;
  prep.synthetic =
      cfg.pretrain.n_tokens > 0 ? build_pretrain_dataset(cfg) : Dataset{};

  std::vector<std::string> tokens;
  tokens.reserve(working.items.size());
  for (const auto& item : working.items) tokens.push_back(item.image.truth);
  prep.lexicon = build_lexicon(tokens, prior_mode_from_string(cfg.lexicon.prior),
                               cfg.lexicon.zipf_s, cfg.alphabet);

  if (static_cast<std::size_t>(cfg.embedding.dim) > prep.lexicon.size())
    throw ConfigError("embedding.dim exceeds lexicon size (" +
                      std::to_string(prep.lexicon.size()) + " words)");
  const DistanceMatrix dist = pairwise_distances(prep.lexicon);
  prep.embedding = mds_embed(
      dist, static_cast<std::size_t>(cfg.embedding.dim),
      {cfg.embedding.max_iters, cfg.embedding.tol, Rng(cfg.seed).fork("mds").seed()});

  // Seed labels: a fixed fraction of the whole pool, drawn from the train
  // split, ids kept sorted.
  std::vector<int> train_ids;
  for (const auto& item : working.items)
    if (item.split == Split::Train) train_ids.push_back(item.id);
  const std::size_t n_seed = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(cfg.loop.seed_fraction *
                          static_cast<double>(working.items.size()))));
  if (n_seed > train_ids.size())
    throw ConfigError("seed_fraction asks for more labels than the train split holds");
  Rng pick = Rng(cfg.seed).fork("seed_pick");
  pick.shuffle(train_ids);
  train_ids.resize(n_seed);
  std::sort(train_ids.begin(), train_ids.end());
  for (int id : train_ids) {
    const auto it = std::lower_bound(
        working.items.begin(), working.items.end(), id,
        [](const DatasetItem& a, int b) { return a.id < b; });
    prep.seed_labels.emplace_back(id, it->image.truth);
  }

  prep.recognizer_cfg.hidden = cfg.recognizer.hidden;
  prep.recognizer_cfg.descriptor_dim = cfg.recognizer.descriptor_dim;
  prep.recognizer_cfg.window = cfg.recognizer.window;
  prep.recognizer_cfg.stride = cfg.recognizer.stride;
  prep.recognizer_cfg.band = cfg.recognizer.band;
  prep.recognizer_cfg.alphabet.symbols = cfg.alphabet;
  prep.recognizer_cfg.phoc = PhocConfig{cfg.alphabet, cfg.phoc.levels};

  prep.projector_cfg.in_dim = cfg.recognizer.descriptor_dim;
  prep.projector_cfg.hidden = cfg.projector.hidden;
  prep.projector_cfg.out_dim = cfg.embedding.dim;

  prep.loop_cfg.promotions_per_round = cfg.loop.promotions_per_round;
  prep.loop_cfg.rounds_max = cfg.loop.rounds_max;
  prep.loop_cfg.rho_syn = cfg.loop.rho_syn;
  prep.loop_cfg.pretrain_epochs = cfg.pretrain.epochs;
  prep.loop_cfg.phase_a_epochs = cfg.loop.phase_a_epochs;
  prep.loop_cfg.batch_size = cfg.recognizer.batch_size;
  prep.loop_cfg.lambda_phoc = cfg.recognizer.lambda_phoc;
  prep.loop_cfg.recognizer_adam.lr = cfg.recognizer.lr;
  prep.loop_cfg.projector.epochs = cfg.projector.epochs;
  prep.loop_cfg.projector.lambda_ot = cfg.projector.lambda_ot;
  prep.loop_cfg.projector.adam.lr = cfg.projector.lr;
  prep.loop_cfg.projector.sinkhorn = {cfg.sinkhorn.epsilon, cfg.sinkhorn.max_iters,
                                      cfg.sinkhorn.tol};
  prep.loop_cfg.seed = Rng(cfg.seed).fork("loop").seed();
  return prep;
}

RunResult run_experiment(const ExperimentConfig& cfg, const Dataset& working,
                         const std::filesystem::path& out_dir,
                         const ResumeState* resume) {
  const PreparedExperiment prep = prepare_experiment(cfg, working);
  RunInputs in;
  in.working = &working;
  in.synthetic = prep.synthetic.items.empty() ? nullptr : &prep.synthetic;
  in.lexicon = &prep.lexicon;
  in.embedding = &prep.embedding;
  in.recognizer_cfg = prep.recognizer_cfg;
  in.projector_cfg = prep.projector_cfg;
  in.seed_labels = prep.seed_labels;
  in.loop = prep.loop_cfg;
  in.out_dir = out_dir;
  return run(in, resume);
}

}  // namespace otalign
