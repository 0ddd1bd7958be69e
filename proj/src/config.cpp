#include "otalign/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "otalign/image.hpp"
#include "otalign/lexicon.hpp"

namespace otalign {

namespace {

// Reads known keys from a JSON object and rejects everything else, so a
// typo in a config file fails loudly instead of silently using a default.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string section)
      : j_(j), section_(std::move(section)) {
    if (!j.is_object())
      throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(dst);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + section_ + "." + key + "': " + e.what());
    }
  }

  const nlohmann::json* sub(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!known_.contains(k))
        throw ConfigError("unknown config key '" + section_ + "." + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> known_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  StrictObject root(j, "<root>");
  root.get("seed", c.seed);
  root.get("out", c.out);
  root.get("alphabet", c.alphabet);

  if (const auto* s = root.sub("dataset")) {
    StrictObject o(*s, "dataset");
    o.get("dir", c.dataset.dir);
    o.get("vocab_size", c.dataset.vocab_size);
    o.get("word_len_min", c.dataset.word_len_min);
    o.get("word_len_max", c.dataset.word_len_max);
    o.get("zipf_s", c.dataset.zipf_s);
    o.get("n_tokens", c.dataset.n_tokens);
    o.get("shear_max", c.dataset.shear_max);
    o.get("offset_max", c.dataset.offset_max);
    o.get("noise_sigma", c.dataset.noise_sigma);
    o.get("thickness_jitter", c.dataset.thickness_jitter);
    o.get("split_fractions", c.dataset.split_fractions);
    o.finish();
  }
  if (const auto* s = root.sub("pretrain")) {
    StrictObject o(*s, "pretrain");
    o.get("n_tokens", c.pretrain.n_tokens);
    o.get("zipf_s", c.pretrain.zipf_s);
    o.get("shear_max", c.pretrain.shear_max);
    o.get("offset_max", c.pretrain.offset_max);
    o.get("noise_sigma", c.pretrain.noise_sigma);
    o.get("thickness_jitter", c.pretrain.thickness_jitter);
    o.get("epochs", c.pretrain.epochs);
    o.finish();
  }
  if (const auto* s = root.sub("lexicon")) {
    StrictObject o(*s, "lexicon");
    o.get("prior", c.lexicon.prior);
    o.get("zipf_s", c.lexicon.zipf_s);
    o.finish();
  }
  if (const auto* s = root.sub("phoc")) {
    StrictObject o(*s, "phoc");
    o.get("levels", c.phoc.levels);
    o.finish();
  }
  if (const auto* s = root.sub("embedding")) {
    StrictObject o(*s, "embedding");
    o.get("dim", c.embedding.dim);
    o.get("max_iters", c.embedding.max_iters);
    o.get("tol", c.embedding.tol);
    o.finish();
  }
  if (const auto* s = root.sub("sinkhorn")) {
    StrictObject o(*s, "sinkhorn");
    o.get("epsilon", c.sinkhorn.epsilon);
    o.get("max_iters", c.sinkhorn.max_iters);
    o.get("tol", c.sinkhorn.tol);
    o.finish();
  }
  if (const auto* s = root.sub("recognizer")) {
    StrictObject o(*s, "recognizer");
    o.get("hidden", c.recognizer.hidden);
    o.get("descriptor_dim", c.recognizer.descriptor_dim);
    o.get("window", c.recognizer.window);
    o.get("stride", c.recognizer.stride);
    o.get("band", c.recognizer.band);
    o.get("lr", c.recognizer.lr);
    o.get("batch_size", c.recognizer.batch_size);
    o.get("lambda_phoc", c.recognizer.lambda_phoc);
    o.finish();
  }
  if (const auto* s = root.sub("projector")) {
    StrictObject o(*s, "projector");
    o.get("hidden", c.projector.hidden);
    o.get("lr", c.projector.lr);
    o.get("lambda_ot", c.projector.lambda_ot);
    o.get("epochs", c.projector.epochs);
    o.finish();
  }
  if (const auto* s = root.sub("loop")) {
    StrictObject o(*s, "loop");
    o.get("seed_fraction", c.loop.seed_fraction);
    o.get("promotions_per_round", c.loop.promotions_per_round);
    o.get("rounds_max", c.loop.rounds_max);
    o.get("rho_syn", c.loop.rho_syn);
    o.get("phase_a_epochs", c.loop.phase_a_epochs);
    o.finish();
  }
  if (const auto* s = root.sub("ablate")) {
    StrictObject o(*s, "ablate");
    o.get("priors", c.ablate.priors);
    o.get("lambda_phoc", c.ablate.lambda_phoc);
    o.get("seed_fractions", c.ablate.seed_fractions);
    o.get("seeds", c.ablate.seeds);
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {
      {"seed", seed},
      {"out", out},
      {"alphabet", alphabet},
      {"dataset",
       {{"dir", dataset_dir().string()},
        {"vocab_size", dataset.vocab_size},
        {"word_len_min", dataset.word_len_min},
        {"word_len_max", dataset.word_len_max},
        {"zipf_s", dataset.zipf_s},
        {"n_tokens", dataset.n_tokens},
        {"shear_max", dataset.shear_max},
        {"offset_max", dataset.offset_max},
        {"noise_sigma", dataset.noise_sigma},
        {"thickness_jitter", dataset.thickness_jitter},
        {"split_fractions", dataset.split_fractions}}},
      {"pretrain",
       {{"n_tokens", pretrain.n_tokens},
        {"zipf_s", pretrain.zipf_s},
        {"shear_max", pretrain.shear_max},
        {"offset_max", pretrain.offset_max},
        {"noise_sigma", pretrain.noise_sigma},
        {"thickness_jitter", pretrain.thickness_jitter},
        {"epochs", pretrain.epochs}}},
      {"lexicon", {{"prior", lexicon.prior}, {"zipf_s", lexicon.zipf_s}}},
      {"phoc", {{"levels", phoc.levels}}},
      {"embedding",
       {{"dim", embedding.dim},
        {"max_iters", embedding.max_iters},
        {"tol", embedding.tol}}},
      {"sinkhorn",
       {{"epsilon", sinkhorn.epsilon},
        {"max_iters", sinkhorn.max_iters},
        {"tol", sinkhorn.tol}}},
      {"recognizer",
       {{"hidden", recognizer.hidden},
        {"descriptor_dim", recognizer.descriptor_dim},
        {"window", recognizer.window},
        {"stride", recognizer.stride},
        {"band", recognizer.band},
        {"lr", recognizer.lr},
        {"batch_size", recognizer.batch_size},
        {"lambda_phoc", recognizer.lambda_phoc}}},
      {"projector",
       {{"hidden", projector.hidden},
        {"lr", projector.lr},
        {"lambda_ot", projector.lambda_ot},
        {"epochs", projector.epochs}}},
      {"loop",
       {{"seed_fraction", loop.seed_fraction},
        {"promotions_per_round", loop.promotions_per_round},
        {"rounds_max", loop.rounds_max},
        {"rho_syn", loop.rho_syn},
        {"phase_a_epochs", loop.phase_a_epochs}}},
      {"ablate",
       {{"priors", ablate.priors},
        {"lambda_phoc", ablate.lambda_phoc},
        {"seed_fractions", ablate.seed_fractions},
        {"seeds", ablate.seeds}}}};
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (alphabet.empty()) fail("empty alphabet");
  if (std::set<char>(alphabet.begin(), alphabet.end()).size() != alphabet.size())
    fail("alphabet has duplicate characters");
  if (out.empty()) fail("empty output directory");

  if (dataset.vocab_size < 1) fail("dataset.vocab_size < 1");
  if (dataset.word_len_min < 1 || dataset.word_len_max < dataset.word_len_min)
    fail("dataset word length range invalid");
  if (dataset.zipf_s < 0.0) fail("dataset.zipf_s < 0");
  if (dataset.n_tokens < 1) fail("dataset.n_tokens < 1");
  if (dataset.noise_sigma < 0.0 || dataset.noise_sigma > 0.1)
    fail("dataset.noise_sigma outside [0, 0.1]");
  if (dataset.shear_max < 0.0 || dataset.shear_max > 2.0)
    fail("dataset.shear_max outside [0, 2]");
  if (dataset.offset_max < 0.0 || dataset.offset_max > 2.0)
    fail("dataset.offset_max outside [0, 2]");
  const double fsum = dataset.split_fractions[0] + dataset.split_fractions[1] +
                      dataset.split_fractions[2];
  if (std::abs(fsum - 1.0) > 1e-9) fail("dataset.split_fractions must sum to 1");

  if (pretrain.n_tokens < 0) fail("pretrain.n_tokens < 0");
  if (pretrain.zipf_s < 0.0) fail("pretrain.zipf_s < 0");
  if (pretrain.noise_sigma < 0.0 || pretrain.noise_sigma > 0.1)
    fail("pretrain.noise_sigma outside [0, 0.1]");
  if (pretrain.shear_max < 0.0 || pretrain.shear_max > 2.0)
    fail("pretrain.shear_max outside [0, 2]");
  if (pretrain.offset_max < 0.0 || pretrain.offset_max > 2.0)
    fail("pretrain.offset_max outside [0, 2]");
  if (pretrain.epochs < 0) fail("pretrain.epochs < 0");

  try {
    prior_mode_from_string(lexicon.prior);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (lexicon.zipf_s < 0.0) fail("lexicon.zipf_s < 0");

  PhocConfig pc{alphabet, phoc.levels};
  try {
    pc.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }

  if (embedding.dim < 1) fail("embedding.dim < 1");
  if (embedding.max_iters < 1) fail("embedding.max_iters < 1");
  if (embedding.tol <= 0.0) fail("embedding.tol <= 0");

  if (sinkhorn.epsilon <= 0.0) fail("sinkhorn.epsilon <= 0");
  if (sinkhorn.max_iters < 1) fail("sinkhorn.max_iters < 1");
  if (sinkhorn.tol <= 0.0) fail("sinkhorn.tol <= 0");

  if (recognizer.hidden < 1 || recognizer.descriptor_dim < 1)
    fail("recognizer dimensions must be positive");
  if (recognizer.window < 1 || recognizer.stride < 1) fail("recognizer window/stride");
  if (recognizer.band < 1 || kCanonicalHeight % recognizer.band != 0)
    fail("recognizer.band must divide 32");
  if (recognizer.lr <= 0.0) fail("recognizer.lr <= 0");
  if (recognizer.batch_size < 1) fail("recognizer.batch_size < 1");
  if (recognizer.lambda_phoc < 0.0) fail("recognizer.lambda_phoc < 0");

  if (projector.hidden < 1) fail("projector.hidden < 1");
  if (projector.lr <= 0.0) fail("projector.lr <= 0");
  if (projector.lambda_ot < 0.0) fail("projector.lambda_ot < 0");
  if (projector.epochs < 0) fail("projector.epochs < 0");

  if (loop.seed_fraction <= 0.0 || loop.seed_fraction > 1.0)
    fail("loop.seed_fraction outside (0, 1]");
  if (loop.promotions_per_round < 1) fail("loop.promotions_per_round < 1");
  if (loop.rounds_max < 0) fail("loop.rounds_max < 0");
  if (loop.rho_syn < 0.0 || loop.rho_syn > 1.0) fail("loop.rho_syn outside [0, 1]");
  if (loop.phase_a_epochs < 0) fail("loop.phase_a_epochs < 0");

  for (const auto& p : ablate.priors)
    try {
      prior_mode_from_string(p);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  for (double l : ablate.lambda_phoc)
    if (l < 0.0) fail("ablate.lambda_phoc entry < 0");
  for (double f : ablate.seed_fractions)
    if (f <= 0.0 || f > 1.0) fail("ablate.seed_fractions entry outside (0, 1]");
  if (ablate.seeds.empty()) fail("ablate.seeds empty");
}

std::filesystem::path ExperimentConfig::dataset_dir() const {
  if (!dataset.dir.empty()) return dataset.dir;
  return std::filesystem::path(out) / "dataset";
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace otalign
