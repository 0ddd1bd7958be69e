#include <doctest.h>

#include <cmath>

#include "otalign/experiment.hpp"
#include "otalign/loop.hpp"

using namespace otalign;

namespace {

// Plans with hand-picked rows; marginals are irrelevant for promotion.
TransportPlan plan_with_rows(const std::vector<std::vector<double>>& rows) {
  TransportPlan plan;
  plan.t = Mat(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) plan.t(i, j) = rows[i][j];
  return plan;
}

Lexicon two_word_lexicon() { return build_lexicon({"aa", "bb"}, PriorMode::Uniform); }

ExperimentConfig fast_config() {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.dataset.vocab_size = 12;
  cfg.dataset.n_tokens = 60;
  cfg.dataset.word_len_min = 2;
  cfg.dataset.word_len_max = 4;
  cfg.dataset.noise_sigma = 0.02;
  cfg.pretrain.n_tokens = 40;
  cfg.pretrain.epochs = 1;
  cfg.embedding.dim = 6;
  cfg.recognizer.hidden = 16;
  cfg.recognizer.descriptor_dim = 8;
  cfg.projector.hidden = 16;
  cfg.projector.epochs = 4;
  cfg.loop.seed_fraction = 0.2;
  cfg.loop.promotions_per_round = 20;
  cfg.loop.rounds_max = 2;
  cfg.loop.phase_a_epochs = 1;
  return cfg;
}

}  // namespace

TEST_CASE("promote takes the delta row with zero entropy") {
  const Lexicon lex = two_word_lexicon();
  TransportPlan plan = plan_with_rows({{1.0, 0.0}});
  Pool pool;
  pool.unaligned = {0};
  const auto promos = promote(plan, {0}, pool, lex, 5, 1);
  REQUIRE(promos.size() == 1);
  CHECK(promos[0].word == 0);
  CHECK(promos[0].label == "aa");
  CHECK(promos[0].entropy == doctest::Approx(0.0));
  CHECK(pool.unaligned.empty());
  CHECK(pool.aligned.size() == 1);
  CHECK(pool.aligned[0].provenance == Provenance::Pseudo);
  CHECK(pool.aligned[0].round == 1);
}

TEST_CASE("promote clamps the budget to the pool") {
  const Lexicon lex = two_word_lexicon();
  TransportPlan plan =
      plan_with_rows({{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}});
  Pool pool;
  pool.unaligned = {0, 1, 2};
  const auto promos = promote(plan, {0, 1, 2}, pool, lex, 200, 1);
  CHECK(promos.size() == 3);
  CHECK(pool.unaligned.empty());
}

TEST_CASE("promote ranks by entropy ascending") {
  const Lexicon lex = two_word_lexicon();
  // entropies: row0 sharp (low), row1 uniform (high), row2 in between
  TransportPlan plan =
      plan_with_rows({{0.99, 0.01}, {0.5, 0.5}, {0.85, 0.15}});
  Pool pool;
  pool.unaligned = {0, 1, 2};
  const auto promos = promote(plan, {0, 1, 2}, pool, lex, 2, 3);
  REQUIRE(promos.size() == 2);
  CHECK(promos[0].id == 0);
  CHECK(promos[1].id == 2);
  CHECK(pool.unaligned == std::vector<int>{1});
}

TEST_CASE("promote breaks entropy ties by image id and argmax ties by word index") {
  const Lexicon lex = two_word_lexicon();
  TransportPlan plan = plan_with_rows({{0.5, 0.5}, {0.5, 0.5}});
  Pool pool;
  pool.unaligned = {7, 3};
  const auto promos = promote(plan, {3, 7}, pool, lex, 1, 1);
  REQUIRE(promos.size() == 1);
  CHECK(promos[0].id == 3);      // lower id wins the entropy tie
  CHECK(promos[0].word == 0);    // lower word index wins the argmax tie
}

TEST_CASE("promote on an empty pool signals termination") {
  const Lexicon lex = two_word_lexicon();
  TransportPlan plan = plan_with_rows({{1.0, 0.0}});
  Pool pool;
  pool.aligned.push_back({0, "aa", Provenance::Seed, 0});
  CHECK(promote(plan, {0}, pool, lex, 5, 1).empty());
}

TEST_CASE("promotions are deterministic") {
  const Lexicon lex = two_word_lexicon();
  for (int trial = 0; trial < 3; ++trial) {
    TransportPlan plan =
        plan_with_rows({{0.7, 0.3}, {0.6, 0.4}, {0.55, 0.45}, {0.52, 0.48}});
    Pool pool;
    pool.unaligned = {0, 1, 2, 3};
    const auto promos = promote(plan, {0, 1, 2, 3}, pool, lex, 2, 1);
    CHECK(promos[0].id == 0);
    CHECK(promos[1].id == 1);
  }
}

TEST_CASE("pool validation catches bookkeeping errors") {
  Pool pool;
  pool.aligned.push_back({0, "aa", Provenance::Seed, 0});
  pool.unaligned = {0};
  CHECK_THROWS(pool.validate(1));
  pool.unaligned = {1};
  CHECK_NOTHROW(pool.validate(2));
  CHECK_THROWS(pool.validate(3));
}

TEST_CASE("pool json round trip") {
  Pool pool;
  pool.aligned.push_back({4, "cat", Provenance::Seed, 0});
  pool.aligned.push_back({9, "dog", Provenance::Pseudo, 3});
  pool.unaligned = {1, 2};
  const Pool back = Pool::from_json(pool.to_json());
  CHECK(back.unaligned == pool.unaligned);
  REQUIRE(back.aligned.size() == 2);
  CHECK(back.aligned[1].label == "dog");
  CHECK(back.aligned[1].provenance == Provenance::Pseudo);
  CHECK(back.aligned[1].round == 3);
}

namespace {

// Zeroed encoder weights force constant frame logits, so the decode is a
// single known character (or empty when blank wins).
RecognizerParams constant_decoder(const std::string& symbols, int argmax_class) {
  RecognizerConfig cfg;
  cfg.hidden = 4;
  cfg.descriptor_dim = 4;
  cfg.alphabet.symbols = symbols;
  cfg.phoc = PhocConfig{symbols, {1}};
  RecognizerParams p = RecognizerParams::init(cfg, Rng(1));
  for (double& v : p.w_enc.a) v = 0.0;
  for (double& v : p.b_enc) v = 0.0;
  for (double& v : p.w_cls.a) v = 0.0;
  for (double& v : p.b_cls) v = 0.0;
  p.b_cls[static_cast<std::size_t>(argmax_class)] = 5.0;
  return p;
}

DatasetItem item_with_truth(int id, const std::string& truth) {
  DatasetItem item;
  item.id = id;
  item.image = render_word(truth, RenderSpec{0.0, 0.0, 0.0, false, 3},
                           static_cast<std::uint64_t>(id));
  item.image.truth = truth;
  return item;
}

}  // namespace

TEST_CASE("evaluate arithmetic under forced decodes") {
  SUBCASE("constant correct single-character decode") {
    const RecognizerParams p = constant_decoder("ab", 1);  // decodes "a"
    const DatasetItem item = item_with_truth(0, "a");
    const EvalResult ev = evaluate(p, {&item});
    CHECK(ev.cer == doctest::Approx(0.0));
    CHECK(ev.wer == doctest::Approx(0.0));
  }
  SUBCASE("all-blank decode gives CER 1 and WER 1") {
    const RecognizerParams p = constant_decoder("ab", 0);  // decodes ""
    const DatasetItem i1 = item_with_truth(0, "ab");
    const DatasetItem i2 = item_with_truth(1, "ba");
    const EvalResult ev = evaluate(p, {&i1, &i2});
    CHECK(ev.cer == doctest::Approx(1.0));
    CHECK(ev.wer == doctest::Approx(1.0));
  }
  SUBCASE("partial credit is edit distance over reference length") {
    const RecognizerParams p = constant_decoder("ab", 1);  // decodes "a"
    const DatasetItem item = item_with_truth(0, "abb");
    const EvalResult ev = evaluate(p, {&item});
    CHECK(ev.cer == doctest::Approx(2.0 / 3.0));
    CHECK(ev.wer == doctest::Approx(1.0));
  }
  SUBCASE("empty split throws") {
    const RecognizerParams p = constant_decoder("ab", 0);
    CHECK_THROWS_AS(evaluate(p, {}), std::invalid_argument);
  }
}

TEST_CASE("run with everything pre-aligned does one adaptation pass") {
  const ExperimentConfig cfg = fast_config();
  const Dataset working = build_working_dataset(cfg);
  PreparedExperiment prep = prepare_experiment(cfg, working);
  prep.seed_labels.clear();
  for (const auto& item : working.items)
    prep.seed_labels.emplace_back(item.id, item.image.truth);

  RunInputs in;
  in.working = &working;
  in.synthetic = &prep.synthetic;
  in.lexicon = &prep.lexicon;
  in.embedding = &prep.embedding;
  in.recognizer_cfg = prep.recognizer_cfg;
  in.projector_cfg = prep.projector_cfg;
  in.seed_labels = prep.seed_labels;
  in.loop = prep.loop_cfg;

  const RunResult result = run(in);
  REQUIRE(result.reports.size() == 1);
  CHECK(result.reports[0].round == 0);
  CHECK(result.reports[0].promotions == 0);
  CHECK(result.pool.unaligned.empty());
}

TEST_CASE("run promotes everything in one round when the budget covers the pool") {
  ExperimentConfig cfg = fast_config();
  cfg.loop.promotions_per_round = 500;  // larger than the pool
  cfg.loop.rounds_max = 10;
  const Dataset working = build_working_dataset(cfg);
  const RunResult result = run_experiment(cfg, working, "");
  REQUIRE(result.reports.size() == 2);
  CHECK(result.reports[1].promotions ==
        static_cast<int>(result.reports[0].unaligned_size));
  CHECK(result.reports[1].unaligned_size == 0);
}

TEST_CASE("run bookkeeping: monotone growth, no churn, termination bound") {
  const ExperimentConfig cfg = fast_config();
  const Dataset working = build_working_dataset(cfg);
  const RunResult result = run_experiment(cfg, working, "");

  const std::size_t u0 = result.reports[0].unaligned_size;
  const std::size_t bound =
      (u0 + cfg.loop.promotions_per_round - 1) / cfg.loop.promotions_per_round;
  CHECK(result.reports.size() <= bound + 1);
  for (std::size_t k = 1; k < result.reports.size(); ++k) {
    const auto& prev = result.reports[k - 1];
    const auto& cur = result.reports[k];
    CHECK(cur.aligned_size > prev.aligned_size);
    CHECK(cur.unaligned_size ==
          prev.unaligned_size - static_cast<std::size_t>(cur.promotions));
  }

  // seed items keep their original labels
  for (const auto& a : result.pool.aligned)
    if (a.provenance == Provenance::Seed) CHECK(a.round == 0);
}

TEST_CASE("run is deterministic end to end") {
  const ExperimentConfig cfg = fast_config();
  const Dataset working = build_working_dataset(cfg);
  const RunResult a = run_experiment(cfg, working, "");
  const RunResult b = run_experiment(cfg, working, "");
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t k = 0; k < a.reports.size(); ++k)
    CHECK(a.reports[k].to_json().dump() == b.reports[k].to_json().dump());
  CHECK(a.recognizer.flatten() == b.recognizer.flatten());
  CHECK(a.projector.flatten() == b.projector.flatten());
}

TEST_CASE("run rejects inconsistent configurations before round 1") {
  const ExperimentConfig cfg = fast_config();
  const Dataset working = build_working_dataset(cfg);
  PreparedExperiment prep = prepare_experiment(cfg, working);

  RunInputs in;
  in.working = &working;
  in.synthetic = &prep.synthetic;
  in.lexicon = &prep.lexicon;
  in.embedding = &prep.embedding;
  in.recognizer_cfg = prep.recognizer_cfg;
  in.projector_cfg = prep.projector_cfg;
  in.seed_labels = prep.seed_labels;
  in.loop = prep.loop_cfg;

  SUBCASE("projector/descriptor mismatch") {
    in.projector_cfg.in_dim += 1;
    CHECK_THROWS_AS(run(in), std::invalid_argument);
  }
  SUBCASE("projector/embedding mismatch") {
    in.projector_cfg.out_dim += 1;
    CHECK_THROWS_AS(run(in), std::invalid_argument);
  }
  SUBCASE("no seed labels") {
    in.seed_labels.clear();
    CHECK_THROWS_AS(run(in), std::invalid_argument);
  }
  SUBCASE("seed label outside the lexicon") {
    in.seed_labels[0].second = "zzzzzzzz";
    CHECK_THROWS_AS(run(in), std::invalid_argument);
  }
}
