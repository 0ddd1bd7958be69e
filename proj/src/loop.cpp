#include "otalign/loop.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace otalign {

namespace {

std::string provenance_str(Provenance p) {
  return p == Provenance::Seed ? "seed" : "pseudo";
}

Provenance provenance_from_str(const std::string& s) {
  if (s == "seed") return Provenance::Seed;
  if (s == "pseudo") return Provenance::Pseudo;
  throw std::invalid_argument("unknown provenance: " + s);
}

}  // namespace

void Pool::validate(std::size_t total) const {
  std::set<int> seen;
  for (const auto& a : aligned)
    if (!seen.insert(a.id).second)
      throw std::runtime_error("pool: duplicate aligned id");
  for (int id : unaligned)
    if (!seen.insert(id).second)
      throw std::runtime_error("pool: id in both aligned and unaligned");
  if (seen.size() != total)
    throw std::runtime_error("pool: aligned + unaligned does not cover the working set");
}

nlohmann::json Pool::to_json() const {
  nlohmann::json al = nlohmann::json::array();
  for (const auto& a : aligned)
    al.push_back({{"id", a.id},
                  {"label", a.label},
                  {"provenance", provenance_str(a.provenance)},
                  {"round", a.round}});
  return {{"aligned", std::move(al)}, {"unaligned", unaligned}};
}

Pool Pool::from_json(const nlohmann::json& j) {
  Pool p;
  for (const auto& a : j.at("aligned")) {
    p.aligned.push_back({a.at("id").get<int>(), a.at("label").get<std::string>(),
                         provenance_from_str(a.at("provenance").get<std::string>()),
                         a.at("round").get<int>()});
  }
  j.at("unaligned").get_to(p.unaligned);
  return p;
}

nlohmann::json RoundReport::to_json() const {
  nlohmann::json j = {{"round", round},
                      {"promotions", promotions},
                      {"aligned", aligned_size},
                      {"unaligned", unaligned_size},
                      {"cer", cer},
                      {"wer", wer},
                      {"recognizer_loss", recognizer_loss},
                      {"projector_loss", projector_loss},
                      {"sinkhorn_converged", sinkhorn_converged},
                      {"sinkhorn_violation", sinkhorn_violation}};
  if (precision >= 0.0)
    j["precision"] = precision;
  else
    j["precision"] = nullptr;
  return j;
}

RoundReport RoundReport::from_json(const nlohmann::json& j) {
  RoundReport r;
  r.round = j.at("round").get<int>();
  r.promotions = j.at("promotions").get<int>();
  r.precision = j.at("precision").is_null() ? -1.0 : j.at("precision").get<double>();
  r.aligned_size = j.at("aligned").get<std::size_t>();
  r.unaligned_size = j.at("unaligned").get<std::size_t>();
  r.cer = j.at("cer").get<double>();
  r.wer = j.at("wer").get<double>();
  r.recognizer_loss = j.at("recognizer_loss").get<double>();
  r.projector_loss = j.at("projector_loss").get<double>();
  r.sinkhorn_converged = j.at("sinkhorn_converged").get<bool>();
  r.sinkhorn_violation = j.at("sinkhorn_violation").get<double>();
  return r;
}

std::vector<Promotion> promote(const TransportPlan& plan,
                               const std::vector<int>& row_ids, Pool& pool,
                               const Lexicon& lexicon, int k_budget, int round) {
  if (k_budget < 1) throw std::invalid_argument("promote: budget must be >= 1");
  if (plan.t.rows != row_ids.size())
    throw std::invalid_argument("promote: plan rows do not match id order");
  if (pool.unaligned.empty()) return {};

  std::map<int, std::size_t> row_of;
  for (std::size_t r = 0; r < row_ids.size(); ++r) row_of[row_ids[r]] = r;

  std::vector<Promotion> candidates;
  candidates.reserve(pool.unaligned.size());
  for (int id : pool.unaligned) {
    const auto it = row_of.find(id);
    if (it == row_of.end())
      throw std::invalid_argument("promote: unaligned id missing from plan rows");
    const auto dist = row_distribution(plan, it->second);
    int best = 0;
    for (std::size_t w = 1; w < dist.size(); ++w)
      if (dist[w] > dist[static_cast<std::size_t>(best)]) best = static_cast<int>(w);
    candidates.push_back(
        {id, lexicon.words[static_cast<std::size_t>(best)], best, row_entropy(dist)});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Promotion& a, const Promotion& b) {
              if (a.entropy != b.entropy) return a.entropy < b.entropy;
              return a.id < b.id;
            });
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(k_budget), candidates.size());
  candidates.resize(take);

  std::set<int> promoted;
  for (const auto& c : candidates) {
    pool.aligned.push_back({c.id, c.label, Provenance::Pseudo, round});
    promoted.insert(c.id);
  }
  std::erase_if(pool.unaligned, [&](int id) { return promoted.contains(id); });
  return candidates;
}

EvalResult evaluate(const RecognizerParams& params,
                    const std::vector<const DatasetItem*>& split) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  long edits = 0, ref_chars = 0, wrong = 0;
  for (const DatasetItem* item : split) {
    const auto out = forward(params, item->image);
    const std::string decoded = ctc_greedy_decode(out.logits, params.cfg.alphabet);
    edits += levenshtein(decoded, item->image.truth);
    ref_chars += static_cast<long>(item->image.truth.size());
    wrong += decoded != item->image.truth;
  }
  return {static_cast<double>(edits) / static_cast<double>(ref_chars),
          static_cast<double>(wrong) / static_cast<double>(split.size())};
}

namespace {

struct Reporter {
  std::filesystem::path dir;

  void start_fresh(const std::vector<RoundReport>& existing) const {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    std::ofstream jsonl(dir / "reports.jsonl", std::ios::trunc);
    std::ofstream csv(dir / "summary.csv", std::ios::trunc);
    csv << "round,promotions,precision,cer,wer\n";
    for (const auto& r : existing) append(jsonl, csv, r);
  }

  void add(const RoundReport& r) const {
    if (dir.empty()) return;
    std::ofstream jsonl(dir / "reports.jsonl", std::ios::app);
    std::ofstream csv(dir / "summary.csv", std::ios::app);
    append(jsonl, csv, r);
  }

  static void append(std::ofstream& jsonl, std::ofstream& csv, const RoundReport& r) {
    jsonl << r.to_json().dump() << "\n";
    char buf[160];
    if (r.precision >= 0.0)
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", r.round,
                    r.promotions, r.precision, r.cer, r.wer);
    else
      std::snprintf(buf, sizeof(buf), "%d,%d,,%.17g,%.17g\n", r.round,
                    r.promotions, r.cer, r.wer);
    csv << buf;
  }

  void checkpoint(int round, const Pool& pool, const RecognizerParams& rec,
                  const ProjectorParams& proj) const {
    if (dir.empty()) return;
    char name[32];
    std::snprintf(name, sizeof(name), "round_%03d", round);
    const auto cdir = dir / "checkpoints" / name;
    std::filesystem::create_directories(cdir);
    std::ofstream(cdir / "pool.json") << pool.to_json().dump(2) << "\n";
    save_recognizer(cdir / "recognizer.bin", rec);
    save_projector(cdir / "projector.bin", proj);
  }
};

}  // namespace

RunResult run(const RunInputs& in, const ResumeState* resume) {
  if (!in.working || !in.lexicon || !in.embedding)
    throw std::invalid_argument("run: missing inputs");
  in.recognizer_cfg.validate();
  in.projector_cfg.validate();
  if (in.projector_cfg.in_dim != in.recognizer_cfg.descriptor_dim)
    throw std::invalid_argument("run: projector input does not match descriptor dim");
  if (static_cast<std::size_t>(in.projector_cfg.out_dim) != in.embedding->dim)
    throw std::invalid_argument("run: projector output does not match embedding dim");
  if (in.embedding->points.rows != in.lexicon->size())
    throw std::invalid_argument("run: embedding rows do not match lexicon");
  if (in.seed_labels.empty())
    throw std::invalid_argument("run: seed labels must be nonempty");
  if (in.working->items.empty())
    throw std::invalid_argument("run: empty working dataset");

  const std::size_t n = in.working->items.size();
  std::vector<int> row_ids(n);
  std::map<int, const DatasetItem*> item_of;
  for (std::size_t r = 0; r < n; ++r) {
    row_ids[r] = in.working->items[r].id;
    item_of[row_ids[r]] = &in.working->items[r];
  }
  if (!std::is_sorted(row_ids.begin(), row_ids.end()))
    throw std::invalid_argument("run: working items must be sorted by id");

  std::vector<TrainSample> synth_samples;
  if (in.synthetic)
    for (const auto& item : in.synthetic->items)
      synth_samples.push_back({&item.image, item.image.truth});

  const auto test_split = in.working->split_items(Split::Test);
  const Rng root(in.loop.seed);
  const Reporter reporter{in.out_dir};

  RunResult R{.reports = {},
              .recognizer = RecognizerParams::init(in.recognizer_cfg,
                                                   root.fork("recognizer_init")),
              .projector = ProjectorParams::init(in.projector_cfg,
                                                 root.fork("projector_init")),
              .pool = {}};

  auto phase_a = [&](int round) -> double {
    std::vector<TrainSample> aligned;
    aligned.reserve(R.pool.aligned.size());
    for (const auto& a : R.pool.aligned)
      aligned.push_back({&item_of.at(a.id)->image, a.label});
    RecognizerTrainOptions opts;
    opts.epochs = in.loop.phase_a_epochs;
    opts.batch_size = in.loop.batch_size;
    opts.lambda_phoc = in.loop.lambda_phoc;
    opts.rho_syn = synth_samples.empty() ? 0.0 : in.loop.rho_syn;
    opts.adam = in.loop.recognizer_adam;
    opts.seed = root.fork("phase_a").fork(static_cast<std::uint64_t>(round)).seed();
    const auto trace = train_recognizer(R.recognizer, aligned, synth_samples, opts);
    return trace.empty() ? 0.0 : trace.back();
  };

  int k = 0;
  if (resume) {
    R.pool = resume->pool;
    R.recognizer = resume->recognizer;
    R.projector = resume->projector;
    R.reports = resume->reports;
    k = resume->last_round;
    R.pool.validate(n);
    reporter.start_fresh(R.reports);
  } else {
    std::set<int> seeded;
    for (const auto& [id, label] : in.seed_labels) {
      if (!item_of.contains(id))
        throw std::invalid_argument("run: seed label for unknown image id");
      if (in.lexicon->index_of(label) < 0)
        throw std::invalid_argument("run: seed label outside lexicon: " + label);
      if (!seeded.insert(id).second)
        throw std::invalid_argument("run: duplicate seed label");
      R.pool.aligned.push_back({id, label, Provenance::Seed, 0});
    }
    for (int id : row_ids)
      if (!seeded.contains(id)) R.pool.unaligned.push_back(id);
    R.pool.validate(n);
    reporter.start_fresh({});

    // Stage I: warm start on the synthetic corpus alone.
    if (in.loop.pretrain_epochs > 0 && !synth_samples.empty()) {
      RecognizerTrainOptions opts;
      opts.epochs = in.loop.pretrain_epochs;
      opts.batch_size = in.loop.batch_size;
      opts.lambda_phoc = in.loop.lambda_phoc;
      opts.rho_syn = 1.0;
      opts.adam = in.loop.recognizer_adam;
      opts.seed = root.fork("pretrain").seed();
      train_recognizer(R.recognizer, {}, synth_samples, opts);
    }

    RoundReport r0;
    r0.round = 0;
    r0.recognizer_loss = phase_a(0);
    const EvalResult ev = evaluate(R.recognizer, test_split);
    r0.cer = ev.cer;
    r0.wer = ev.wer;
    r0.aligned_size = R.pool.aligned.size();
    r0.unaligned_size = R.pool.unaligned.size();
    R.reports.push_back(r0);
    reporter.add(r0);
    reporter.checkpoint(0, R.pool, R.recognizer, R.projector);
  }

  const int descriptor_dim = in.recognizer_cfg.descriptor_dim;
  while (k < in.loop.rounds_max && !R.pool.unaligned.empty()) {
    ++k;

    // Descriptors for the whole working pool in row order.
    Mat z_rows(n, static_cast<std::size_t>(descriptor_dim));
    for (std::size_t r = 0; r < n; ++r) {
      const auto out = forward(R.recognizer, item_of.at(row_ids[r])->image);
      std::copy(out.z.begin(), out.z.end(), z_rows.row(r).begin());
    }

    std::map<int, std::size_t> row_of;
    for (std::size_t r = 0; r < n; ++r) row_of[row_ids[r]] = r;
    std::vector<AlignedPair> pairs;
    pairs.reserve(R.pool.aligned.size());
    for (const auto& a : R.pool.aligned)
      pairs.push_back({row_of.at(a.id), in.lexicon->index_of(a.label)});

    ProjectorTrainOptions popts = in.loop.projector;
    popts.seed = root.fork("projector").fork(static_cast<std::uint64_t>(k)).seed();
    const ProjectorTrainResult ptr =
        train_projector(R.projector, z_rows, pairs, *in.embedding,
                        in.lexicon->prior, popts);

    // Final coupling on the trained projections.
    const ProjectorActivations acts = project_all(R.projector, z_rows);
    const Mat cost = cost_matrix(acts.out, *in.embedding);
    const std::vector<double> row_marginal(n, 1.0 / static_cast<double>(n));
    const TransportPlan plan =
        sinkhorn(cost, row_marginal, in.lexicon->prior, popts.sinkhorn,
                 ptr.warm_f.empty() ? nullptr : &ptr.warm_f,
                 ptr.warm_g.empty() ? nullptr : &ptr.warm_g);

    const auto promos = promote(plan, row_ids, R.pool,
                                *in.lexicon, in.loop.promotions_per_round, k);
    R.pool.validate(n);
    int correct = 0;
    for (const auto& p : promos)
      correct += p.label == item_of.at(p.id)->image.truth;

    RoundReport rep;
    rep.round = k;
    rep.promotions = static_cast<int>(promos.size());
    rep.precision = promos.empty() ? -1.0
                                   : static_cast<double>(correct) /
                                         static_cast<double>(promos.size());
    rep.projector_loss = ptr.loss_trace.empty() ? 0.0 : ptr.loss_trace.back();
    rep.sinkhorn_converged = plan.converged;
    rep.sinkhorn_violation = plan.marginal_violation;
    rep.recognizer_loss = phase_a(k);
    const EvalResult ev = evaluate(R.recognizer, test_split);
    rep.cer = ev.cer;
    rep.wer = ev.wer;
    rep.aligned_size = R.pool.aligned.size();
    rep.unaligned_size = R.pool.unaligned.size();
    R.reports.push_back(rep);
    reporter.add(rep);
    reporter.checkpoint(k, R.pool, R.recognizer, R.projector);
  }
  return R;
}

}  // namespace otalign
