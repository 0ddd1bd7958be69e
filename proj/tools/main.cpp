#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "otalign/experiment.hpp"
#include "otalign/loop.hpp"
#include "otalign/serialize.hpp"

namespace fs = std::filesystem;
using namespace otalign;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int cmd_gen_data(const ExperimentConfig& cfg, bool force) {
  const fs::path dir = cfg.dataset_dir();
  if (fs::exists(dir / "manifest.json") && !force)
    throw ConfigError("dataset already exists at " + dir.string() +
                      "; pass --force to regenerate");
  const Dataset ds = build_working_dataset(cfg);
  save_dataset(ds, dir, true);
  write_json(dir / "resolved-config.json", cfg.to_json());
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& item : ds.items) {
    train += item.split == Split::Train;
    val += item.split == Split::Val;
    test += item.split == Split::Test;
  }
  std::cerr << "wrote " << ds.items.size() << " images (" << train << "/" << val
            << "/" << test << " train/val/test) to " << dir.string() << "\n";
  return 0;
}

nlohmann::json config_without_rounds_max(nlohmann::json j) {
  j["loop"].erase("rounds_max");
  return j;
}

std::optional<int> last_complete_round(const fs::path& out_dir) {
  std::optional<int> best;
  const fs::path cps = out_dir / "checkpoints";
  if (!fs::exists(cps)) return best;
  for (const auto& entry : fs::directory_iterator(cps)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("round_", 0) != 0) continue;
    const int round = std::stoi(name.substr(6));
    if (fs::exists(entry.path() / "pool.json") &&
        fs::exists(entry.path() / "recognizer.bin") &&
        fs::exists(entry.path() / "projector.bin"))
      if (!best || round > *best) best = round;
  }
  return best;
}

ResumeState load_resume_state(const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::ifstream prev_cfg(out_dir / "resolved-config.json");
  if (!prev_cfg)
    throw ConfigError("--resume: no resolved-config.json in " + out_dir.string());
  nlohmann::json prev;
  prev_cfg >> prev;
  if (config_without_rounds_max(prev) != config_without_rounds_max(cfg.to_json()))
    throw ConfigError("--resume: config does not match the checkpointed run "
                      "(only loop.rounds_max may change)");

  const auto last = last_complete_round(out_dir);
  if (!last) throw ConfigError("--resume: no complete checkpoint in " + out_dir.string());

  ResumeState state;
  state.last_round = *last;
  char name[32];
  std::snprintf(name, sizeof(name), "round_%03d", *last);
  const fs::path cdir = out_dir / "checkpoints" / name;
  nlohmann::json pj;
  std::ifstream(cdir / "pool.json") >> pj;
  state.pool = Pool::from_json(pj);
  state.recognizer = load_recognizer(cdir / "recognizer.bin");
  state.projector = load_projector(cdir / "projector.bin");

  std::ifstream reports(out_dir / "reports.jsonl");
  std::string line;
  while (std::getline(reports, line)) {
    if (line.empty()) continue;
    const RoundReport r = RoundReport::from_json(nlohmann::json::parse(line));
    if (r.round <= *last) state.reports.push_back(r);
  }
  if (state.reports.empty() ||
      state.reports.back().round != *last)
    throw ConfigError("--resume: reports.jsonl does not match checkpoints");
  return state;
}

int cmd_run(const ExperimentConfig& cfg, bool resume) {
  const fs::path dir = cfg.dataset_dir();
  if (!fs::exists(dir / "manifest.json"))
    throw ConfigError("no dataset at " + dir.string() + "; run gen-data first");
  const Dataset working = load_dataset(dir);
  const fs::path out_dir = cfg.out;

  std::optional<ResumeState> state;
  if (resume) state = load_resume_state(cfg, out_dir);
  fs::create_directories(out_dir);
  write_json(out_dir / "resolved-config.json", cfg.to_json());

  const RunResult result =
      run_experiment(cfg, working, out_dir, state ? &*state : nullptr);
  const auto& last = result.reports.back();
  std::cerr << "finished after round " << last.round << ": CER " << last.cer
            << ", WER " << last.wer << " (aligned " << last.aligned_size << "/"
            << last.aligned_size + last.unaligned_size << ")\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset_dir,
             const std::string& split_name, const std::string& out_dir) {
  fs::path ckpt = checkpoint;
  if (fs::is_directory(ckpt)) ckpt /= "recognizer.bin";
  if (!fs::exists(ckpt)) throw ConfigError("no checkpoint at " + ckpt.string());
  if (!fs::exists(fs::path(dataset_dir) / "manifest.json"))
    throw ConfigError("no dataset at " + dataset_dir);

  const RecognizerParams params = load_recognizer(ckpt);
  const Dataset ds = load_dataset(dataset_dir);
  const auto split = ds.split_items(split_from_string(split_name));
  if (split.empty()) throw ConfigError("split '" + split_name + "' is empty");

  const EvalResult ev = evaluate(params, split);
  const nlohmann::json metrics = {{"split", split_name},
                                  {"n", split.size()},
                                  {"cer", ev.cer},
                                  {"wer", ev.wer}};
  std::cout << metrics.dump(2) << "\n";
  write_json(fs::path(out_dir) / "metrics.json", metrics);
  write_json(fs::path(out_dir) / "resolved-config.json",
             {{"command", "eval"},
              {"checkpoint", ckpt.string()},
              {"dataset", dataset_dir},
              {"split", split_name},
              {"out", out_dir}});
  return 0;
}

struct CellStats {
  std::vector<double> cer, wer, precision;
  int failures = 0;
};

int cmd_ablate(const ExperimentConfig& cfg) {
  const fs::path out_dir = cfg.out;
  fs::create_directories(out_dir);
  write_json(out_dir / "resolved-config.json", cfg.to_json());

  std::map<std::uint64_t, Dataset> dataset_cache;
  auto working_for = [&](const ExperimentConfig& c) -> const Dataset& {
    auto it = dataset_cache.find(c.seed);
    if (it == dataset_cache.end())
      it = dataset_cache.emplace(c.seed, build_working_dataset(c)).first;
    return it->second;
  };

  auto stats = [](const std::vector<double>& xs) {
    if (xs.empty()) return std::pair{0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(xs.size()))};
  };

  std::ofstream csv(out_dir / "ablation.csv", std::ios::trunc);
  csv << "prior,lambda_phoc,label,seed_fraction,seeds_ok,seeds_failed,"
         "cer_mean,cer_std,wer_mean,wer_std,round1_precision_mean,"
         "round1_precision_std\n";

  for (const auto& prior : cfg.ablate.priors) {
    for (double lphoc : cfg.ablate.lambda_phoc) {
      for (double frac : cfg.ablate.seed_fractions) {
        CellStats cell;
        for (std::uint64_t s : cfg.ablate.seeds) {
          ExperimentConfig c = cfg;
          c.seed = s;
          c.lexicon.prior = prior;
          c.recognizer.lambda_phoc = lphoc;
          c.loop.seed_fraction = frac;
          try {
            const RunResult r = run_experiment(c, working_for(c), "");
            cell.cer.push_back(r.reports.back().cer);
            cell.wer.push_back(r.reports.back().wer);
            for (const auto& rep : r.reports)
              if (rep.round == 1 && rep.precision >= 0.0)
                cell.precision.push_back(rep.precision);
          } catch (const std::exception& e) {
            ++cell.failures;
            std::cerr << "ablate cell (" << prior << ", " << lphoc << ", " << frac
                      << ", seed " << s << ") failed: " << e.what() << "\n";
          }
        }
        const auto [cer_m, cer_s] = stats(cell.cer);
        const auto [wer_m, wer_s] = stats(cell.wer);
        const auto [pr_m, pr_s] = stats(cell.precision);
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "%s,%.17g,%s,%.17g,%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      prior.c_str(), lphoc,
                      lphoc == 0.0 ? "CTC only" : "CTC + PHOC", frac,
                      cell.cer.size(), cell.failures, cer_m, cer_s, wer_m, wer_s,
                      pr_m, pr_s);
        csv << buf;
        csv.flush();
      }
    }
  }
  std::cerr << "ablation grid written to " << (out_dir / "ablation.csv").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative visual-semantic alignment for low-resource word "
               "recognition on synthetic glyph data"};
  app.require_subcommand(1);

  std::string config_path, out_override, prior_override, dataset_override;
  std::uint64_t seed_override = 0;
  int rounds_max_override = 0;
  bool force = false, resume = false;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* run_cmd = app.add_subcommand("run", "run the full alignment loop");
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a split");
  auto* ablate_cmd = app.add_subcommand("ablate", "run the configured ablation grid");

  CLI::Option *seed_opt = nullptr, *out_opt = nullptr, *prior_opt = nullptr,
              *rounds_opt = nullptr, *dataset_opt = nullptr;
  for (CLI::App* cmd : {gen, run_cmd, ablate_cmd}) {
    cmd->add_option("--config", config_path, "experiment config (JSON)");
    seed_opt = cmd->add_option("--seed", seed_override, "root seed override");
    out_opt = cmd->add_option("--out", out_override, "output directory override");
  }
  gen->add_flag("--force", force, "overwrite an existing dataset");
  run_cmd->add_flag("--resume", resume, "continue from the last checkpoint");
  rounds_opt = run_cmd->add_option("--rounds-max", rounds_max_override,
                                   "promotion round cap override");
  prior_opt = run_cmd->add_option("--prior", prior_override,
                                  "lexicon prior override (empirical|uniform|zipf)");
  dataset_opt = run_cmd->add_option("--dataset", dataset_override,
                                    "dataset directory override");

  std::string eval_checkpoint, eval_dataset, eval_split = "test", eval_out = "eval";
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file or round dir")
      ->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");
  eval_cmd->add_option("--out", eval_out, "directory for metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (seed_opt && seed_opt->count()) cfg.seed = seed_override;
    if (out_opt && out_opt->count()) cfg.out = out_override;
    if (prior_opt && prior_opt->count()) cfg.lexicon.prior = prior_override;
    if (rounds_opt && rounds_opt->count()) cfg.loop.rounds_max = rounds_max_override;
    if (dataset_opt && dataset_opt->count()) cfg.dataset.dir = dataset_override;
    cfg.validate();

    if (gen->parsed()) return cmd_gen_data(cfg, force);
    if (run_cmd->parsed()) return cmd_run(cfg, resume);
    if (ablate_cmd->parsed()) return cmd_ablate(cfg);
    if (eval_cmd->parsed())
      return cmd_eval(eval_checkpoint, eval_dataset, eval_split, eval_out);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
}
