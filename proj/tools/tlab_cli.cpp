#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "tlab/config.hpp"
#include "tlab/error.hpp"
#include "tlab/experiments.hpp"
#include "tlab/io.hpp"
#include "tlab/lab.hpp"
#include "tlab/preferences.hpp"
#include "tlab/rng.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool force = false;
  int threads = 1;
};

ExperimentSpec spec_from(const std::string& config, const Globals& g) {
  ExperimentSpec s = config.empty() ? default_spec() : load_config(config);
  if (g.seed) s.seeds = {*g.seed};
  s.validate();
  return s;
}

DriverOptions driver_options(const Globals& g) {
  DriverOptions o;
  o.out = g.out;
  o.force = g.force;
  o.threads = g.threads;
  o.progress = &std::cerr;
  return o;
}

void print_runs(const std::vector<RunRecord>& runs) {
  for (const auto& r : runs) {
    std::cout << "# " << r.experiment << " seed " << r.seed << " (" << r.dir.string()
              << (r.cached ? ", cached" : "") << ")\n"
              << comparison_table(r.reports);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tlab: RL post-training transfer lab on a synthetic token world"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Run seed (overrides the config seed list)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--force", g.force, "Recompute even when a matching run exists");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  std::string config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  };

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate the task suite as JSONL pools");
  add_config(gen);

  // audit
  auto* audit = app.add_subcommand("audit", "Topic-bucket audit of a prompt pool");
  std::string pool_path, rules_path;
  int vocab_size = 64;
  audit->add_option("--pool", pool_path, "Pool JSONL")->required()->check(CLI::ExistingFile);
  audit->add_option("--rules", rules_path, "Rule table JSON")->check(CLI::ExistingFile);
  audit->add_option("--vocab", vocab_size, "Standard vocabulary size");

  // train-rm
  auto* trm = app.add_subcommand("train-rm", "Fit the preference reward model");
  std::string pairs_path, save_pairs;
  trm->add_option("--pool", pool_path, "Open pool JSONL (default: generated)")->check(CLI::ExistingFile);
  trm->add_option("--pairs", pairs_path, "Preference JSONL (default: synthesized)")->check(CLI::ExistingFile);
  trm->add_option("--save-pairs", save_pairs, "Write the pairs used");
  add_config(trm);

  // train / two-stage / ablate / sweeps
  auto* train = app.add_subcommand("train", "Train one configuration per seed");
  add_config(train);
  auto* two = app.add_subcommand("two-stage", "Open-ended PPO followed by in-domain GRPO");
  add_config(two);
  auto* ablate = app.add_subcommand("ablate", "Environment x optimizer ablation grid");
  add_config(ablate);
  auto* sdata = app.add_subcommand("sweep-data", "Training-pool size sweep");
  add_config(sdata);
  std::vector<int> sizes, epochs_list;
  sdata->add_option("--sizes", sizes, "Pool sizes (nondecreasing)");
  auto* sep = app.add_subcommand("sweep-epochs", "Evaluate saved checkpoints by epoch");
  add_config(sep);
  sep->add_option("--epochs", epochs_list, "Epochs to evaluate");

  // eval / passk
  std::string checkpoint, benchmark_name;
  std::vector<std::string> bench_list;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on benchmarks");
  add_config(ev);
  ev->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--benchmarks", bench_list, "Benchmark names");
  auto* pk = app.add_subcommand("passk", "pass@k curve of a checkpoint");
  add_config(pk);
  int n = 0;
  std::vector<int> ks;
  pk->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required()->check(CLI::ExistingFile);
  pk->add_option("--benchmark", benchmark_name, "Benchmark name")->required();
  pk->add_option("--n", n, "Samples per prompt");
  pk->add_option("--k", ks, "k values");

  // report
  std::string run_path;
  auto* rep = app.add_subcommand("report", "Print the tables of a run directory");
  rep->add_option("--run", run_path, "Run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto opt = driver_options(g);
    if (*gen) {
      auto spec = spec_from(config, g);
      if (g.seed) spec.corpus_seed = *g.seed;
      const auto suite = generate_task_suite(spec.corpus_seed, spec.counts, spec.vocab_size,
                                             spec.train.max_prompt_len);
      const fs::path dir = g.out;
      save_prompt_pool(dir / "open.jsonl", suite.open, suite.vocab);
      save_prompt_pool(dir / "in_domain.jsonl", suite.in_domain, suite.vocab);
      save_prompt_pool(dir / "transduce-train.jsonl", suite.transduce, suite.vocab);
      for (const auto& [name, pool] : suite.benchmarks)
        save_prompt_pool(dir / ("bench-" + name + ".jsonl"), pool, suite.vocab);
      write_file_atomic(dir / "vocab.json", nlohmann::json(suite.vocab.surfaces()).dump() + "\n");
      std::cout << "wrote " << (dir / "*.jsonl").string() << " (corpus seed " << spec.corpus_seed
                << ")\n";
    } else if (*audit) {
      const auto vocab = Vocabulary::standard(vocab_size);
      const auto pool = load_prompt_pool(pool_path, vocab);
      const auto rules = rules_path.empty() ? default_topic_rules() : load_topic_rules(rules_path);
      std::cout << "bucket,count,percent\n";
      for (const auto& b : topic_audit(pool, vocab, rules))
        std::cout << b.bucket << ',' << b.count << ',' << display1(b.percent) << '\n';
    } else if (*trm) {
      const auto spec = spec_from(config, g);
      const auto seed = spec.seeds.front();
      const auto suite = generate_task_suite(spec.corpus_seed, spec.counts, spec.vocab_size,
                                             spec.train.max_prompt_len);
      const auto pool = pool_path.empty() ? suite.open : load_prompt_pool(pool_path, suite.vocab);
      const RewardFeaturizer f(suite.vocab, spec.train.max_resp_len);
      const auto pairs =
          pairs_path.empty()
              ? synth_preferences(pool, suite.vocab, spec.train.max_resp_len, spec.pref_pairs,
                                  derive_seed(seed, {hash_string("pairs")}))
              : load_preferences(pairs_path, pool, suite.vocab);
      if (!save_pairs.empty()) save_preferences(save_pairs, pairs, suite.vocab);
      RmTrainReport report;
      const auto model = rm_train(f, pairs, spec.rm_lr, spec.rm_steps,
                                  derive_seed(seed, {hash_string("fit")}), &report);
      const fs::path out = fs::path(g.out) / "reward_model.json";
      fs::create_directories(out.parent_path());
      save_reward_model(out, f, model);
      std::cout << "pairs " << pairs.size() << ", final loss " << report.final_loss
                << ", accuracy " << report.accuracy << "\nwrote " << out.string() << '\n';
    } else if (*train) {
      print_runs(run_all_seeds(&run_train, "train", spec_from(config, g), opt));
    } else if (*two) {
      print_runs(run_all_seeds(&run_two_stage, "two-stage", spec_from(config, g), opt));
    } else if (*ablate) {
      print_runs(run_all_seeds(&run_ablation, "ablate", spec_from(config, g), opt));
    } else if (*sdata) {
      auto spec = spec_from(config, g);
      if (!sizes.empty()) spec.sizes = sizes;
      spec.validate();
      print_runs(run_all_seeds(&run_data_scaling, "sweep-data", spec, opt));
    } else if (*sep) {
      auto spec = spec_from(config, g);
      if (!epochs_list.empty()) spec.eval_epochs = epochs_list;
      spec.validate();
      print_runs(run_all_seeds(&run_epoch_sweep, "sweep-epochs", spec, opt));
    } else if (*ev || *pk) {
      auto spec = spec_from(config, g);
      const Lab lab(spec, spec.seeds.front(), g.threads);
      const auto policy = load_policy(checkpoint, lab.features());
      if (*ev) {
        const auto names = bench_list.empty() ? spec.benchmarks : bench_list;
        const auto base = lab.scores("base", lab.base(), names);
        std::cout << report_csv(aggregate_report(lab.scores("checkpoint", policy, names), base));
      } else {
        const int samples = n > 0 ? n : spec.pass_n;
        const auto kv = ks.empty() ? spec.pass_ks : ks;
        std::cout << pass_k_csv(pass_k_curve(lab.features(), policy, lab.benchmark(benchmark_name),
                                             samples, kv, g.threads));
      }
    } else if (*rep) {
      const auto r = load_run_record(run_path);
      std::cout << "# " << r.experiment << " seed " << r.seed << " hash " << r.config_hash << '\n'
                << comparison_table(r.reports) << '\n'
                << reports_csv(r.reports);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
