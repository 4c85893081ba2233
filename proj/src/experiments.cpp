#include "tlab/experiments.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/lab.hpp"
#include "tlab/rng.hpp"

namespace tlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string run_hash(const ExperimentSpec& spec, const std::string& kind, std::uint64_t seed) {
  auto j = to_json(spec);
  j.erase("seeds");
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    hash_string(kind + "\n" + std::to_string(seed) + "\n" + j.dump())));
  return buf;
}

fs::path run_dir(const DriverOptions& opt, const ExperimentSpec& spec, const std::string& kind,
                 std::uint64_t seed) {
  return opt.out / (spec.name + "-" + kind) / ("seed-" + std::to_string(seed));
}

std::string reports_json(const std::vector<EvalReport>& reports) {
  std::string out = "{\"reports\":[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto r = report_json(reports[i]);
    r.pop_back();  // trailing newline
    out += r + (i + 1 < reports.size() ? ",\n" : "\n");
  }
  return out + "]}\n";
}

std::vector<EvalReport> parse_reports_json(const std::string& text) {
  std::vector<EvalReport> out;
  try {
    const auto j = json::parse(text);
    for (const auto& r : j.at("reports")) out.push_back(parse_report_json(r.dump()));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report file: ") + e.what());
  }
  return out;
}

std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::string out = "system,benchmark,score,delta_vs_base,mean_len\n";
  for (const auto& r : reports) {
    std::istringstream in(report_csv(r));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) out += r.system + "," + line + "\n";
  }
  return out;
}

std::string comparison_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  std::string out = "system";
  for (const auto& row : reports.front().rows) out += "," + row.benchmark;
  out += ",average\n";
  for (const auto& r : reports) {
    out += r.system;
    for (const auto& row : r.rows) out += "," + display1(row.score);
    out += "," + display1(r.average) + "\n";
  }
  return out;
}

namespace {

json record_json(const RunRecord& r) {
  return {{"experiment", r.experiment}, {"kind", r.kind},
          {"seed", r.seed},             {"config_hash", r.config_hash},
          {"reports", "report.json"},   {"events", "events.jsonl"},
          {"checkpoints", r.checkpoints}};
}

class RunSession {
 public:
  RunSession(const ExperimentSpec& spec, std::string kind, std::uint64_t seed,
             const DriverOptions& opt)
      : opt_(opt), start_(std::chrono::steady_clock::now()) {
    spec.validate();
    rec_.experiment = spec.name + "-" + kind;
    rec_.kind = std::move(kind);
    rec_.seed = seed;
    rec_.config_hash = run_hash(spec, rec_.kind, seed);
    rec_.dir = run_dir(opt, spec, rec_.kind, seed);
    config_ = to_json(spec);
    config_["seed"] = seed;
    config_["kind"] = rec_.kind;
  }

  std::optional<RunRecord> cached() const {
    const auto path = rec_.dir / "run.json";
    if (opt_.force || !fs::exists(path)) return std::nullopt;
    auto r = load_run_record(rec_.dir);
    if (r.config_hash != rec_.config_hash) {
      throw ConfigError(rec_.dir.string() + " holds a run with a different config (hash " +
                        r.config_hash + "); use --force to overwrite");
    }
    r.cached = true;
    return r;
  }

  void begin() {
    if (opt_.force && fs::exists(rec_.dir / "checkpoints")) fs::remove_all(rec_.dir / "checkpoints");
    fs::create_directories(rec_.dir / "checkpoints");
    if (opt_.force) fs::remove(rec_.dir / "run.json");
    write_file_atomic(rec_.dir / "config.json", config_.dump(2) + "\n");
  }

  void events(const std::vector<EpochRecord>& log, const std::string& cell) {
    for (auto r : log) {
      if (r.stage.empty()) r.stage = cell;
      events_ += to_jsonl(r) + "\n";
    }
  }

  std::string checkpoint(const std::string& name, const FeatureSpec& spec,
                         const PolicyParams& params, const std::string& meta = "{}") {
    const auto rel = "checkpoints/" + name + ".json";
    save_policy(rec_.dir / rel, spec, params, meta);
    rec_.checkpoints.push_back(rel);
    return rel;
  }

  fs::path path(const std::string& rel) const { return rec_.dir / rel; }

  RunRecord finish(std::vector<EvalReport> reports) {
    rec_.reports = std::move(reports);
    write_file_atomic(rec_.dir / "events.jsonl", events_);
    write_file_atomic(rec_.dir / "report.json", reports_json(rec_.reports));
    write_file_atomic(rec_.dir / "report.csv", reports_csv(rec_.reports));
    write_file_atomic(rec_.dir / "table.csv", comparison_table(rec_.reports));
    // run.json last: its presence marks a complete run.
    write_file_atomic(rec_.dir / "run.json", record_json(rec_).dump(2) + "\n");
    if (opt_.progress) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
      *opt_.progress << rec_.experiment << " seed " << rec_.seed << ": " << dt.count() << " s\n";
    }
    return rec_;
  }

 private:
  const DriverOptions& opt_;
  std::chrono::steady_clock::time_point start_;
  RunRecord rec_;
  json config_;
  std::string events_;
};

TrainHooks eval_hooks(const Lab& lab, const std::vector<std::string>& names) {
  TrainHooks h;
  h.threads = lab.threads();
  h.evaluate = [&lab, names](const PolicyParams& p) { return lab.snapshot(p, names); };
  return h;
}

EvalReport report_for(const Lab& lab, const std::string& system, const PolicyParams& p,
                      const std::vector<std::string>& names, const SystemScores& base) {
  return aggregate_report(lab.scores(system, p, names), base);
}

}  // namespace

RunRecord load_run_record(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "run.json"));
  } catch (const json::exception& e) {
    throw DataError((dir / "run.json").string() + ": " + e.what());
  }
  RunRecord r;
  try {
    r.experiment = j.at("experiment").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.checkpoints = j.at("checkpoints").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError((dir / "run.json").string() + ": " + e.what());
  }
  r.dir = dir;
  r.reports = parse_reports_json(read_file(dir / "report.json"));
  return r;
}

RunRecord run_train(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt) {
  RunSession s(spec, "train", seed, opt);
  if (auto c = s.cached()) return *c;
  s.begin();
  const Lab lab(spec, seed, opt.threads);
  const auto base = lab.scores("base", lab.base(), spec.benchmarks);
  auto hooks = eval_hooks(lab, spec.benchmarks);
  const auto cfg = lab.train_config(spec.train, "train");
  hooks.on_epoch = [&](int e, const PolicyParams& p) {
    if (e == 0 || e % cfg.checkpoint_every == 0 || e == cfg.epochs)
      s.checkpoint("epoch-" + std::to_string(e), lab.features(), p);
  };
  const auto res = train_run(lab.features(), lab.base(), lab.pool(cfg.environment),
                             lab.reward_for(cfg.environment), cfg, hooks);
  s.events(res.log, "train");
  return s.finish({aggregate_report(base, base),
                   report_for(lab, spec.name, res.policy, spec.benchmarks, base)});
}

RunRecord run_ablation(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt) {
  RunSession s(spec, "ablate", seed, opt);
  if (auto c = s.cached()) return *c;
  s.begin();
  const Lab lab(spec, seed, opt.threads);
  const auto base = lab.scores("base", lab.base(), spec.benchmarks);
  std::vector<EvalReport> reports{aggregate_report(base, base)};
  struct Cell {
    const char* name;
    Algo algo;
    const char* environment;
  };
  // Every cell shares epochs, batch size, learning rates and seed set.
  for (const Cell& c : {Cell{"in-domain-PPO", Algo::ppo, "in_domain"},
                        Cell{"open-GRPO", Algo::grpo, "open"},
                        Cell{"open-PPO", Algo::ppo, "open"}}) {
    auto cfg = spec.train;
    cfg.algo = c.algo;
    cfg.environment = c.environment;
    cfg = lab.train_config(cfg, c.name);
    const auto res = train_run(lab.features(), lab.base(), lab.pool(cfg.environment),
                               lab.reward_for(cfg.environment), cfg, eval_hooks(lab, spec.benchmarks),
                               c.name);
    s.events(res.log, c.name);
    s.checkpoint(std::string(c.name) + "-final", lab.features(), res.policy);
    reports.push_back(report_for(lab, c.name, res.policy, spec.benchmarks, base));
  }
  return s.finish(std::move(reports));
}

RunRecord run_two_stage(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt) {
  RunSession s(spec, "two-stage", seed, opt);
  if (auto c = s.cached()) return *c;
  s.begin();
  const Lab lab(spec, seed, opt.threads);
  const auto& names = spec.stage2_benchmarks;
  const auto base = lab.scores("base", lab.base(), names);
  const auto cfg1 = lab.train_config(spec.train, "stage1");
  const auto cfg2 = lab.train_config(spec.stage2_config(), "stage2");
  const auto res = two_stage_run(lab.features(), lab.base(), lab.pool(cfg1.environment),
                                 lab.reward_for(cfg1.environment), cfg1,
                                 lab.pool(cfg2.environment), lab.reward_for(cfg2.environment),
                                 cfg2, eval_hooks(lab, names));
  s.events(res.log, "");
  s.checkpoint("stage1", lab.features(), res.stage1);
  s.checkpoint("stage2", lab.features(), res.stage2);
  return s.finish({aggregate_report(base, base), report_for(lab, "stage1", res.stage1, names, base),
                   report_for(lab, "stage2", res.stage2, names, base)});
}

RunRecord run_data_scaling(const ExperimentSpec& spec, std::uint64_t seed,
                           const DriverOptions& opt) {
  RunSession s(spec, "sweep-data", seed, opt);
  if (auto c = s.cached()) return *c;
  const Lab lab(spec, seed, opt.threads);
  const auto& full = lab.pool(spec.train.environment);
  for (int n : spec.sizes)
    if (static_cast<std::size_t>(n) > full.size())
      throw ConfigError("sizes: " + std::to_string(n) + " exceeds the " +
                        std::to_string(full.size()) + " prompts of pool '" + full.name + "'");
  s.begin();
  const auto base = lab.scores("base", lab.base(), spec.benchmarks);
  std::vector<EvalReport> reports{aggregate_report(base, base)};
  const int largest = spec.sizes.empty() ? 0 : spec.sizes.back();
  for (int n : spec.sizes) {
    const std::string name = "size-" + std::to_string(n);
    if (n == 0) {
      auto r = aggregate_report(base, base);
      r.system = name;
      reports.push_back(r);
      continue;
    }
    // Nested subsets: every size trains on a prefix of the same pool.
    const auto pool = full.prefix(static_cast<std::size_t>(n));
    // Every size gets the prompt budget of the largest one: smaller pools run
    // proportionally more epochs.
    auto cfg = lab.train_config(spec.train, name);
    cfg.epochs = (cfg.epochs * largest + n - 1) / n;
    const auto res = train_run(lab.features(), lab.base(), pool, lab.reward_for(cfg.environment),
                               cfg, eval_hooks(lab, spec.benchmarks), name);
    s.events(res.log, name);
    s.checkpoint(name, lab.features(), res.policy);
    reports.push_back(report_for(lab, name, res.policy, spec.benchmarks, base));
  }
  return s.finish(std::move(reports));
}

RunRecord run_epoch_sweep(const ExperimentSpec& spec, std::uint64_t seed,
                          const DriverOptions& opt) {
  for (int e : spec.eval_epochs)
    if (e > spec.train.epochs)
      throw ConfigError("eval_epochs: " + std::to_string(e) + " exceeds epochs (" +
                        std::to_string(spec.train.epochs) + ")");
  RunSession s(spec, "sweep-epochs", seed, opt);
  if (auto c = s.cached()) return *c;
  s.begin();
  const Lab lab(spec, seed, opt.threads);
  const auto base = lab.scores("base", lab.base(), spec.benchmarks);
  const auto cfg = lab.train_config(spec.train, "sweep");
  const std::set<int> wanted(spec.eval_epochs.begin(), spec.eval_epochs.end());
  std::map<int, std::string> saved;
  auto hooks = eval_hooks(lab, spec.benchmarks);
  hooks.on_epoch = [&](int e, const PolicyParams& p) {
    if (wanted.count(e) || e == cfg.epochs)
      saved[e] = s.checkpoint("epoch-" + std::to_string(e), lab.features(), p);
  };
  const auto res = train_run(lab.features(), lab.base(), lab.pool(cfg.environment),
                             lab.reward_for(cfg.environment), cfg, hooks);
  s.events(res.log, "sweep");
  std::vector<EvalReport> reports{aggregate_report(base, base)};
  // Reports come from the files on disk, not from the in-memory policies.
  for (int e : spec.eval_epochs) {
    auto it = saved.find(e);
    if (it == saved.end() || !fs::exists(s.path(it->second)))
      throw DataError("missing checkpoint for epoch " + std::to_string(e));
    const auto p = load_policy(s.path(it->second), lab.features());
    reports.push_back(report_for(lab, "epoch-" + std::to_string(e), p, spec.benchmarks, base));
  }
  return s.finish(std::move(reports));
}

std::vector<RunRecord> run_all_seeds(Driver driver, const std::string& kind,
                                     const ExperimentSpec& spec, const DriverOptions& opt) {
  spec.validate();
  std::vector<RunRecord> out;
  for (auto seed : spec.seeds) out.push_back(driver(spec, seed, opt));
  // Per-system mean over seeds.
  std::vector<EvalReport> mean = out.front().reports;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    for (std::size_t j = 0; j < mean[i].rows.size(); ++j) {
      double sum = 0, dsum = 0, lsum = 0;
      for (const auto& r : out) {
        sum += r.reports.at(i).rows.at(j).score;
        dsum += r.reports.at(i).rows.at(j).delta;
        lsum += r.reports.at(i).rows.at(j).mean_len;
      }
      const double n = static_cast<double>(out.size());
      mean[i].rows[j] = {mean[i].rows[j].benchmark, sum / n, dsum / n, lsum / n};
    }
    double a = 0, ad = 0;
    for (const auto& r : out) {
      a += r.reports.at(i).average;
      ad += r.reports.at(i).average_delta;
    }
    mean[i].average = a / static_cast<double>(out.size());
    mean[i].average_delta = ad / static_cast<double>(out.size());
  }
  const auto dir = opt.out / (spec.name + "-" + kind);
  write_file_atomic(dir / "summary.csv", comparison_table(mean));
  write_file_atomic(dir / "summary.json", reports_json(mean));
  return out;
}

}  // namespace tlab
