#include "rtrl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rtrl/checkpoint.hpp"
#include "rtrl/config.hpp"
#include "rtrl/data.hpp"
#include "rtrl/tasks.hpp"
#include "rtrl/train.hpp"

namespace fs = std::filesystem;

namespace rtrl {

const std::vector<std::string>& train_regimes() {
  static const std::vector<std::string> r = {"rtrl",       "iterative",   "supervised", "selfplay", "em",
                                             "sft-syn-out", "sft-syn-in", "sft"};
  return r;
}

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CliError("cannot write " + p.string());
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError("missing file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fingerprint_hex(h);
}

void write_report(const fs::path& dir, const std::string& name, const metrics::MetricsReport& r) {
  write_file(dir / (name + ".json"), r.to_json() + "\n");
  write_file(dir / (name + ".csv"), r.csv_header() + "\n" + r.csv_row() + "\n");
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs {
  std::string kind = "cipher";
  std::optional<std::size_t> n;
  std::uint64_t seed = 0;
  std::string out;
  int alphabet = 16;
  int max_len = 12;
  int min_len = 4;
  std::vector<std::string> templates;
};

void cmd_gen_data(const GenArgs& a, std::ostream& out) {
  if (!a.n) throw CliError("gen-data: --n is required");
  const fs::path dir(a.out);
  if (a.kind == "cipher") {
    const auto task = gen_cipher_task(a.seed, *a.n, a.alphabet, a.max_len, a.min_len);
    save_jsonl(task.x, dir / "x.jsonl");
    save_jsonl(task.y, dir / "y.jsonl");
    nlohmann::ordered_json j;
    j["alphabet"] = task.alphabet;
    j["sigma"] = task.sigma;
    j["seed"] = a.seed;
    write_file(dir / "cipher.json", j.dump(2) + "\n");
    out << "wrote " << task.x.size() << " records to " << (dir / "x.jsonl").string() << " and "
        << (dir / "y.jsonl").string() << "\n";
  } else if (a.kind == "reactions") {
    std::vector<ReactionTemplate> ts;
    for (const auto& t : a.templates) ts.push_back(parse_reaction_template(t));
    if (ts.empty()) ts = default_templates();
    const auto d = gen_toy_reactions(a.seed, *a.n, ts);
    save_jsonl(d, dir / "reactions.jsonl");
    out << "wrote " << d.size() << " records to " << (dir / "reactions.jsonl").string() << "\n";
  } else {
    throw CliError("gen-data: unknown kind '" + a.kind + "' (cipher, reactions)");
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string regime;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::string resume;
};

Dataset load_typed(const std::string& path, DomainKind source, DomainKind target) {
  if (path.empty()) throw CliError("dataset path not configured");
  if (!fs::exists(path)) throw CliError("dataset not found: " + path);
  Dataset d = load_jsonl(path);
  if (!fs::exists(sidecar_path(path))) {
    d.source = source;
    d.target = target;
  }
  return d;
}

struct Eval {
  const Vocab& vocab;
  TaskPair pair;
  SamplerConfig sampler;
  std::size_t max_len;
  std::optional<Dataset> data;

  std::map<std::string, metrics::MetricsReport> run(const PolicyParams& theta) const {
    std::map<std::string, metrics::MetricsReport> out;
    if (!data) return out;
    out["roundtrip"] = roundtrip_eval(theta, vocab, *data, pair, sampler, max_len);
    if (data->labeled) {
      out["task_forward"] = task_eval(theta, vocab, *data, pair, sampler, max_len);
      out["task_backward"] = task_eval(theta, vocab, data->swapped(), pair.swapped(), sampler, max_len);
    }
    return out;
  }
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto& regimes = train_regimes();
  if (std::find(regimes.begin(), regimes.end(), a.regime) == regimes.end())
    throw CliError("train: unknown regime '" + a.regime + "'");

  Config cfg_text = a.config.empty() ? Config{} : Config::load(a.config);
  cfg_text.apply_env();
  for (const auto& s : a.sets) cfg_text.set_assignment(s);
  const RunConfig cfg = to_run_config(cfg_text);
  const TaskPair pair = task_pair_preset(cfg.task);

  // Datasets.
  std::optional<Dataset> train, unpaired, held;
  if (!cfg.train_path.empty()) train = load_typed(cfg.train_path, pair.source, pair.target);
  if (!cfg.unpaired_path.empty()) unpaired = load_typed(cfg.unpaired_path, pair.target, pair.source);
  if (!cfg.eval_path.empty()) held = load_typed(cfg.eval_path, pair.source, pair.target);
  const bool needs_train = a.regime != "sft-syn-in";
  if (needs_train && !train) throw CliError("train: regime '" + a.regime + "' needs train_path");
  if ((a.regime == "iterative" || a.regime == "sft-syn-in") && !unpaired)
    throw CliError("train: regime '" + a.regime + "' needs unpaired_path");

  // Policy and vocabulary.
  std::optional<Checkpoint> start;
  const std::string init = a.resume.empty() ? cfg.init_checkpoint : a.resume;
  if (!init.empty()) {
    start = load_checkpoint(init);
  } else {
    std::vector<std::string> src, tgt;
    auto add = [](std::vector<std::string>& to, const std::vector<std::string>& from) {
      to.insert(to.end(), from.begin(), from.end());
    };
    for (const auto* d : {&train, &held}) {
      if (!*d) continue;
      add(src, (*d)->inputs());
      if ((*d)->labeled) add(tgt, (*d)->outputs());
    }
    if (unpaired) {
      add(tgt, unpaired->inputs());
      if (unpaired->labeled) add(src, unpaired->outputs());
    }
    Vocab v = build_task_vocab(pair, src, tgt);
    PolicyParams p(v, cfg.order);
    start = Checkpoint{std::move(v), std::move(p)};
  }
  const Vocab& vocab = start->vocab;
  PolicyParams theta = start->params;
  pair.validate(vocab);

  // Run directory and manifest (written before training starts).
  const fs::path dir(a.out);
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "reports");
  const std::string resolved = from_run_config(cfg).to_text();
  write_file(dir / "config.txt", resolved);
  nlohmann::ordered_json manifest;
  manifest["run_id"] = hex_hash(a.regime + "\n" + resolved + "\n" + init);
  manifest["regime"] = a.regime;
  manifest["seed"] = cfg.seed;
  manifest["config"] = from_run_config(cfg).values();
  manifest["resumed_from"] = a.resume;
  manifest["initial_steps"] = theta.steps();
  manifest["vocab_fingerprint"] = fingerprint_hex(vocab.fingerprint());
  manifest["artifacts"] = {{"config", "config.txt"},
                           {"step_log", "steps.jsonl"},
                           {"checkpoint", "checkpoints/final.json"},
                           {"reports", "reports"}};
  manifest["status"] = "running";
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::ofstream steps_log(dir / "steps.jsonl", std::ios::binary);
  const Eval eval{vocab, pair, cfg.eval_greedy ? SamplerConfig::greedy(cfg.seed) : cfg.sampler, cfg.max_len, held};

  TrainHooks hooks;
  hooks.on_step = [&](const StepStats& s, std::string_view phase) {
    const std::string line = s.to_json_line();
    steps_log << "{\"phase\":" << nlohmann::json(std::string(phase)).dump() << "," << line.substr(1) << "\n";
    steps_log.flush();
  };
  hooks.on_eval = [&](const PolicyParams& p, std::string_view) {
    for (const auto& [name, r] : eval.run(p))
      write_report(dir / "reports", "step-" + std::to_string(p.steps()) + "-" + name, r);
  };
  hooks.on_checkpoint = [&](const PolicyParams& p) {
    save_checkpoint(dir / "checkpoints" / ("step-" + std::to_string(p.steps()) + ".json"), vocab, p);
  };
  hooks.on_synthetic = [&](std::string_view name, const Dataset& d) {
    save_jsonl(d, dir / "synthetic" / (std::string(name) + ".jsonl"));
  };
  hooks.log = [&](std::string_view msg) { out << msg << "\n"; };
  const TrainContext ctx{vocab, pair, cfg, hooks};

  nlohmann::ordered_json extra;
  if (a.regime == "rtrl") {
    rtrl_train(theta, *train, ctx);
  } else if (a.regime == "iterative") {
    std::function<double(const PolicyParams&)> score;
    if (held) {
      score = [&](const PolicyParams& p) {
        const auto fwd = roundtrip_eval(p, vocab, *held, pair, eval.sampler, cfg.max_len);
        if (!held->labeled) return fwd.get("exact_match");
        const auto bwd = roundtrip_eval(p, vocab, held->swapped(), pair.swapped(), eval.sampler, cfg.max_len);
        return 0.5 * (fwd.get("exact_match") + bwd.get("exact_match"));
      };
    }
    const auto r = iterative_rtrl(theta, *train, *unpaired, ctx, score);
    extra["phases_run"] = r.phases_run;
    extra["heldout_scores"] = r.heldout_scores;
  } else if (a.regime == "supervised") {
    supervised_rtrl(theta, *train, ctx);
  } else if (a.regime == "selfplay") {
    const auto r = selfplay_rtrl(theta, *train, ctx);
    extra["survival_rates"] = r.survival_rates;
  } else if (a.regime == "em") {
    em_train(theta, *train, ctx);
  } else if (a.regime == "sft-syn-out") {
    sft_synthetic_output(theta, *train, ctx);
  } else if (a.regime == "sft-syn-in") {
    sft_synthetic_input(theta, *unpaired, ctx);
  } else if (a.regime == "sft") {
    if (!train->labeled) throw CliError("train: regime 'sft' needs labeled train_path records");
    const auto ex = bidirectional_examples(vocab, *train, pair);
    sft_train(theta, ex, cfg.sft_epochs, cfg.sft_batch, cfg.sft_lr, cfg.seed);
  }
  steps_log.close();

  save_checkpoint(dir / "checkpoints" / "final.json", vocab, theta);
  for (const auto& [name, r] : eval.run(theta)) write_report(dir / "reports", name, r);
  manifest["final_steps"] = theta.steps();
  if (!extra.empty()) manifest["result"] = extra;
  manifest["status"] = "completed";
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  out << "run " << manifest["run_id"].get<std::string>() << " completed at step " << theta.steps() << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string task = "cipher";
  std::string mode = "roundtrip";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t max_len = 32;
  std::string decoding = "greedy";
  std::string expect_vocab;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.mode != "task" && a.mode != "roundtrip") throw CliError("eval: mode must be task or roundtrip");
  if (a.decoding != "greedy" && a.decoding != "sample") throw CliError("eval: decoding must be greedy or sample");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const std::string fp = fingerprint_hex(ck.vocab.fingerprint());
  if (!a.expect_vocab.empty() && a.expect_vocab != fp)
    throw CliError("eval: incompatible checkpoint (vocab hash mismatch: expected " + a.expect_vocab + ", found " + fp +
                   ")");
  const TaskPair pair = task_pair_preset(a.task);
  try {
    pair.validate(ck.vocab);
  } catch (const std::invalid_argument& e) {
    throw CliError(std::string("eval: incompatible checkpoint (") + e.what() + ")");
  }
  const Dataset d = load_typed(a.data, pair.source, pair.target);
  SamplerConfig sampler = a.decoding == "greedy" ? SamplerConfig::greedy(a.seed) : SamplerConfig{};
  sampler.seed = a.seed;
  metrics::MetricsReport r;
  try {
    if (a.mode == "task") {
      if (!d.labeled) throw CliError("eval: task mode needs labeled records");
      r = task_eval(ck.params, ck.vocab, d, pair, sampler, a.max_len);
    } else {
      r = roundtrip_eval(ck.params, ck.vocab, d, pair, sampler, a.max_len);
    }
  } catch (const TokenizeError& e) {
    throw CliError(std::string("eval: dataset does not fit the checkpoint vocabulary: ") + e.what());
  }
  write_report(a.out, a.mode, r);
  out << "exact_match=" << (r.has("exact_match") ? r.get("exact_match") : 0.0) << " n=" << r.n << "\n";
}

// ---------------------------------------------------------------------------
// report

std::string cmd_report(const std::vector<std::string>& runs) {
  if (runs.empty()) throw CliError("report: need at least one run directory");
  static const std::vector<std::string> kFiles = {"roundtrip", "task_forward", "task_backward"};
  std::vector<std::string> columns;
  std::vector<std::map<std::string, std::string>> rows;
  auto add_col = [&](const std::string& c) {
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
  };
  for (const auto& run : runs) {
    const fs::path dir(run);
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw CliError("report: missing manifest.json in " + run);
    const auto manifest = nlohmann::json::parse(read_file(mpath));
    std::map<std::string, std::string> row;
    row["run"] = run;
    row["regime"] = manifest.value("regime", "");
    row["final_steps"] = std::to_string(manifest.value("final_steps", std::uint64_t{0}));
    bool any = false;
    for (const auto& f : kFiles) {
      const fs::path p = dir / "reports" / (f + ".json");
      if (!fs::exists(p)) continue;
      any = true;
      const auto r = metrics::MetricsReport::from_json(read_file(p));
      std::ostringstream n;
      n << r.n;
      add_col(f + ".n");
      row[f + ".n"] = n.str();
      for (const auto& [k, v] : r.values()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        add_col(f + "." + k);
        row[f + "." + k] = buf;
      }
    }
    if (!any) throw CliError("report: missing report files in " + run + "/reports");
    rows.push_back(std::move(row));
  }
  std::string csv = "run,regime,final_steps";
  for (const auto& c : columns) csv += "," + c;
  csv += "\n";
  for (auto& row : rows) {
    csv += row["run"] + "," + row["regime"] + "," + row["final_steps"];
    for (const auto& c : columns) csv += "," + (row.count(c) ? row[c] : std::string());
    csv += "\n";
  }
  return csv;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Round-trip reinforcement learning toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  std::size_t gen_n = 0;
  auto* g = app.add_subcommand("gen-data", "Generate toy datasets (JSONL + metadata sidecar)");
  g->add_option("--kind", gen.kind, "cipher or reactions")->capture_default_str();
  auto* n_opt = g->add_option("--n", gen_n, "number of records")->required();
  g->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--alphabet", gen.alphabet, "cipher alphabet size")->capture_default_str();
  g->add_option("--max-len", gen.max_len, "cipher maximum string length")->capture_default_str();
  g->add_option("--min-len", gen.min_len, "cipher minimum string length")->capture_default_str();
  g->add_option("--templates", gen.templates, "reaction templates (halide_alcohol, esterification, hydrogenation)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train in one regime and write a run directory");
  t->add_option("--regime", tr.regime, "rtrl, iterative, supervised, selfplay, em, sft-syn-out, sft-syn-in, sft")
      ->required();
  t->add_option("--config", tr.config, "flat key = value config file");
  t->add_option("--out", tr.out, "run directory")->required();
  t->add_option("--set", tr.sets, "override a config key (key=value), repeatable");
  t->add_option("--resume", tr.resume, "checkpoint to continue from (step count carries over)");
  t->footer("Config precedence: defaults < file < RTRL_<KEY> environment < --set.");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--data", ev.data, "JSONL dataset")->required();
  e->add_option("--task", ev.task, "task preset")->capture_default_str();
  e->add_option("--mode", ev.mode, "task or roundtrip")->capture_default_str();
  e->add_option("--out", ev.out, "output directory")->required();
  e->add_option("--seed", ev.seed, "decoding seed")->capture_default_str();
  e->add_option("--max-len", ev.max_len, "generation length cap")->capture_default_str();
  e->add_option("--decoding", ev.decoding, "greedy or sample")->capture_default_str();
  e->add_option("--expect-vocab", ev.expect_vocab, "required vocabulary fingerprint (hex)");

  std::vector<std::string> runs;
  std::string report_out;
  auto* r = app.add_subcommand("report", "Merge final reports of run directories into one CSV");
  r->add_option("runs", runs, "run directories")->required();
  r->add_option("--out", report_out, "CSV path (default: stdout)");

  std::vector<std::string> argv_store(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_store.begin(), argv_store.end());
  try {
    app.parse(argv_store);
  } catch (const CLI::CallForHelp& pe) {
    return app.exit(pe, out, err);
  } catch (const CLI::CallForAllHelp& pe) {
    return app.exit(pe, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "error: usage: " << one_line(pe.what()) << "\n";
    return 2;
  }

  try {
    if (g->parsed()) {
      if (n_opt->count() > 0) gen.n = gen_n;
      cmd_gen_data(gen, out);
    } else if (t->parsed()) {
      cmd_train(tr, out);
    } else if (e->parsed()) {
      cmd_eval(ev, out);
    } else if (r->parsed()) {
      const std::string csv = cmd_report(runs);
      if (report_out.empty())
        out << csv;
      else
        write_file(report_out, csv);
    }
  } catch (const std::exception& ex) {
    err << "error: " << one_line(ex.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rtrl
