#include "rtrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rtrl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string env_name(const std::string& key) {
  std::string out = "RTRL_";
  for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

bool known(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; });
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"task", "task preset: cipher, reaction, caption"},
      {"train_path", "JSONL source records"},
      {"unpaired_path", "JSONL target-side records (iterative regime)"},
      {"eval_path", "JSONL held-out labeled records"},
      {"init_checkpoint", "starting checkpoint; empty = uniform policy over the data vocabulary"},
      {"order", "output history length of the tabular policy (0-4)"},
      {"steps", "GRPO steps per phase"},
      {"max_len", "generation length cap"},
      {"seed", "master seed"},
      {"threads", "rollout worker threads"},
      {"eval_every", "evaluation cadence in steps (0 = end only)"},
      {"checkpoint_every", "checkpoint cadence in steps (0 = end only)"},
      {"eval_decoding", "greedy or sample"},
      {"group_size", "completions per input"},
      {"clip_eps", "ratio clip"},
      {"kl_beta", "KL weight"},
      {"eps_norm", "advantage normalization epsilon"},
      {"learning_rate", "logit step size"},
      {"inner_epochs", "updates per rollout batch"},
      {"groups_per_step", "inputs per optimization step"},
      {"kl_reference", "old (per-step snapshot) or initial (phase start)"},
      {"temperature", "sampling temperature"},
      {"top_k", "top-k cut"},
      {"top_p", "nucleus mass"},
      {"alpha", "format reward weight; auto = 2 ln V"},
      {"length_normalize", "divide the reconstruction log-likelihood by |x| + 1"},
      {"copy_guard", "outputs equal to the input fail the format check"},
      {"iterations", "phases of the iterative regime"},
      {"start_direction", "forward or backward"},
      {"early_stop", "stop when held-out consistency stops improving"},
      {"patience", "phases without improvement before stopping"},
      {"metric_weight", "weight of the auxiliary metric reward (supervised)"},
      {"supervised_subset", "labeled records used by the supervised regime (0 = all)"},
      {"sft_epochs", "SFT epochs (warm start and baselines)"},
      {"sft_batch", "SFT mini-batch size"},
      {"sft_lr", "SFT step size"},
      {"selfplay_rounds", "self-play rounds"},
  };
  return keys;
}

Config Config::parse(std::string_view text) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("<line " + std::to_string(lineno) + ">", "expected key = value");
    c.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::apply_env() {
  for (const auto& [key, _] : config_keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) values_[key] = v;
  }
}

void Config::set(const std::string& key, std::string value) {
  if (!known(key)) throw ConfigError(key, "unknown key");
  values_[key] = std::move(value);
}

void Config::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError(std::string(assignment), "expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "not set");
  return it->second;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

namespace {

class Reader {
 public:
  explicit Reader(const Config& c) : c_(c) {}

  template <typename T>
  void integer(const char* key, T& out) {
    if (!c_.has(key)) return;
    const auto& s = c_.get(key);
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key, "expected an integer, got '" + s + "'");
    out = v;
  }

  void real(const char* key, double& out) {
    if (!c_.has(key)) return;
    const auto& s = c_.get(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
      throw ConfigError(key, "expected a number, got '" + s + "'");
    out = v;
  }

  void boolean(const char* key, bool& out) {
    if (!c_.has(key)) return;
    const auto& s = c_.get(key);
    if (s == "true" || s == "1" || s == "yes") out = true;
    else if (s == "false" || s == "0" || s == "no") out = false;
    else throw ConfigError(key, "expected true or false, got '" + s + "'");
  }

  void string(const char* key, std::string& out) {
    if (c_.has(key)) out = c_.get(key);
  }

 private:
  const Config& c_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig to_run_config(const Config& c) {
  for (const auto& [k, _] : c.values())
    if (!known(k)) throw ConfigError(k, "unknown key");
  RunConfig rc;
  Reader r(c);
  r.string("task", rc.task);
  r.string("train_path", rc.train_path);
  r.string("unpaired_path", rc.unpaired_path);
  r.string("eval_path", rc.eval_path);
  r.string("init_checkpoint", rc.init_checkpoint);
  r.integer("order", rc.order);
  r.integer("steps", rc.steps);
  r.integer("max_len", rc.max_len);
  r.integer("seed", rc.seed);
  r.integer("threads", rc.threads);
  r.integer("eval_every", rc.eval_every);
  r.integer("checkpoint_every", rc.checkpoint_every);
  if (c.has("eval_decoding")) {
    const auto& s = c.get("eval_decoding");
    if (s != "greedy" && s != "sample") throw ConfigError("eval_decoding", "expected greedy or sample, got '" + s + "'");
    rc.eval_greedy = s == "greedy";
  }
  r.integer("group_size", rc.grpo.group_size);
  r.real("clip_eps", rc.grpo.clip_eps);
  r.real("kl_beta", rc.grpo.kl_beta);
  r.real("eps_norm", rc.grpo.eps_norm);
  r.real("learning_rate", rc.grpo.learning_rate);
  r.integer("inner_epochs", rc.grpo.inner_epochs);
  r.integer("groups_per_step", rc.grpo.groups_per_step);
  if (c.has("kl_reference")) {
    const auto& s = c.get("kl_reference");
    if (s == "old") rc.grpo.kl_reference = KlReference::Old;
    else if (s == "initial") rc.grpo.kl_reference = KlReference::Initial;
    else throw ConfigError("kl_reference", "expected old or initial, got '" + s + "'");
  }
  r.real("temperature", rc.sampler.temperature);
  r.integer("top_k", rc.sampler.top_k);
  r.real("top_p", rc.sampler.top_p);
  if (c.has("alpha") && c.get("alpha") != "auto") r.real("alpha", rc.reward.alpha);
  r.boolean("length_normalize", rc.reward.length_normalize);
  r.boolean("copy_guard", rc.reward.copy_guard);
  r.integer("iterations", rc.schedule.iterations);
  if (c.has("start_direction")) {
    const auto& s = c.get("start_direction");
    if (s != "forward" && s != "backward")
      throw ConfigError("start_direction", "expected forward or backward, got '" + s + "'");
    rc.schedule.start_forward = s == "forward";
  }
  r.boolean("early_stop", rc.schedule.early_stop);
  r.integer("patience", rc.schedule.patience);
  r.real("metric_weight", rc.metric_weight);
  r.integer("supervised_subset", rc.supervised_subset);
  r.integer("sft_epochs", rc.sft_epochs);
  r.integer("sft_batch", rc.sft_batch);
  r.real("sft_lr", rc.sft_lr);
  r.integer("selfplay_rounds", rc.selfplay_rounds);
  rc.sampler.seed = rc.seed;
  try {
    rc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("<validation>", e.what());
  }
  return rc;
}

Config from_run_config(const RunConfig& rc) {
  Config c;
  c.set("task", rc.task);
  c.set("train_path", rc.train_path);
  c.set("unpaired_path", rc.unpaired_path);
  c.set("eval_path", rc.eval_path);
  c.set("init_checkpoint", rc.init_checkpoint);
  c.set("order", std::to_string(rc.order));
  c.set("steps", std::to_string(rc.steps));
  c.set("max_len", std::to_string(rc.max_len));
  c.set("seed", std::to_string(rc.seed));
  c.set("threads", std::to_string(rc.threads));
  c.set("eval_every", std::to_string(rc.eval_every));
  c.set("checkpoint_every", std::to_string(rc.checkpoint_every));
  c.set("eval_decoding", rc.eval_greedy ? "greedy" : "sample");
  c.set("group_size", std::to_string(rc.grpo.group_size));
  c.set("clip_eps", fmt(rc.grpo.clip_eps));
  c.set("kl_beta", fmt(rc.grpo.kl_beta));
  c.set("eps_norm", fmt(rc.grpo.eps_norm));
  c.set("learning_rate", fmt(rc.grpo.learning_rate));
  c.set("inner_epochs", std::to_string(rc.grpo.inner_epochs));
  c.set("groups_per_step", std::to_string(rc.grpo.groups_per_step));
  c.set("kl_reference", rc.grpo.kl_reference == KlReference::Old ? "old" : "initial");
  c.set("temperature", fmt(rc.sampler.temperature));
  c.set("top_k", std::to_string(rc.sampler.top_k));
  c.set("top_p", fmt(rc.sampler.top_p));
  c.set("alpha", rc.reward.alpha < 0.0 ? "auto" : fmt(rc.reward.alpha));
  c.set("length_normalize", rc.reward.length_normalize ? "true" : "false");
  c.set("copy_guard", rc.reward.copy_guard ? "true" : "false");
  c.set("iterations", std::to_string(rc.schedule.iterations));
  c.set("start_direction", rc.schedule.start_forward ? "forward" : "backward");
  c.set("early_stop", rc.schedule.early_stop ? "true" : "false");
  c.set("patience", std::to_string(rc.schedule.patience));
  c.set("metric_weight", fmt(rc.metric_weight));
  c.set("supervised_subset", std::to_string(rc.supervised_subset));
  c.set("sft_epochs", std::to_string(rc.sft_epochs));
  c.set("sft_batch", std::to_string(rc.sft_batch));
  c.set("sft_lr", fmt(rc.sft_lr));
  c.set("selfplay_rounds", std::to_string(rc.selfplay_rounds));
  return c;
}

}  // namespace rtrl
