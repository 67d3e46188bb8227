#include "rtrl/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rtrl {

using nlohmann::json;

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

std::string serialize_checkpoint(const Vocab& vocab, const PolicyParams& params) {
  if (vocab.size() != params.vocab_size()) throw std::invalid_argument("checkpoint: vocab/params size mismatch");
  json j;
  j["format"] = "rtrl-checkpoint";
  j["version"] = kCheckpointVersion;
  j["order"] = params.order();
  j["steps"] = params.steps();
  j["vocab"] = vocab.ordinary_tokens();
  j["reserved"] = json::array({"<pad>", "<bos>", "<eos>", "<sep>"});
  j["tasks"] = vocab.task_names();
  j["vocab_fingerprint"] = fingerprint_hex(vocab.fingerprint());
  json rows = json::array();
  for (const auto& key : params.sorted_keys()) {
    json hist = json::array();
    for (int k = 0; k < params.order(); ++k) hist.push_back(key.history[static_cast<std::size_t>(k)]);
    rows.push_back(json::array({key.tag, key.aligned, hist, *params.find(key)}));
  }
  j["logits"] = std::move(rows);
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (j.value("format", "") != "rtrl-checkpoint") throw std::runtime_error("checkpoint: not an rtrl checkpoint");
  if (j.value("version", -1) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + j.value("version", json(-1)).dump());

  Vocab vocab = Vocab::build(j.at("vocab").get<std::vector<std::string>>(), j.at("tasks").get<std::vector<std::string>>());
  if (fingerprint_hex(vocab.fingerprint()) != j.at("vocab_fingerprint").get<std::string>())
    throw std::runtime_error("checkpoint: vocabulary fingerprint mismatch");

  const int order = j.at("order").get<int>();
  PolicyParams params(vocab, order);
  params.set_steps(j.at("steps").get<std::uint64_t>());
  const auto V = static_cast<TokenId>(vocab.size());
  for (const auto& row : j.at("logits")) {
    ContextKey key;
    key.tag = row.at(0).get<TokenId>();
    key.aligned = row.at(1).get<TokenId>();
    const auto& hist = row.at(2);
    if (hist.size() != static_cast<std::size_t>(order)) throw std::runtime_error("checkpoint: history width mismatch");
    for (std::size_t k = 0; k < hist.size(); ++k) key.history[k] = hist[k].get<TokenId>();
    if (key.tag < 0 || key.tag >= V || key.aligned < 0 || key.aligned >= V)
      throw std::runtime_error("checkpoint: context id out of range");
    auto values = row.at(3).get<std::vector<double>>();
    if (values.size() != vocab.size()) throw std::runtime_error("checkpoint: logit row width mismatch at " + to_string(key));
    for (double v : values)
      if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite logit at " + to_string(key));
    params.row(key) = std::move(values);
  }
  return Checkpoint{std::move(vocab), std::move(params)};
}

void save_checkpoint(const std::filesystem::path& path, const Vocab& vocab, const PolicyParams& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(vocab, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace rtrl
