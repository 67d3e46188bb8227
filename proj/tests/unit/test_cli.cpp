#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rtrl/checkpoint.hpp"
#include "rtrl/cli.hpp"
#include "rtrl/config.hpp"
#include "rtrl/data.hpp"

using namespace rtrl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rtrl");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace

TEST_CASE("config text, precedence and validation") {
  auto c = Config::parse("# comment\nsteps = 12\n\norder=1   # trailing\n");
  CHECK(c.get("steps") == "12");
  CHECK(c.get("order") == "1");
  CHECK_THROWS_WITH_AS(Config::parse("bogus = 1"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_AS(Config::parse("no equals sign"), ConfigError);

  ::setenv("RTRL_STEPS", "30", 1);
  c.apply_env();
  ::unsetenv("RTRL_STEPS");
  CHECK(c.get("steps") == "30");
  c.set_assignment("steps=44");
  CHECK(to_run_config(c).steps == 44);

  c.set("top_p", "1.5");
  try {
    (void)to_run_config(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("top_p") != std::string::npos);
  }
  c.set("top_p", "0.9");
  c.set("order", "x");
  CHECK_THROWS_AS(to_run_config(c), ConfigError);

  const RunConfig d = to_run_config(Config{});
  const Config round = from_run_config(d);
  CHECK(from_run_config(to_run_config(round)).to_text() == round.to_text());
  CHECK(round.values().size() == config_keys().size());
}

TEST_CASE("gen-data") {
  TempDir t("rtrl_unit_gen");
  auto r = run({"gen-data", "--kind", "cipher", "--n", "1000", "--seed", "7", "--out", t / "a"});
  CHECK(r.code == 0);
  CHECK(lines(t / "a/x.jsonl") == 1000);
  CHECK(lines(t / "a/y.jsonl") == 1000);
  CHECK(run({"gen-data", "--kind", "cipher", "--n", "1000", "--seed", "7", "--out", t / "b"}).code == 0);
  for (const char* f : {"x.jsonl", "y.jsonl", "cipher.json"})
    CHECK(slurp(t / (std::string("a/") + f)) == slurp(t / (std::string("b/") + f)));
  CHECK(slurp(sidecar_path(t / "a/x.jsonl")) == slurp(sidecar_path(t / "b/x.jsonl")));

  r = run({"gen-data", "--kind", "cipher", "--out", t / "c"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage", 0) == 0);
  CHECK(r.err.find("--n") != std::string::npos);

  CHECK(run({"gen-data", "--kind", "reactions", "--n", "40", "--seed", "1", "--out", t / "r"}).code == 0);
  CHECK(lines(t / "r/reactions.jsonl") == 40);
  CHECK(run({"gen-data", "--kind", "nope", "--n", "4", "--out", t / "n"}).code == 1);
}

TEST_CASE("train, resume, eval and report") {
  TempDir t("rtrl_unit_train");
  REQUIRE(run({"gen-data", "--kind", "cipher", "--n", "200", "--seed", "2", "--alphabet", "6", "--max-len", "6",
               "--out", t / "data"})
              .code == 0);
  const std::string x = t / "data/x.jsonl";
  std::ofstream(t / "cfg.txt") << "train_path = " << x << "\neval_path = " << x
                               << "\norder = 0\nsteps = 6\ngroup_size = 4\ngroups_per_step = 4\nmax_len = 10\n"
                               << "sft_epochs = 40\nsft_batch = 400\nsft_lr = 4\n";

  auto r = run({"train", "--regime", "bogus", "--config", t / "cfg.txt", "--out", t / "bad"});
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown regime 'bogus'") != std::string::npos);

  // Supervised warm start on clean pairs yields an exact inverse pair.
  r = run({"train", "--regime", "sft", "--config", t / "cfg.txt", "--out", t / "ideal"});
  REQUIRE(r.code == 0);
  const std::string ideal = t / "ideal/checkpoints/final.json";
  r = run({"eval", "--checkpoint", ideal, "--data", x, "--mode", "roundtrip", "--out", t / "ev"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("exact_match=1 ", 0) == 0);
  const auto csv1 = slurp(t / "ev/roundtrip.csv");
  CHECK(run({"eval", "--checkpoint", ideal, "--data", x, "--mode", "roundtrip", "--out", t / "ev2"}).code == 0);
  CHECK(slurp(t / "ev2/roundtrip.csv") == csv1);

  const std::string unlabeled = t / "unlabeled.jsonl";
  save_jsonl(load_jsonl(x).without_labels(), unlabeled);
  r = run({"eval", "--checkpoint", ideal, "--data", unlabeled, "--mode", "task", "--out", t / "ev3"});
  CHECK(r.code == 1);
  CHECK(r.err.find("labeled") != std::string::npos);
  r = run({"eval", "--checkpoint", ideal, "--data", x, "--expect-vocab", "0000000000000000", "--out", t / "ev4"});
  CHECK(r.code == 1);
  CHECK(r.err.find("incompatible checkpoint") != std::string::npos);

  // RTRL from the warm start, then resume.
  r = run({"train", "--regime", "rtrl", "--config", t / "cfg.txt", "--set", "init_checkpoint=" + ideal, "--out",
           t / "run1"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(t / "run1/checkpoints/final.json"));
  CHECK(lines(t / "run1/steps.jsonl") == 6);
  const auto start = load_checkpoint(ideal).params.steps();
  CHECK(load_checkpoint(t / "run1/checkpoints/final.json").params.steps() == start + 6);
  r = run({"train", "--regime", "rtrl", "--config", t / "cfg.txt", "--resume", t / "run1/checkpoints/final.json",
           "--out", t / "run2"});
  REQUIRE(r.code == 0);
  CHECK(load_checkpoint(t / "run2/checkpoints/final.json").params.steps() == start + 12);
  const auto manifest = slurp(t / "run2/manifest.json");
  CHECK(manifest.find("\"status\": \"completed\"") != std::string::npos);
  CHECK(manifest.find("\"initial_steps\": " + std::to_string(start + 6)) != std::string::npos);

  r = run({"report", t / "run1", t / "run2"});
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
  CHECK(r.out.rfind("run,regime,final_steps,roundtrip.n,", 0) == 0);
  CHECK(run({"report", t / "run1", t / "run2"}).out == r.out);
  r = run({"report", t / "run1", t / "nowhere"});
  CHECK(r.code == 1);
  CHECK(r.err.find("nowhere") != std::string::npos);
}
