#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "rtrl/chem/smiles.hpp"
#include "rtrl/data.hpp"
#include "rtrl/tasks.hpp"

using namespace rtrl;
namespace fs = std::filesystem;

TEST_CASE("jsonl parsing") {
  std::istringstream in("{\"input\":\"CCO\",\"output\":\"ethanol-like caption\"}\n");
  const auto d = parse_jsonl(in);
  REQUIRE(d.size() == 1);
  CHECK(d.labeled);
  CHECK(*d.records[0].output == "ethanol-like caption");
  std::istringstream un("{\"input\":\"CCO\"}\n\n{\"input\":\"CC\",\"meta\":{\"k\":\"v\"}}\n");
  const auto u = parse_jsonl(un);
  CHECK(u.size() == 2);
  CHECK_FALSE(u.labeled);
  CHECK(u.records[1].meta.at("k") == "v");
  std::istringstream missing("{\"output\":\"x\"}\n");
  try {
    (void)parse_jsonl(missing);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 1);
  }
  std::istringstream broken("{\"input\":\"a\"}\n{oops\n");
  CHECK_THROWS_WITH_AS(parse_jsonl(broken), doctest::Contains("line 2"), DataError);
  std::istringstream mixed("{\"input\":\"a\",\"output\":\"b\"}\n{\"input\":\"c\"}\n");
  CHECK_THROWS(parse_jsonl(mixed));
}

TEST_CASE("jsonl save and load round trip") {
  const auto task = gen_cipher_task(3, 50, 8, 8);
  Dataset d = task.x;
  d.records[0].meta["note"] = "caf\xc3\xa9";
  const auto path = fs::temp_directory_path() / "rtrl_unit_roundtrip.jsonl";
  save_jsonl(d, path);
  CHECK(fs::exists(sidecar_path(path)));
  const auto back = load_jsonl(path);
  CHECK(back == d);
  fs::remove(path);
  fs::remove(sidecar_path(path));
}

TEST_CASE("split") {
  Dataset d;
  for (int i = 0; i < 100; ++i) d.records.push_back({std::to_string(i), std::nullopt, {}});
  const auto s = split(d, {0.8, 0.1, 0.1}, 4);
  CHECK(s.train.size() == 80);
  CHECK(s.valid.size() == 10);
  CHECK(s.test.size() == 10);
  const auto again = split(d, {0.8, 0.1, 0.1}, 4);
  CHECK(again.train == s.train);
  std::set<std::string> all;
  for (const auto* part : {&s.train, &s.valid, &s.test})
    for (const auto& r : part->records) CHECK(all.insert(r.input).second);
  CHECK(all.size() == 100);
  CHECK_THROWS(split(d, {0.5, 0.1, 0.1}, 4));
  CHECK_THROWS(split(d, {1.2, -0.1, -0.1}, 4));
  CHECK(take(d, 5).size() == 5);
  CHECK(take(d, 500).size() == 100);
}

TEST_CASE("cipher generator") {
  const auto t = gen_cipher_task(7, 300, 16, 12);
  CHECK(t.alphabet.size() == 16);
  std::set<std::string> inputs;
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    const auto& r = t.x.records[i];
    CHECK(inputs.insert(r.input).second);
    CHECK(r.input.size() >= 4);
    CHECK(r.input.size() <= 12);
    CHECK(*r.output == t.encode(r.input));
    CHECK(t.decode(*r.output) == r.input);
    CHECK(t.y.records[i].input == *r.output);
    CHECK(*t.y.records[i].output == r.input);
  }
  for (std::size_t i = 0; i < t.sigma.size(); ++i) CHECK(t.sigma[i] != static_cast<int>(i));
  CHECK(gen_cipher_task(7, 300, 16, 12).x == t.x);
  CHECK_THROWS(gen_cipher_task(7, 10, 3, 12));
  CHECK_THROWS(gen_cipher_task(7, 10, 8, 3));
}

TEST_CASE("label noise") {
  const auto t = gen_cipher_task(2, 400, 16, 12);
  NoiseConfig n;
  n.append = 0.5;
  const auto noisy = corrupt_outputs(t.x, t.alphabet, n, 9);
  int grown = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto& clean = *t.x.records[i].output;
    const auto& got = *noisy.records[i].output;
    CHECK(got.compare(0, clean.size(), clean) == 0);
    CHECK(got.size() <= clean.size() + 2);
    grown += got.size() > clean.size();
  }
  CHECK(grown > 150);
  CHECK(grown < 250);
  NoiseConfig none;
  CHECK(corrupt_outputs(t.x, t.alphabet, none, 9) == t.x);
  CHECK(corrupt_outputs(t.x, t.alphabet, n, 9) == noisy);
}

TEST_CASE("reaction templates and generator") {
  CHECK(apply_template(ReactionTemplate::Esterification, {"CCO", "CC(=O)O"}) ==
        chem::canonical_smiles(chem::parse_smiles("CC(=O)OCC")));
  CHECK(apply_template(ReactionTemplate::HalideToAlcohol, {"CCBr", "O"}) ==
        chem::canonical_smiles(chem::parse_smiles("CCO")));
  CHECK(apply_template(ReactionTemplate::Hydrogenation, {"C=CC", "[H][H]"}) ==
        chem::canonical_smiles(chem::parse_smiles("CCC")));
  CHECK_FALSE(apply_template(ReactionTemplate::Hydrogenation, {"CCC", "[H][H]"}).has_value());

  const auto d = gen_toy_reactions(5, 120, default_templates());
  CHECK(d.labeled);
  std::set<std::string> inputs;
  for (const auto& r : d.records) {
    CHECK(inputs.insert(r.input).second);
    CHECK(chem::count_components(*r.output) == 1);
    CHECK(chem::count_components(r.input) >= 1);
    CHECK(r.meta.count("template") == 1);
  }
  CHECK(gen_toy_reactions(5, 120, default_templates()) == d);
  CHECK(parse_reaction_template("esterification") == ReactionTemplate::Esterification);
}

TEST_CASE("task pairs") {
  for (const auto& name : task_pair_presets()) {
    const auto p = task_pair_preset(name);
    CHECK(p.forward != p.backward);
    CHECK(p.swapped().swapped() == p);
    CHECK(p.swapped().forward == p.backward);
  }
  const auto pair = task_pair_preset("reaction");
  const auto v = build_task_vocab(pair, {"CCCl.O"}, {"CCO"});
  CHECK(v.find("Cl").has_value());
  CHECK_NOTHROW(pair.validate(v));
  CHECK_THROWS(task_pair_preset("cipher").validate(v));
  CHECK_THROWS(task_pair_preset("nope"));
}
