#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bifrac/runner.hpp"
#include "support.hpp"

using namespace bifrac;

namespace {

json base_doc() {
  return json::parse(R"({
    "exponents": {"n": 1, "alpha": 0.5, "p1": 2.5, "p2": 2.5},
    "grid": {"origin": [-2.0], "h": 0.0625, "M": 64},
    "fixtures": {
      "b": {"kind": "bump", "cx": 0.3, "radius": 1.0},
      "f": {"kind": "indicator", "cx": 0.5, "side": 1.0},
      "g": {"kind": "bump", "cx": -0.2, "radius": 0.8}
    }
  })");
}

std::string usage_message(const json& doc, const std::string& experiment) {
  try {
    parse_config(doc, experiment);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

void expect_unit_headers(const RunResult& r) {
  for (const auto& [name, table] : r.tables) {
    ASSERT_FALSE(table.columns.empty()) << name;
    for (const auto& col : table.columns) {
      if (col == "kind" || col == "class" || col == "j" || col == "k" || col == "m") continue;
      EXPECT_NE(col.find('['), std::string::npos) << name << ": " << col;
    }
    for (const auto& row : table.rows) EXPECT_EQ(row.size(), table.columns.size()) << name;
  }
}

}  // namespace

TEST(Config, ParsesTheDocumentedFields) {
  json doc = base_doc();
  doc["mode"] = "fft";
  doc["seed"] = 12;
  doc["budget_bytes"] = 1 << 20;
  const ExperimentConfig c = parse_config(doc, "apply");
  EXPECT_EQ(c.experiment, "apply");
  EXPECT_EQ(c.grid.dim, 1);
  EXPECT_EQ(c.grid.M, 64u);
  EXPECT_EQ(c.grid.origin[0], -2.0);
  EXPECT_EQ(c.mode, ApplyMode::fft);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(*c.budget, std::size_t{1} << 20);
  EXPECT_EQ(c.fixtures.at("b").kind, "bump");
  EXPECT_EQ(c.fixtures.at("b").get("radius", 0.0), 1.0);
}

TEST(Config, RejectsMalformedDocuments) {
  json doc = base_doc();
  doc.erase("grid");
  EXPECT_NE(usage_message(doc, "apply").find("missing 'grid'"), std::string::npos);
  doc = base_doc();
  doc["grid"]["M"] = 10.5;
  EXPECT_NE(usage_message(doc, "apply").find("grid.M"), std::string::npos);
  doc = base_doc();
  doc["mode"] = "quantum";
  EXPECT_NE(usage_message(doc, "apply").find("mode"), std::string::npos);
  doc = base_doc();
  doc["experiment"] = "bmo";
  EXPECT_NE(usage_message(doc, "apply").find("not 'apply'"), std::string::npos);
  doc = base_doc();
  doc["grid"]["origin"] = json::array({0.0, 1.0});
  EXPECT_NE(usage_message(doc, "apply").find("coordinates"), std::string::npos);
  EXPECT_NE(usage_message(base_doc(), "frobnicate").find("valid experiments: apply, commutator"), std::string::npos);
}

TEST(Config, InvalidExponentsRaiseHypothesisErrors) {
  json doc = base_doc();
  doc["exponents"]["alpha"] = 0.9;
  try {
    parse_config(doc, "apply");
    FAIL();
  } catch (const HypothesisError& e) {
    EXPECT_STREQ(e.what(), "requires α/n < 1/p₁ + 1/p₂");
  }
}

TEST(Config, LoadsFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "bifrac_runner_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "good.json") << base_doc().dump();
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  EXPECT_EQ(load_config(dir / "good.json", "apply").grid.M, 64u);
  EXPECT_THROW(load_config(dir / "bad.json", "apply"), UsageError);
  EXPECT_THROW(load_config(dir / "missing.json", "apply"), UsageError);
}

TEST(Fixtures, UnknownKindListsValidKinds) {
  const GridSpec g = testing_support::line(0.0, 1.0, 8);
  try {
    make_fixture(g, FixtureSpec{"wobble", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("valid: constant, bump, haar, sin"), std::string::npos);
  }
}

TEST(Fixtures, ShapesAndSeeds) {
  const GridSpec g = testing_support::line(-2.0, 2.0, 64);
  const auto bump = make_fixture(g, FixtureSpec{"bump", {{"cx", 0.0}, {"radius", 1.0}, {"amplitude", 2.0}}});
  EXPECT_NEAR(bump.max_abs(), 2.0, 0.01);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(g.node(i)[0]) >= 1.0) EXPECT_EQ(bump[i], 0.0);
  const FixtureSpec rnd{"random", {{"side", 2.0}}};
  const auto a = make_fixture(g, rnd, 5), b = make_fixture(g, rnd, 5), c = make_fixture(g, rnd, 6);
  bool differs = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    differs = differs || a[i] != c[i];
  }
  EXPECT_TRUE(differs);
  const auto haar = make_fixture(g, FixtureSpec{"haar", {{"cx", 0.0}, {"side", 2.0}}});
  EXPECT_EQ(haar[20], 1.0);
  EXPECT_EQ(haar[40], -1.0);
  EXPECT_EQ(haar[0], 0.0);
}

TEST(Run, ApplyAndCommutator) {
  const RunResult a = run_experiment(parse_config(base_doc(), "apply"));
  EXPECT_EQ(a.report["experiment"], "apply");
  EXPECT_GT(a.report["results"]["max_abs"].get<double>(), 0.0);
  expect_unit_headers(a);
  json doc = base_doc();
  doc["params"] = {{"slot", 2}};
  const RunResult c = run_experiment(parse_config(doc, "commutator"));
  EXPECT_EQ(c.report["results"]["slot"], 2);
  expect_unit_headers(c);
}

TEST(Run, FixtureMissingIsAUsageError) {
  json doc = base_doc();
  doc["fixtures"].erase("g");
  EXPECT_THROW(run_experiment(parse_config(doc, "apply")), UsageError);
}

TEST(Run, BudgetFromConfig) {
  json doc = base_doc();
  doc["mode"] = "fft";
  doc["budget_bytes"] = 1000;
  try {
    run_experiment(parse_config(doc, "apply"));
    set_budget_bytes(0);
    FAIL();
  } catch (const BudgetError& e) {
    set_budget_bytes(0);
    EXPECT_GT(e.required(), 1000u);
  }
}

TEST(Run, SchemeFromRatioBound) {
  json doc = base_doc();
  doc["grid"] = {{"origin", {-8.0}}, {"h", 0.00390625}, {"M", 4096}};
  doc["fixtures"]["b"] = {{"kind", "sin"}, {"frequency", 3.0}};
  doc["params"] = {{"scheme",
                    {{"kind", "shrinking"}, {"center", {0.0}}, {"d0", 1.0}, {"beta", 0.5}, {"gamma2", 10.0},
                     {"count", 2}, {"drift", {5.0}}}},
                   {"gamma1_grid", {2.5}},
                   {"gamma2_factors", {4.0}}};
  const RunResult r = run_experiment(parse_config(doc, "separation"));
  const json& res = r.report["results"];
  EXPECT_DOUBLE_EQ(res["scheme_ratio"].get<double>(), 0.0125);
  EXPECT_DOUBLE_EQ(res["cubes"][1]["center"][0].get<double>(), 5.0);
  EXPECT_EQ(res["distances"].size(), 2u);
  expect_unit_headers(r);
}

TEST(Run, ShippedConfigsParse) {
  const std::filesystem::path dir = BIFRAC_CONFIG_DIR;
  std::size_t seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(entry.path());
    const json doc = json::parse(in);
    EXPECT_NO_THROW(parse_config(doc, doc.at("experiment").get<std::string>())) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, experiment_names().size());
}

TEST(Run, SmallExperimentsProduceTables) {
  const std::filesystem::path dir = BIFRAC_CONFIG_DIR;
  for (const char* name : {"bmo", "weights", "lemma1", "truncation", "cmo"}) {
    const ExperimentConfig cfg = load_config(dir / (std::string(name) + ".json"), name);
    const RunResult r = run_experiment(cfg);
    EXPECT_FALSE(r.tables.empty()) << name;
    expect_unit_headers(r);
  }
}

TEST(Outputs, WritesReportTablesAndManifest) {
  const ExperimentConfig cfg = parse_config(base_doc(), "apply");
  const RunResult r = run_experiment(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "bifrac_runner_out";
  std::filesystem::remove_all(dir);
  const auto files = write_outputs(dir, cfg, r, "inline", 0.5, 1);
  EXPECT_EQ(files, (std::vector<std::string>{"report.json", "apply.csv", "manifest.json"}));
  std::ifstream m(dir / "manifest.json");
  const json manifest = json::parse(m);
  EXPECT_EQ(manifest["experiment"], "apply");
  EXPECT_EQ(manifest["version"], kVersion);
  EXPECT_EQ(manifest["outputs"], (json{"report.json", "apply.csv"}));
  std::ifstream csv(dir / "apply.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "x0 [length],I_alpha(f,g) [arb]");
}

TEST(Table, CsvLayout) {
  Table t;
  t.columns = {"a [1]", "b [length]"};
  t.add(1.5, std::size_t{3});
  t.add("x", 0.1);
  EXPECT_EQ(t.to_csv(), "a [1],b [length]\n1.5,3\nx,0.1\n");
}
