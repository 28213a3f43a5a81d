#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "knowflow/cli.hpp"

using namespace knowflow;
using namespace knowflow::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "knowflow");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

fs::path ingest_figure1(const fs::path& dir) {
  IngestOptions o;
  o.input = fixtures::data_path("figure1.jsonl");
  o.output = dir / "fig1.corpus";
  cmd_ingest(o);
  return o.output;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("run id depends on command, config and inputs only") {
    const auto dir = fixtures::scratch_dir("runid");
    std::ofstream(dir / "in.txt") << "hello";
    RunManifest a;
    a.command = "report";
    a.config = {{"d_max", 9}};
    a.add_input(dir / "in.txt");
    RunManifest b = a;
    b.timings.emplace_back("fit", 3.0);
    CHECK(a.run_id() == b.run_id());
    CHECK(a.run_id().size() == 16);
    b.config["d_max"] = 8;
    CHECK(a.run_id() != b.run_id());
    CHECK(a.to_json()["inputs"][0]["sha256"] == sha256_hex("hello"));
  }

  TEST_CASE("ingest figure 1") {
    const auto dir = fixtures::scratch_dir("ingest");
    IngestOptions o;
    o.input = fixtures::data_path("figure1.jsonl");
    o.output = dir / "fig1.corpus";
    o.stats = dir / "stats.json";
    o.manifest = dir / "manifest.json";
    const auto r = cmd_ingest(o);
    CHECK(r.papers == 5);
    CHECK(r.citations == 5);
    CHECK(r.skipped == 0);
    const auto stats = load(dir / "stats.json");
    CHECK(stats["papers"] == 5);
    CHECK(stats["citations"] == 5);
    const auto manifest = load(dir / "manifest.json");
    CHECK(manifest["command"] == "ingest");
    CHECK(manifest["inputs"][0]["sha256"] == sha256_file(o.input));
    CHECK(corpus::read_corpus_file(o.output).papers == fixtures::figure1().papers);
  }

  TEST_CASE("empty input gives an empty corpus, garbage is fatal") {
    const auto dir = fixtures::scratch_dir("empty");
    std::ofstream(dir / "empty.jsonl").close();
    IngestOptions o;
    o.input = dir / "empty.jsonl";
    o.output = dir / "empty.corpus";
    const auto r = cmd_ingest(o);
    CHECK(r.papers == 0);
    CHECK(corpus::read_corpus_file(o.output).papers.empty());
    std::ofstream(dir / "bad.jsonl") << "not json\n{\"also\": \n";
    o.input = dir / "bad.jsonl";
    CHECK_THROWS_AS(cmd_ingest(o), Error);
    CHECK(run_args({"ingest", (dir / "bad.jsonl").string(), (dir / "x.corpus").string()}) == 1);
  }

  TEST_CASE("pairs on figure 1") {
    const auto dir = fixtures::scratch_dir("pairs");
    PairsOptions o;
    o.corpus = ingest_figure1(dir);
    o.output = dir / "strict.csv";
    o.format = graph::ObservationFormat::csv;
    o.summary = dir / "summary.json";
    const auto s = cmd_pairs(o);
    CHECK(s.observations == 10);
    CHECK(s.flow_events == 3);
    CHECK(line_count(slurp(o.output)) == 11);
    CHECK(load(dir / "summary.json")["observations"] == 10);

    o.enumeration.flow_mode = graph::FlowMode::relaxed;
    o.format = graph::ObservationFormat::binary;
    o.output = dir / "relaxed.bin";
    const auto r = cmd_pairs(o);
    CHECK(r.observations == 10);
    CHECK(r.flow_events == 5);
    graph::ObservationReader reader(o.output);
    std::uint64_t n = 0, flows = 0;
    reader.for_each([&](const graph::PairObservation& obs) {
      ++n;
      flows += obs.flow ? 1 : 0;
    });
    CHECK(n == 10);
    CHECK(flows == 5);
  }

  TEST_CASE("corpus without years is fatal") {
    const auto dir = fixtures::scratch_dir("noyears");
    std::ofstream(dir / "in.jsonl") << R"({"doi": "10.1/a", "title": "A", "authors": [{"surname": "Ann", "given": "B"}]})"
                                    << "\n";
    IngestOptions i;
    i.input = dir / "in.jsonl";
    i.output = dir / "c.corpus";
    cmd_ingest(i);
    PairsOptions o;
    o.corpus = i.output;
    o.output = dir / "out.bin";
    CHECK_THROWS_AS(cmd_pairs(o), Error);
    CHECK(run_args({"pairs", i.output.string(), o.output.string()}) == 1);
  }

  TEST_CASE("report on a planted corpus") {
    const auto dir = fixtures::scratch_dir("report");
    SynthOptions s;
    s.params.n_papers = 1000;
    s.params.author_pool = 500;
    s.params.authors_mean = 3.0;
    s.params.planted = synth::PlantedLogit{-5.0, {4.0, 3.0, 2.0, 1.0}, 0.5, 0.0};
    s.seed = 3;
    s.output = dir / "synth.jsonl";
    cmd_synth(s);
    IngestOptions i;
    i.input = s.output;
    i.output = dir / "synth.corpus";
    cmd_ingest(i);
    PairsOptions p;
    p.corpus = i.output;
    p.output = dir / "pairs.bin";
    const auto summary = cmd_pairs(p);

    ReportOptions r;
    r.observations = p.output;
    r.output_dir = dir / "a";
    r.plan.seed = 5;
    r.d_max = 4;  // classes past 5 hold a handful of pairs and no flows
    const auto result = cmd_report(r);
    CHECK(result.observations == summary.observations);
    CHECK(result.successful_fits() >= 1);

    const auto models = load(r.output_dir / "models.json");
    CHECK(models["manifest"] == "manifest.json");
    const auto& all = models["cohorts"][0];
    REQUIRE(all["status"] == "ok");
    const auto& coef = all["model"]["coefficients"];
    for (int k = 1; k < 4; ++k) {
      CAPTURE(k);
      CHECK(coef["d" + std::to_string(k)].get<double>() > coef["d" + std::to_string(k + 1)].get<double>());
    }

    // histogram totals reconcile with the observation count
    const auto& h = result.histograms[0];
    CHECK(h.total() + h.excluded_zero == result.observations);

    const auto manifest = load(r.output_dir / "manifest.json");
    const std::string reference = "# run_id=" + result.run_id + " manifest=manifest.json";
    for (const char* name : {"histograms.csv", "coefficients.csv"}) {
      const auto text = slurp(r.output_dir / name);
      CHECK(text.substr(0, text.find('\n')) == reference);
    }
    CHECK(models["run_id"] == result.run_id);
    CHECK(manifest["counts"]["observations"] == result.observations);

    // rerun into a second directory: identical bytes
    r.output_dir = dir / "b";
    r.write_samples = true;
    cmd_report(r);
    for (const char* name : {"histograms.csv", "coefficients.csv", "models.json"}) {
      CAPTURE(name);
      CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    CHECK(fs::exists(dir / "b" / "samples" / "all.csv"));

    CHECK(run_args({"--seed", "5", "report", p.output.string(), (dir / "c").string(), "--d-max", "4"}) == 0);
    CHECK(slurp(dir / "a" / "coefficients.csv") == slurp(dir / "c" / "coefficients.csv"));
  }

  TEST_CASE("report without geography") {
    const auto dir = fixtures::scratch_dir("nogeo");
    SynthOptions s;
    s.params.n_papers = 300;
    s.params.author_pool = 150;
    s.params.citations_mean = 10.0;
    s.params.geo_probability = 0.0;
    s.output = dir / "synth.jsonl";
    cmd_synth(s);
    CHECK(run_args({"ingest", s.output.string(), (dir / "c.corpus").string()}) == 0);
    CHECK(run_args({"pairs", (dir / "c.corpus").string(), (dir / "p.bin").string(), "--summary",
                    (dir / "summary.json").string()}) == 0);
    ReportOptions r;
    r.observations = dir / "p.bin";
    r.output_dir = dir / "out";
    r.solver.ridge = 1e-3;  // sparse classes would otherwise separate
    const auto result = cmd_report(r);
    REQUIRE(result.histograms.size() == 5);
    CHECK(result.histograms[0].total() > 0);
    for (std::size_t i = 1; i < 5; ++i) CHECK(result.histograms[i].total() == 0);
    const auto models = load(r.output_dir / "models.json");
    CHECK(models["cohorts"][0]["status"] == "ok");
    for (std::size_t i = 1; i < 5; ++i) CHECK(models["cohorts"][i]["status"] == "degenerate_cohort");
  }

  TEST_CASE("report exit codes and argument errors") {
    const auto dir = fixtures::scratch_dir("exit");
    PairsOptions p;
    p.corpus = ingest_figure1(dir);
    p.output = dir / "fig1.bin";
    cmd_pairs(p);
    // every cohort of the five-paper fixture is degenerate or separated
    CHECK(run_args({"report", p.output.string(), (dir / "out").string()}) == 2);
    CHECK(fs::exists(dir / "out" / "models.json"));
    CHECK(run_args({"report", p.output.string(), (dir / "out").string(), "--d-max", "0"}) == 1);
    CHECK(run_args({"report", p.output.string(), (dir / "out").string(), "--beta", "lots"}) == 1);
    CHECK(run_args({"report", (dir / "missing.bin").string(), (dir / "out").string()}) != 0);
    CHECK(run_args({"frobnicate"}) != 0);
    CHECK(run_args({}) != 0);
  }

  TEST_CASE("config file supplies defaults, flags win") {
    const auto dir = fixtures::scratch_dir("config");
    const auto corpus = ingest_figure1(dir);
    std::ofstream(dir / "config.json") << R"({"flow_mode": "relaxed", "format": "csv"})";
    CHECK(run_args({"--config", (dir / "config.json").string(), "pairs", corpus.string(), (dir / "a.csv").string(),
                    "--summary", (dir / "a.json").string()}) == 0);
    CHECK(load(dir / "a.json")["flow_events"] == 5);
    CHECK(run_args({"--config", (dir / "config.json").string(), "pairs", corpus.string(), (dir / "b.csv").string(),
                    "--flow-mode", "strict", "--summary", (dir / "b.json").string()}) == 0);
    CHECK(load(dir / "b.json")["flow_events"] == 3);
    std::ofstream(dir / "broken.json") << R"({"max_depth": "deep"})";
    CHECK(run_args({"--config", (dir / "broken.json").string(), "pairs", corpus.string(),
                    (dir / "c.csv").string()}) == 1);
  }

  TEST_CASE("synth and verify commands") {
    const auto dir = fixtures::scratch_dir("synth");
    std::ofstream(dir / "params.json") << R"({"n_papers": 150, "citations_mean": 5, "author_pool": 80})";
    CHECK(run_args({"--seed", "4", "synth", (dir / "a.jsonl").string(), "--params", (dir / "params.json").string(),
                    "--stats", (dir / "stats.json").string()}) == 0);
    CHECK(run_args({"--seed", "4", "synth", (dir / "b.jsonl").string(), "--params",
                    (dir / "params.json").string()}) == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(line_count(slurp(dir / "a.jsonl")) == 150);
    const auto stats = load(dir / "stats.json");
    CHECK(stats["papers"] == 150);
    CHECK(stats["seed"] == 4);

    CHECK(run_args({"ingest", (dir / "a.jsonl").string(), (dir / "a.corpus").string()}) == 0);
    VerifyOptions v;
    v.corpus = dir / "a.corpus";
    const auto r = cmd_verify(v);
    CHECK(r.corpora == 1);
    CHECK(r.pairs > 0);
    CHECK(r.mismatches == 0);
    CHECK(run_args({"verify", "--corpora", "5"}) == 0);
  }
}
