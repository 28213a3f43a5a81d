#include "knowflow/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "knowflow/sample.hpp"

namespace knowflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw Error("sha256 final failed");
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
    return s.str();
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void write_json_file(const fs::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

std::string manifest_reference(const std::string& run_id) {
  return "# run_id=" + run_id + " manifest=manifest.json\n";
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Sha256 h;
  std::vector<char> buffer(1 << 20);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    h.update(buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

void RunManifest::add_input(const fs::path& path) { inputs.emplace_back(path.string(), sha256_file(path)); }

std::string RunManifest::run_id() const {
  json key = {{"command", command}, {"config", config}};
  for (const auto& [path, digest] : inputs) key["inputs"].push_back(digest);
  return sha256_hex(key.dump()).substr(0, 16);
}

json RunManifest::to_json() const {
  json j = {{"format", "knowflow-manifest"},
            {"version", 1},
            {"command", command},
            {"run_id", run_id()},
            {"config", config},
            {"inputs", json::array()},
            {"timings", json::object()},
            {"counts", counts}};
  for (const auto& [path, digest] : inputs) j["inputs"].push_back({{"path", path}, {"sha256", digest}});
  for (const auto& [stage, seconds] : timings) j["timings"][stage] = seconds;
  return j;
}

void RunManifest::write(const fs::path& path) const { write_json_file(path, to_json()); }

StageTimer::StageTimer(RunManifest& manifest, std::string stage)
    : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

StageTimer::~StageTimer() {
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  manifest_.timings.emplace_back(stage_, elapsed.count());
}

// ---------------------------------------------------------------------------
// ingest

json IngestResult::to_json() const {
  return {{"records", records},
          {"skipped", skipped},
          {"papers", papers},
          {"citations", citations},
          {"resolution", corpus::resolution_report(resolution)}};
}

IngestResult cmd_ingest(const IngestOptions& options) {
  RunManifest manifest;
  manifest.command = "ingest";
  manifest.config = {{"geo_strategy", corpus::to_string(options.geo)}};
  manifest.add_input(options.input);

  IngestResult result;
  corpus::ParseResult parsed;
  {
    StageTimer t(manifest, "parse");
    parsed = corpus::parse_corpus_file(options.input);
  }
  for (const auto& e : parsed.errors) spdlog::warn("skipped line {}: {}", e.line, e.message);
  result.records = parsed.records.size();
  result.skipped = parsed.skipped();
  if (result.records == 0 && result.skipped > 0) {
    throw Error("no parsable record in " + options.input.string() + " (" + std::to_string(result.skipped) +
                " lines skipped)");
  }
  if (result.records == 0) spdlog::warn("{} holds no records; writing an empty corpus", options.input.string());

  corpus::Corpus resolved;
  {
    StageTimer t(manifest, "resolve");
    resolved = corpus::resolve_papers(parsed.records, options.geo);
  }
  result.papers = resolved.papers.size();
  result.citations = resolved.citation_count();
  result.resolution = resolved.resolution_stats;

  {
    auto out = open_output(options.output);
    corpus::write_corpus(resolved, out);
    if (!out) throw Error("write failed: " + options.output.string());
  }
  manifest.counts = result.to_json();
  if (options.stats) write_json_file(*options.stats, result.to_json());
  if (options.manifest) manifest.write(*options.manifest);
  return result;
}

// ---------------------------------------------------------------------------
// pairs

graph::EnumerationSummary cmd_pairs(const PairsOptions& options) {
  RunManifest manifest;
  manifest.command = "pairs";
  manifest.config = {{"max_depth", options.enumeration.max_depth},
                     {"flow_mode", graph::to_string(options.enumeration.flow_mode)},
                     {"format", options.format == graph::ObservationFormat::binary ? "bin" : "csv"}};
  manifest.add_input(options.corpus);

  corpus::Corpus corpus;
  {
    StageTimer t(manifest, "load");
    corpus = corpus::read_corpus_file(options.corpus);
  }
  const bool any_year =
      std::any_of(corpus.papers.begin(), corpus.papers.end(), [](const auto& p) { return p.year.has_value(); });
  if (!corpus.papers.empty() && !any_year) throw Error("corpus has no publication years");

  graph::EnumerationSummary summary;
  {
    StageTimer t(manifest, "enumerate");
    graph::PairEnumerator enumerator(corpus, options.enumeration);
    const auto& table = enumerator.table();
    if (options.format == graph::ObservationFormat::binary) {
      graph::BinaryObservationWriter writer(options.output, table);
      summary = enumerator.run([&](const graph::ObservationBlock& b) { writer.write(b); });
      writer.finish();
    } else {
      auto out = open_output(options.output);
      graph::CsvObservationWriter writer(out);
      summary = enumerator.run([&](const graph::ObservationBlock& b) {
        graph::expand_block(table, b, [&](const graph::PairObservation& o) { writer.write(o); });
      });
      out.flush();
      if (!out) throw Error("write failed: " + options.output.string());
    }
  }
  manifest.counts = summary.to_json();
  if (options.summary) write_json_file(*options.summary, summary.to_json());
  if (options.manifest) manifest.write(*options.manifest);
  return summary;
}

// ---------------------------------------------------------------------------
// report

std::size_t ReportResult::successful_fits() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.model.has_value(); }));
}

ReportResult cmd_report(const ReportOptions& options) {
  graph::ObservationReader reader(options.observations);
  const int d_max = options.d_max;
  if (d_max < 1 || d_max > graph::kMaxSupportedDepth) throw Error("d_max out of range");
  if (reader.max_depth() && d_max > *reader.max_depth()) {
    spdlog::warn("d_max {} exceeds the observation horizon {}; distances beyond it are unobserved", d_max,
                 *reader.max_depth());
  }
  const int histogram_depth = reader.max_depth().value_or(d_max);

  RunManifest manifest;
  manifest.command = "report";
  manifest.config = {{"d_max", d_max},
                     {"max_depth", reader.max_depth() ? json(*reader.max_depth()) : json(nullptr)},
                     {"flow_mode", reader.flow_mode() ? json(graph::to_string(*reader.flow_mode())) : json(nullptr)},
                     {"sampling", options.plan.to_json()},
                     {"solver", options.solver.to_json()}};
  manifest.add_input(options.observations);
  const auto run_id = manifest.run_id();

  ReportResult result;
  result.run_id = run_id;
  for (auto c : graph::kAllCohorts) result.histograms.emplace_back(c, histogram_depth);

  bool first_pass = true;
  regress::ObservationSource source = [&](const std::function<void(const graph::PairObservation&)>& visit) {
    if (first_pass) {
      reader.for_each([&](const graph::PairObservation& o) {
        ++result.observations;
        for (auto& h : result.histograms) h.add(o);
        visit(o);
      });
      first_pass = false;
    } else {
      reader.for_each(visit);
    }
  };
  {
    StageTimer t(manifest, "sample_and_fit");
    result.outcomes = regress::cohort_suite(source, options.plan, d_max, options.solver);
  }

  fs::create_directories(options.output_dir);
  {
    auto out = open_output(options.output_dir / "histograms.csv");
    out << manifest_reference(run_id);
    graph::write_histograms_csv(result.histograms, out);
  }
  {
    auto out = open_output(options.output_dir / "coefficients.csv");
    out << manifest_reference(run_id);
    regress::write_coefficients_csv(result.outcomes, out);
  }

  json models = {{"run_id", run_id}, {"manifest", "manifest.json"}, {"d_max", d_max}, {"cohorts", json::array()}};
  json counts = {{"observations", result.observations}, {"cohorts", json::object()}};
  for (const auto& o : result.outcomes) {
    json entry = {{"cohort", o.spec.name()},
                  {"status", o.model ? std::string("ok") : std::string(regress::to_string(*o.failure))},
                  {"plan", o.plan.to_json()},
                  {"records_y1", o.counts.records_y1},
                  {"records_y0", o.counts.records_y0},
                  {"sampled_y1", o.counts.sampled_y1},
                  {"sampled_y0", o.counts.sampled_y0}};
    if (o.model) {
      entry["model"] = o.model->to_json();
    } else {
      entry["error"] = o.error;
    }
    counts["cohorts"][o.spec.name()] = {{"records", o.counts.records_y1 + o.counts.records_y0},
                                        {"sampled", o.counts.sampled_y1 + o.counts.sampled_y0}};
    models["cohorts"].push_back(std::move(entry));
  }
  write_json_file(options.output_dir / "models.json", models);

  if (options.write_samples) {
    StageTimer t(manifest, "write_samples");
    fs::create_directories(options.output_dir / "samples");
    for (const auto& o : result.outcomes) {
      if (!(o.plan.beta > 0.0)) continue;  // degenerate before sampling
      auto out = open_output(options.output_dir / "samples" / (o.spec.name() + ".csv"));
      out << manifest_reference(run_id);
      out << "x_id,y_id,eval_year,distance_class,flow,same_country,same_region,weight\n";
      const double w1 = 1.0 / o.plan.alpha, w0 = 1.0 / o.plan.beta;
      auto flag = [](const std::optional<bool>& f) { return f ? (*f ? 1 : 0) : -1; };
      reader.for_each([&](const graph::PairObservation& obs) {
        if (!o.spec.includes(obs) || obs.distance.is_finite(0) || !sample::keep(o.plan, obs)) return;
        out << obs.x_id << ',' << obs.y_id << ',' << obs.eval_year << ',' << obs.distance.class_code() << ','
            << (obs.flow ? 1 : 0) << ',' << flag(obs.same_country) << ',' << flag(obs.same_region) << ','
            << (obs.flow ? w1 : w0) << '\n';
      });
    }
  }

  manifest.counts = counts;
  manifest.write(options.output_dir / "manifest.json");
  return result;
}

// ---------------------------------------------------------------------------
// synth

synth::GeneratorStats cmd_synth(const SynthOptions& options) {
  auto generated = synth::generate(options.params, options.seed);
  {
    auto out = open_output(options.output);
    synth::write_jsonl(generated.records, out);
    if (!out) throw Error("write failed: " + options.output.string());
  }
  if (options.stats) {
    json stats = generated.stats.to_json();
    stats["params"] = options.params.to_json();
    stats["seed"] = options.seed;
    write_json_file(*options.stats, stats);
  }
  return generated.stats;
}

// ---------------------------------------------------------------------------
// verify

json VerifyResult::to_json() const {
  return {{"corpora", corpora}, {"pairs", pairs}, {"mismatches", mismatches}, {"examples", examples}};
}

std::vector<corpus::RawRecord> random_small_corpus(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int n = uniform(1, 200);
  const int pool = uniform(1, 50);
  const int years = uniform(1, 5);
  const int max_team = uniform(1, 4);
  const double citation_rate = std::uniform_real_distribution<double>(0.0, 0.1)(rng);
  const std::vector<std::string> countries = {"BR", "US", "FR"};

  std::vector<corpus::RawRecord> records(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& r = records[static_cast<std::size_t>(i)];
    r.source_id = "r" + std::to_string(i);
    r.doi = "10.1/v" + std::to_string(i);
    r.title = "Paper " + std::string(1, static_cast<char>('a' + i % 26)) +
              std::string(1, static_cast<char>('a' + (i / 26) % 26));
    if (uniform(0, 19) > 0) r.year = 2000 + uniform(0, years - 1);
    const int team = uniform(0, max_team);
    for (int k = 0; k < team; ++k) {
      const int a = uniform(0, pool - 1);
      corpus::RawAuthor author;
      author.surname = "Name" + std::string(1, static_cast<char>('a' + a % 26)) +
                       std::string(1, static_cast<char>('a' + a / 26));
      author.given = "J.";
      if (uniform(0, 3) > 0) author.country = countries[static_cast<std::size_t>(a % 3)];
      if (uniform(0, 3) > 0) author.region = "R" + std::to_string(a % 2);
      r.authors.push_back(std::move(author));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= citation_rate) continue;
      corpus::RawReference ref;
      ref.doi = records[static_cast<std::size_t>(j)].doi;
      ref.title = records[static_cast<std::size_t>(j)].title;
      records[static_cast<std::size_t>(i)].references.push_back(std::move(ref));
    }
  }
  return records;
}

namespace {

std::string describe(const graph::PairObservation& o) {
  std::ostringstream s;
  s << "year " << o.eval_year << " (" << o.x_id << ',' << o.y_id << ") d=" << o.distance.to_string()
    << " flow=" << o.flow;
  return s.str();
}

void compare_streams(const corpus::Corpus& corpus, int max_depth, VerifyResult& result) {
  for (auto mode : {graph::FlowMode::strict, graph::FlowMode::relaxed}) {
    graph::EnumerationOptions options;
    options.max_depth = max_depth;
    options.flow_mode = mode;
    auto fast = graph::collect_pairs(corpus, options);
    auto slow = synth::oracle_pairs(corpus, mode);
    for (auto& o : slow) {
      if (o.distance.is_finite() && o.distance.value() > max_depth) o.distance = graph::Distance::beyond_horizon(max_depth);
    }
    auto key = [](const graph::PairObservation& o) { return std::tuple(o.eval_year, o.x_id, o.y_id); };
    auto by_key = [&](const auto& a, const auto& b) { return key(a) < key(b); };
    std::sort(fast.begin(), fast.end(), by_key);
    std::sort(slow.begin(), slow.end(), by_key);
    result.pairs += slow.size();
    auto note = [&](const std::string& text) {
      ++result.mismatches;
      if (result.examples.size() < 10) result.examples.push_back(text);
    };
    if (fast.size() != slow.size()) {
      note("pair count " + std::to_string(fast.size()) + " vs oracle " + std::to_string(slow.size()));
      continue;
    }
    for (std::size_t i = 0; i < fast.size(); ++i) {
      if (!(fast[i] == slow[i])) note(describe(fast[i]) + " vs oracle " + describe(slow[i]));
    }
  }
}

}  // namespace

VerifyResult cmd_verify(const VerifyOptions& options) {
  VerifyResult result;
  if (options.corpus) {
    compare_streams(corpus::read_corpus_file(*options.corpus), options.max_depth, result);
    result.corpora = 1;
    return result;
  }
  for (std::size_t i = 0; i < options.corpora; ++i) {
    const auto records = random_small_corpus(mix64(options.seed + i));
    const auto corpus = corpus::resolve_papers(records);
    if (std::none_of(corpus.papers.begin(), corpus.papers.end(), [](const auto& p) { return p.year.has_value(); })) {
      continue;
    }
    compare_streams(corpus, options.max_depth, result);
    ++result.corpora;
  }
  return result;
}

// ---------------------------------------------------------------------------
// argv

namespace {

void configure_logging() {
  auto logger = spdlog::get("knowflow");
  if (!logger) logger = spdlog::stderr_color_mt("knowflow");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("KNOWFLOW_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

template <typename T>
void from_config(const json& config, const char* key, CLI::Option* option, T& target) {
  if (option && option->count() > 0) return;
  if (auto it = config.find(key); it != config.end()) {
    try {
      target = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

int run(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Knowledge flow detection over publication corpora", "knowflow"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  int threads = 0;
  std::string config_path;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for sampling and generation")->capture_default_str();
  auto* threads_opt = app.add_option("--threads", threads, "Worker thread cap (0: all cores)");
  app.add_option("--config", config_path, "JSON file with default option values")->check(CLI::ExistingFile);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Resolve a JSONL record dump into a corpus file");
  std::string ingest_in, ingest_out, ingest_stats, ingest_manifest, geo = "first_author";
  ingest->add_option("input", ingest_in, "JSONL records")->required()->check(CLI::ExistingFile);
  ingest->add_option("output", ingest_out, "Corpus file to write")->required();
  auto* geo_opt = ingest->add_option("--geo", geo, "first_author or majority")->capture_default_str();
  ingest->add_option("--stats", ingest_stats, "Write resolution stats JSON here");
  ingest->add_option("--manifest", ingest_manifest, "Write the run manifest here");

  // pairs
  auto* pairs = app.add_subcommand("pairs", "Enumerate contextualized pairs");
  std::string pairs_in, pairs_out, pairs_summary, pairs_manifest, flow_mode = "strict", format = "bin";
  int max_depth = 10;
  pairs->add_option("corpus", pairs_in, "Corpus file")->required()->check(CLI::ExistingFile);
  pairs->add_option("output", pairs_out, "Observation file to write")->required();
  auto* depth_opt = pairs->add_option("--max-depth", max_depth, "BFS horizon")->capture_default_str();
  auto* mode_opt = pairs->add_option("--flow-mode", flow_mode, "strict or relaxed")->capture_default_str();
  auto* format_opt = pairs->add_option("--format", format, "bin or csv")->capture_default_str();
  pairs->add_option("--summary", pairs_summary, "Write the summary JSON here (default: stdout)");
  pairs->add_option("--manifest", pairs_manifest, "Write the run manifest here");

  // report
  auto* report = app.add_subcommand("report", "Histograms and cohort regressions");
  std::string report_in, report_dir;
  double alpha = 1.0;
  std::string beta = "auto";
  int d_max = 9;
  double tolerance = 1e-8, ridge = 0.0;
  int max_iterations = 100;
  bool write_samples = false;
  report->add_option("observations", report_in, "Observation file")->required()->check(CLI::ExistingFile);
  report->add_option("output_dir", report_dir, "Directory for report files")->required();
  auto* alpha_opt = report->add_option("--alpha", alpha, "Sampling rate for flow pairs")->capture_default_str();
  auto* beta_opt = report->add_option("--beta", beta, "Sampling rate for non-flow pairs, or auto")->capture_default_str();
  auto* dmax_opt = report->add_option("--d-max", d_max, "Largest one-hot distance")->capture_default_str();
  auto* tol_opt = report->add_option("--tolerance", tolerance, "Gradient tolerance")->capture_default_str();
  auto* iter_opt = report->add_option("--max-iterations", max_iterations, "IRLS iteration cap")->capture_default_str();
  auto* ridge_opt = report->add_option("--ridge", ridge, "L2 penalty on non-intercept terms")->capture_default_str();
  report->add_flag("--write-samples", write_samples, "Also write the weighted samples");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic record dump");
  std::string synth_out, synth_params, synth_stats;
  std::size_t synth_papers = 0;
  synth_cmd->add_option("output", synth_out, "JSONL file to write")->required();
  synth_cmd->add_option("--params", synth_params, "Generator parameter JSON")->check(CLI::ExistingFile);
  synth_cmd->add_option("--papers", synth_papers, "Override the number of papers");
  synth_cmd->add_option("--stats", synth_stats, "Write generator stats JSON here");

  // verify
  auto* verify = app.add_subcommand("verify", "Check the pair stream against the brute-force oracle");
  std::string verify_corpus;
  std::size_t verify_count = 100;
  verify->add_option("--corpus", verify_corpus, "Corpus file (default: random corpora)")->check(CLI::ExistingFile);
  verify->add_option("--corpora", verify_count, "Number of random corpora")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    json config = json::object();
    if (!config_path.empty()) config = load_json_file(config_path);
    from_config(config, "seed", seed_opt, seed);
    from_config(config, "threads", threads_opt, threads);

    if (*ingest) {
      from_config(config, "geo_strategy", geo_opt, geo);
      IngestOptions o;
      o.input = ingest_in;
      o.output = ingest_out;
      o.geo = corpus::parse_geo_strategy(geo);
      if (!ingest_stats.empty()) o.stats = ingest_stats;
      if (!ingest_manifest.empty()) o.manifest = ingest_manifest;
      const auto r = cmd_ingest(o);
      std::cout << r.to_json().dump(2) << '\n';
      if (r.skipped > 0) std::cerr << "skipped " << r.skipped << " malformed lines\n";
      return 0;
    }
    if (*pairs) {
      from_config(config, "max_depth", depth_opt, max_depth);
      from_config(config, "flow_mode", mode_opt, flow_mode);
      from_config(config, "format", format_opt, format);
      PairsOptions o;
      o.corpus = pairs_in;
      o.output = pairs_out;
      o.format = graph::parse_observation_format(format);
      o.enumeration.max_depth = max_depth;
      o.enumeration.flow_mode = graph::parse_flow_mode(flow_mode);
      o.enumeration.threads = threads;
      if (!pairs_summary.empty()) o.summary = pairs_summary;
      if (!pairs_manifest.empty()) o.manifest = pairs_manifest;
      const auto summary = cmd_pairs(o);
      if (pairs_summary.empty()) std::cout << summary.to_json().dump(2) << '\n';
      return 0;
    }
    if (*report) {
      from_config(config, "alpha", alpha_opt, alpha);
      if (beta_opt->count() == 0 && config.contains("beta")) {
        beta = config["beta"].is_number() ? std::to_string(config["beta"].get<double>())
                                          : config["beta"].get<std::string>();
      }
      from_config(config, "d_max", dmax_opt, d_max);
      from_config(config, "tolerance", tol_opt, tolerance);
      from_config(config, "max_iterations", iter_opt, max_iterations);
      from_config(config, "ridge", ridge_opt, ridge);
      ReportOptions o;
      o.observations = report_in;
      o.output_dir = report_dir;
      o.plan.alpha = alpha;
      o.plan.seed = seed;
      if (beta != "auto") {
        try {
          o.plan.beta = std::stod(beta);
        } catch (const std::exception&) {
          throw Error("--beta must be a number or 'auto'");
        }
      }
      o.d_max = d_max;
      o.solver.tolerance = tolerance;
      o.solver.max_iterations = max_iterations;
      o.solver.ridge = ridge;
      o.write_samples = write_samples;
      const auto r = cmd_report(o);
      for (const auto& outcome : r.outcomes) {
        if (!outcome.model) std::cerr << outcome.spec.name() << ": " << outcome.error << '\n';
      }
      std::cout << "run " << r.run_id << ": " << r.successful_fits() << " of " << r.outcomes.size()
                << " cohort fits succeeded\n";
      return r.successful_fits() > 0 ? 0 : 2;
    }
    if (*synth_cmd) {
      SynthOptions o;
      json params = config.value("synth", json::object());
      if (!synth_params.empty()) params.update(load_json_file(synth_params));
      o.params = synth::GeneratorParams::from_json(params);
      if (synth_papers > 0) o.params.n_papers = synth_papers;
      o.seed = seed;
      o.output = synth_out;
      if (!synth_stats.empty()) o.stats = synth_stats;
      const auto stats = cmd_synth(o);
      std::cout << stats.to_json().dump(2) << '\n';
      return 0;
    }
    if (*verify) {
      VerifyOptions o;
      if (!verify_corpus.empty()) o.corpus = verify_corpus;
      o.corpora = verify_count;
      o.seed = seed;
      const auto r = cmd_verify(o);
      std::cout << r.to_json().dump(2) << '\n';
      return r.mismatches == 0 ? 0 : 1;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ContractViolation& e) {
    spdlog::critical("internal error: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace knowflow::cli
