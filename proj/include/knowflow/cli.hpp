#pragma once

// Pipeline commands. Each command is callable in-process with an options
// struct; run() maps argv onto them.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "knowflow/corpus.hpp"
#include "knowflow/graph.hpp"
#include "knowflow/observation_io.hpp"
#include "knowflow/regress.hpp"
#include "knowflow/synth.hpp"

namespace knowflow::cli {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Provenance record for one command invocation.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::pair<std::string, double>> timings;      // stage, seconds
  nlohmann::json counts = nlohmann::json::object();

  void add_input(const std::filesystem::path& path);
  /// Digest of command, config and input digests; stable across reruns.
  std::string run_id() const;
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string stage);
  ~StageTimer();

  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  RunManifest& manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

struct IngestOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  corpus::GeoStrategy geo = corpus::GeoStrategy::first_author;
  std::optional<std::filesystem::path> stats;
  std::optional<std::filesystem::path> manifest;
};

struct IngestResult {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::size_t papers = 0;
  std::size_t citations = 0;
  corpus::ResolutionStats resolution;

  nlohmann::json to_json() const;
};

/// Throws Error when the input cannot be read or no line parses.
IngestResult cmd_ingest(const IngestOptions& options);

struct PairsOptions {
  std::filesystem::path corpus;
  std::filesystem::path output;
  graph::ObservationFormat format = graph::ObservationFormat::binary;
  graph::EnumerationOptions enumeration;
  std::optional<std::filesystem::path> summary;
  std::optional<std::filesystem::path> manifest;
};

/// Throws Error for a non-empty corpus without publication years.
graph::EnumerationSummary cmd_pairs(const PairsOptions& options);

struct ReportOptions {
  std::filesystem::path observations;
  std::filesystem::path output_dir;
  regress::SuitePlan plan;
  int d_max = 9;
  regress::SolverConfig solver;
  bool write_samples = false;
};

struct ReportResult {
  std::string run_id;
  std::vector<graph::DistanceHistogram> histograms;
  std::vector<regress::CohortOutcome> outcomes;
  std::uint64_t observations = 0;

  std::size_t successful_fits() const;
};

/// Writes histograms.csv, coefficients.csv, models.json and manifest.json
/// into output_dir (created if missing).
ReportResult cmd_report(const ReportOptions& options);

struct SynthOptions {
  synth::GeneratorParams params;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  std::optional<std::filesystem::path> stats;
};

synth::GeneratorStats cmd_synth(const SynthOptions& options);

struct VerifyOptions {
  std::optional<std::filesystem::path> corpus;  // else random corpora
  std::size_t corpora = 100;
  std::uint64_t seed = 0;
  int max_depth = graph::kMaxSupportedDepth;
};

struct VerifyResult {
  std::size_t corpora = 0;
  std::uint64_t pairs = 0;
  std::uint64_t mismatches = 0;
  std::vector<std::string> examples;  // first few mismatches, human readable

  nlohmann::json to_json() const;
};

/// Compares the optimized pair stream against the oracle in both flow modes.
VerifyResult cmd_verify(const VerifyOptions& options);

/// Small random corpus for equivalence checks: at most 200 papers, 50
/// authors and 5 years.
std::vector<corpus::RawRecord> random_small_corpus(std::uint64_t seed);

/// Entry point for the knowflow executable. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace knowflow::cli
