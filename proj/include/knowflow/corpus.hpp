#pragma once

// Raw corpus parsing, entity canonicalization and geography assignment.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knowflow/common.hpp"

namespace knowflow::corpus {

struct RawAuthor {
  std::string surname;
  std::string given;
  std::optional<std::string> country;
  std::optional<std::string> region;
};

struct RawReference {
  std::optional<std::string> doi;
  std::string title;
  std::optional<int> year;
  std::vector<RawAuthor> authors;
};

struct RawRecord {
  std::string source_id;
  std::optional<std::string> doi;
  std::string title;
  std::optional<int> year;
  std::vector<RawAuthor> authors;
  std::vector<RawReference> references;
};

struct ParseError {
  std::size_t line;
  std::string message;
};

struct ParseResult {
  std::vector<RawRecord> records;
  std::vector<ParseError> errors;

  std::size_t skipped() const { return errors.size(); }
};

/// Reads newline-delimited JSON records. Malformed lines are skipped and
/// reported with their 1-based line number; blank lines are ignored.
ParseResult parse_corpus(std::istream& in);

/// Throws Error when the file cannot be opened.
ParseResult parse_corpus_file(const std::filesystem::path& path);

/// Throws Error with a field-specific message ("missing title") on bad input.
RawRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const RawRecord& record);

/// Keeps ASCII letters and spaces, uppercases, collapses whitespace runs and
/// trims. ASCII whitespace counts as a space. An empty result means the
/// title cannot take part in title matching.
std::string normalize_title(std::string_view raw);

struct AuthorKey {
  std::string canonical;

  auto operator<=>(const AuthorKey&) const = default;
};

inline constexpr char kAuthorKeySeparator = '|';

/// Uppercased surname, '|', then the uppercase letters of the given names.
/// Returns nullopt for an empty (or all-blank) surname.
std::optional<AuthorKey> canonical_author(std::string_view surname, std::string_view given_names);

enum class GeoStrategy { first_author, majority };

struct Geography {
  std::optional<std::string> country;
  std::optional<std::string> region;

  bool operator==(const Geography&) const = default;
};

/// Country and region are decided independently. `first_author` never falls
/// back to later authors; `majority` breaks ties by earliest position.
Geography assign_geography(std::span<const RawAuthor> authors, GeoStrategy strategy);

struct PaperRecord {
  PaperId paper_id = 0;
  std::optional<std::string> doi;
  std::string canonical_title;
  std::vector<AuthorKey> author_keys;  // sorted, unique
  std::optional<int> year;
  std::optional<std::string> country;
  std::optional<std::string> region;
  std::vector<PaperId> cited_ids;  // sorted, unique, never self

  bool operator==(const PaperRecord&) const = default;
};

struct ResolutionStats {
  std::size_t doi_matches = 0;
  std::size_t title_matches = 0;
  std::size_t new_entities = 0;
  std::size_t doi_conflicts = 0;
  std::size_t dropped_records = 0;     // parse failures, filled in by callers
  std::size_t dropped_references = 0;  // no DOI and unmatchable title
  std::size_t dropped_authors = 0;     // empty surname
  std::size_t inherited_years = 0;

  bool operator==(const ResolutionStats&) const = default;
};

struct Corpus {
  std::vector<PaperRecord> papers;  // indexed by paper_id
  std::map<AuthorKey, std::vector<PaperId>> author_index;
  ResolutionStats resolution_stats;

  std::size_t citation_count() const;
  void rebuild_author_index();
  /// Throws ContractViolation when an invariant does not hold.
  void validate() const;
};

/// Merges records and their reference entries into paper entities.
///
/// Two occurrences are the same paper when both carry a DOI and the DOIs
/// match case-insensitively; otherwise when their normalized titles match.
/// A DOI-less occurrence whose title matches several DOI entities joins the
/// one with the smallest DOI, so the partition does not depend on input
/// order. Metadata is taken from the first occurrence (all records precede
/// all reference entries); later occurrences only fill absent fields.
Corpus resolve_papers(std::span<const RawRecord> records,
                      GeoStrategy strategy = GeoStrategy::first_author);

/// Resolved corpus as JSONL: a header line, then one paper per line.
void write_corpus(const Corpus& corpus, std::ostream& out);
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::filesystem::path& path);

nlohmann::json resolution_report(const ResolutionStats& stats);

GeoStrategy parse_geo_strategy(std::string_view name);
std::string_view to_string(GeoStrategy strategy);

}  // namespace knowflow::corpus
