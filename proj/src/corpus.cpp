#include "knowflow/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "unicode.hpp"

namespace knowflow::corpus {

using nlohmann::json;

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<std::string> optional_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(std::string("invalid ") + field);
  return it->get<std::string>();
}

std::optional<int> optional_year(const json& j) {
  auto it = j.find("year");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw Error("invalid year");
  return it->get<int>();
}

std::vector<RawAuthor> authors_from_json(const json& j) {
  std::vector<RawAuthor> authors;
  auto it = j.find("authors");
  if (it == j.end() || it->is_null()) return authors;
  if (!it->is_array()) throw Error("invalid authors");
  authors.reserve(it->size());
  for (const auto& a : *it) {
    if (!a.is_object()) throw Error("invalid author");
    RawAuthor author;
    author.surname = optional_string(a, "surname").value_or("");
    author.given = optional_string(a, "given").value_or("");
    author.country = optional_string(a, "country");
    author.region = optional_string(a, "region");
    authors.push_back(std::move(author));
  }
  return authors;
}

json authors_to_json(const std::vector<RawAuthor>& authors) {
  json out = json::array();
  for (const auto& a : authors) {
    out.push_back({{"surname", a.surname},
                   {"given", a.given},
                   {"country", a.country ? json(*a.country) : json(nullptr)},
                   {"region", a.region ? json(*a.region) : json(nullptr)}});
  }
  return out;
}

template <typename T>
json nullable(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<std::string> normalize_doi(const std::optional<std::string>& doi) {
  if (!doi) return std::nullopt;
  std::string out(trim(*doi));
  if (out.empty()) return std::nullopt;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// One mention of a paper: a top-level record or one of its reference entries.
struct Occurrence {
  std::optional<std::string> doi;  // normalized
  std::string title;               // normalized
  std::optional<int> year;
  const std::vector<RawAuthor>* authors;
  const std::optional<std::string>* raw_doi;
  std::size_t citing_record = SIZE_MAX;  // record index for reference entries
};

std::vector<AuthorKey> author_keys_of(const std::vector<RawAuthor>& authors,
                                      std::size_t& dropped) {
  std::vector<AuthorKey> keys;
  keys.reserve(authors.size());
  for (const auto& a : authors) {
    if (auto key = canonical_author(a.surname, a.given)) {
      keys.push_back(std::move(*key));
    } else {
      ++dropped;
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

}  // namespace

RawRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error("record is not an object");
  RawRecord record;
  record.source_id = optional_string(j, "id").value_or("");
  record.doi = optional_string(j, "doi");
  auto title = optional_string(j, "title");
  if (!title) throw Error("missing title");
  if (trim(*title).empty()) throw Error("empty title");
  record.title = std::move(*title);
  record.year = optional_year(j);
  record.authors = authors_from_json(j);

  if (auto it = j.find("references"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw Error("invalid references");
    record.references.reserve(it->size());
    for (const auto& r : *it) {
      if (!r.is_object()) throw Error("invalid reference");
      RawReference ref;
      ref.doi = optional_string(r, "doi");
      ref.title = optional_string(r, "title").value_or("");
      ref.year = optional_year(r);
      ref.authors = authors_from_json(r);
      record.references.push_back(std::move(ref));
    }
  }
  return record;
}

json record_to_json(const RawRecord& record) {
  json refs = json::array();
  for (const auto& r : record.references) {
    refs.push_back({{"doi", nullable(r.doi)},
                    {"title", r.title},
                    {"year", nullable(r.year)},
                    {"authors", authors_to_json(r.authors)}});
  }
  return {{"id", record.source_id},
          {"doi", nullable(record.doi)},
          {"title", record.title},
          {"year", nullable(record.year)},
          {"authors", authors_to_json(record.authors)},
          {"references", std::move(refs)}};
}

ParseResult parse_corpus(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      result.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      result.errors.push_back({line_no, "malformed json @ line " + std::to_string(line_no)});
    } catch (const Error& e) {
      result.errors.push_back({line_no, std::string(e.what()) + " @ line " + std::to_string(line_no)});
    }
  }
  if (in.bad()) throw Error("read error after line " + std::to_string(line_no));
  return result;
}

ParseResult parse_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

std::string normalize_title(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
    } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c & ~0x20));
    }
  }
  return out;
}

std::optional<AuthorKey> canonical_author(std::string_view surname, std::string_view given_names) {
  std::string clean;
  for (char c : trim(surname)) {
    if (c != kAuthorKeySeparator) clean.push_back(c);
  }
  if (trim(clean).empty()) return std::nullopt;
  AuthorKey key;
  key.canonical = detail::utf8_to_upper(trim(clean));
  key.canonical.push_back(kAuthorKeySeparator);
  key.canonical += detail::utf8_uppercase_letters(given_names);
  return key;
}

Geography assign_geography(std::span<const RawAuthor> authors, GeoStrategy strategy) {
  Geography geo;
  if (authors.empty()) return geo;
  if (strategy == GeoStrategy::first_author) {
    geo.country = authors.front().country;
    geo.region = authors.front().region;
    return geo;
  }
  auto majority = [&](auto field) -> std::optional<std::string> {
    // value -> (count, first position)
    std::map<std::string, std::pair<int, std::size_t>> tally;
    for (std::size_t i = 0; i < authors.size(); ++i) {
      const auto& v = authors[i].*field;
      if (!v) continue;
      auto [it, inserted] = tally.try_emplace(*v, 0, i);
      ++it->second.first;
    }
    const std::string* best = nullptr;
    std::pair<int, std::size_t> best_score{0, 0};
    for (const auto& [value, score] : tally) {
      if (!best || score.first > best_score.first ||
          (score.first == best_score.first && score.second < best_score.second)) {
        best = &value;
        best_score = score;
      }
    }
    return best ? std::optional<std::string>(*best) : std::nullopt;
  };
  geo.country = majority(&RawAuthor::country);
  geo.region = majority(&RawAuthor::region);
  return geo;
}

std::size_t Corpus::citation_count() const {
  std::size_t n = 0;
  for (const auto& p : papers) n += p.cited_ids.size();
  return n;
}

void Corpus::rebuild_author_index() {
  author_index.clear();
  for (const auto& p : papers) {
    for (const auto& k : p.author_keys) author_index[k].push_back(p.paper_id);
  }
}

void Corpus::validate() const {
  for (std::size_t i = 0; i < papers.size(); ++i) {
    const auto& p = papers[i];
    if (p.paper_id != i) throw ContractViolation("paper_id does not match its index");
    if (!std::is_sorted(p.cited_ids.begin(), p.cited_ids.end()) ||
        std::adjacent_find(p.cited_ids.begin(), p.cited_ids.end()) != p.cited_ids.end()) {
      throw ContractViolation("cited_ids not sorted and unique");
    }
    for (PaperId c : p.cited_ids) {
      if (c == p.paper_id) throw ContractViolation("self citation");
      if (c >= papers.size()) throw ContractViolation("dangling citation");
    }
    if (!std::is_sorted(p.author_keys.begin(), p.author_keys.end())) {
      throw ContractViolation("author keys not sorted");
    }
    for (const auto& k : p.author_keys) {
      auto it = author_index.find(k);
      if (it == author_index.end() ||
          !std::binary_search(it->second.begin(), it->second.end(), p.paper_id)) {
        throw ContractViolation("author_index misses " + k.canonical);
      }
    }
  }
  for (const auto& [key, ids] : author_index) {
    for (PaperId id : ids) {
      if (id >= papers.size() ||
          !std::binary_search(papers[id].author_keys.begin(), papers[id].author_keys.end(), key)) {
        throw ContractViolation("author_index has stale entry for " + key.canonical);
      }
    }
  }
}

Corpus resolve_papers(std::span<const RawRecord> records, GeoStrategy strategy) {
  std::vector<Occurrence> occurrences;
  for (const auto& r : records) {
    occurrences.push_back({normalize_doi(r.doi), normalize_title(r.title), r.year, &r.authors,
                           &r.doi});
  }
  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    for (const auto& ref : records[ri].references) {
      occurrences.push_back({normalize_doi(ref.doi), normalize_title(ref.title), ref.year,
                             &ref.authors, &ref.doi, ri});
    }
  }

  Corpus corpus;
  auto& stats = corpus.resolution_stats;

  // DOI entities and, for each normalized title, the smallest DOI carrying it.
  std::unordered_map<std::string, std::string> doi_first_title;
  std::map<std::string, std::string> title_to_doi;
  for (const auto& occ : occurrences) {
    if (!occ.doi) continue;
    auto [it, inserted] = doi_first_title.try_emplace(*occ.doi, occ.title);
    if (!inserted && it->second != occ.title && !occ.title.empty() && !it->second.empty()) {
      ++stats.doi_conflicts;
      spdlog::debug("doi {} carries differing titles", *occ.doi);
    }
    if (!occ.title.empty()) {
      auto [t, fresh] = title_to_doi.try_emplace(occ.title, *occ.doi);
      if (!fresh && *occ.doi < t->second) t->second = *occ.doi;
    }
  }

  // Entity key per occurrence: "d" + doi, "t" + title, or unmatchable (empty).
  constexpr std::size_t kDropped = SIZE_MAX;
  std::vector<std::size_t> entity_of(occurrences.size(), kDropped);
  std::unordered_map<std::string, std::size_t> key_to_entity;
  std::vector<std::size_t> first_occurrence;
  auto entity_for_key = [&](std::string key, std::size_t occ_index, bool& is_new) {
    auto [it, inserted] = key_to_entity.try_emplace(std::move(key), first_occurrence.size());
    is_new = inserted;
    if (inserted) first_occurrence.push_back(occ_index);
    return it->second;
  };
  for (std::size_t i = 0; i < occurrences.size(); ++i) {
    const auto& occ = occurrences[i];
    bool is_new = false;
    if (occ.doi) {
      entity_of[i] = entity_for_key("d" + *occ.doi, i, is_new);
      if (!is_new) ++stats.doi_matches;
    } else if (!occ.title.empty()) {
      auto t = title_to_doi.find(occ.title);
      std::string key = t != title_to_doi.end() ? "d" + t->second : "t" + occ.title;
      entity_of[i] = entity_for_key(std::move(key), i, is_new);
      if (!is_new) ++stats.title_matches;
    } else if (occ.citing_record == SIZE_MAX) {
      entity_of[i] = first_occurrence.size();
      first_occurrence.push_back(i);
    } else {
      ++stats.dropped_references;
    }
  }

  const std::size_t n = first_occurrence.size();
  stats.new_entities = n;
  corpus.papers.resize(n);
  std::vector<bool> has_authors(n, false);
  for (std::size_t e = 0; e < n; ++e) corpus.papers[e].paper_id = static_cast<PaperId>(e);

  for (std::size_t i = 0; i < occurrences.size(); ++i) {
    if (entity_of[i] == kDropped) continue;
    const auto& occ = occurrences[i];
    auto& paper = corpus.papers[entity_of[i]];
    if (!paper.doi && occ.raw_doi->has_value() && !trim(**occ.raw_doi).empty()) {
      paper.doi = std::string(trim(**occ.raw_doi));
    }
    if (paper.canonical_title.empty()) paper.canonical_title = occ.title;
    if (!paper.year) paper.year = occ.year;
    if (!has_authors[entity_of[i]] && !occ.authors->empty()) {
      paper.author_keys = author_keys_of(*occ.authors, stats.dropped_authors);
      has_authors[entity_of[i]] = true;
    }
    if (!paper.country || !paper.region) {
      auto geo = assign_geography(*occ.authors, strategy);
      if (!paper.country) paper.country = geo.country;
      if (!paper.region) paper.region = geo.region;
    }
    if (occ.citing_record != SIZE_MAX) {
      const std::size_t citing = entity_of[occ.citing_record];
      if (citing != entity_of[i]) {
        corpus.papers[citing].cited_ids.push_back(static_cast<PaperId>(entity_of[i]));
      }
    }
  }
  if (stats.dropped_authors > 0) {
    spdlog::warn("dropped {} author entries with empty surname", stats.dropped_authors);
  }

  for (auto& p : corpus.papers) {
    std::sort(p.cited_ids.begin(), p.cited_ids.end());
    p.cited_ids.erase(std::unique(p.cited_ids.begin(), p.cited_ids.end()), p.cited_ids.end());
  }

  // A cited paper with no year exists no later than its earliest citer.
  bool changed = true;
  std::vector<bool> inherited(n, false);
  while (changed) {
    changed = false;
    for (const auto& citer : corpus.papers) {
      if (!citer.year) continue;
      for (PaperId c : citer.cited_ids) {
        auto& cited = corpus.papers[c];
        if (!cited.year || (inherited[c] && *citer.year < *cited.year)) {
          if (!cited.year) ++stats.inherited_years;
          cited.year = citer.year;
          inherited[c] = true;
          changed = true;
        }
      }
    }
  }

  corpus.rebuild_author_index();
  return corpus;
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  out << json{{"format", "knowflow-corpus"},
              {"version", 1},
              {"papers", corpus.papers.size()},
              {"resolution", resolution_report(corpus.resolution_stats)}}
             .dump()
      << '\n';
  for (const auto& p : corpus.papers) {
    json keys = json::array();
    for (const auto& k : p.author_keys) keys.push_back(k.canonical);
    out << json{{"paper_id", p.paper_id},
                {"doi", nullable(p.doi)},
                {"title", p.canonical_title},
                {"year", nullable(p.year)},
                {"authors", std::move(keys)},
                {"country", nullable(p.country)},
                {"region", nullable(p.region)},
                {"cited", p.cited_ids}}
               .dump()
        << '\n';
  }
}

Corpus read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty corpus file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw Error("corpus header is not json");
  }
  if (header.value("format", "") != "knowflow-corpus") throw Error("not a resolved corpus file");
  Corpus corpus;
  const auto& r = header.at("resolution");
  auto& s = corpus.resolution_stats;
  s.doi_matches = r.value("doi_matches", 0u);
  s.title_matches = r.value("title_matches", 0u);
  s.new_entities = r.value("new_entities", 0u);
  s.doi_conflicts = r.value("doi_conflicts", 0u);
  s.dropped_records = r.value("dropped_records", 0u);
  s.dropped_references = r.value("dropped_references", 0u);
  s.dropped_authors = r.value("dropped_authors", 0u);
  s.inherited_years = r.value("inherited_years", 0u);

  const std::size_t expected = header.at("papers").get<std::size_t>();
  corpus.papers.reserve(expected);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      PaperRecord p;
      p.paper_id = j.at("paper_id").get<PaperId>();
      p.doi = optional_string(j, "doi");
      p.canonical_title = j.at("title").get<std::string>();
      p.year = optional_year(j);
      for (const auto& k : j.at("authors")) p.author_keys.push_back({k.get<std::string>()});
      p.country = optional_string(j, "country");
      p.region = optional_string(j, "region");
      p.cited_ids = j.at("cited").get<std::vector<PaperId>>();
      corpus.papers.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error("corrupt corpus line: " + std::string(e.what()));
    }
  }
  if (corpus.papers.size() != expected) throw Error("corpus file truncated");
  corpus.rebuild_author_index();
  corpus.validate();
  return corpus;
}

Corpus read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return read_corpus(in);
}

json resolution_report(const ResolutionStats& s) {
  return {{"doi_matches", s.doi_matches},         {"title_matches", s.title_matches},
          {"new_entities", s.new_entities},       {"doi_conflicts", s.doi_conflicts},
          {"dropped_records", s.dropped_records}, {"dropped_references", s.dropped_references},
          {"dropped_authors", s.dropped_authors}, {"inherited_years", s.inherited_years}};
}

GeoStrategy parse_geo_strategy(std::string_view name) {
  if (name == "first_author") return GeoStrategy::first_author;
  if (name == "majority") return GeoStrategy::majority;
  throw Error("unknown geo strategy: " + std::string(name));
}

std::string_view to_string(GeoStrategy strategy) {
  return strategy == GeoStrategy::first_author ? "first_author" : "majority";
}

}  // namespace knowflow::corpus
