#include "knowflow/observation_io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

namespace knowflow::graph {

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'F', 'O', 'B', 'S', '\0', '\0', '\1'};
constexpr std::uint32_t kTrailerTag = 0xFFFFFFFFu;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw Error("observation file truncated");
  return value;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw Error("observation file truncated");
  return s;
}

PaperTable read_table(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error("not a binary observation file");
  }
  PaperTable table;
  table.max_depth = static_cast<int>(get<std::uint32_t>(in));
  table.flow_mode = get<std::uint32_t>(in) == 0 ? FlowMode::strict : FlowMode::relaxed;
  for (auto n = get<std::uint32_t>(in); n > 0; --n) table.countries.push_back(get_string(in));
  for (auto n = get<std::uint32_t>(in); n > 0; --n) table.regions.push_back(get_string(in));
  const auto n_papers = get<std::uint32_t>(in);
  for (std::uint32_t pos = 0; pos < n_papers; ++pos) {
    table.paper_ids.push_back(get<std::uint32_t>(in));
    const int year = get<std::int32_t>(in);
    table.years.push_back(year);
    table.country.push_back(get<std::int32_t>(in));
    table.region.push_back(get<std::int32_t>(in));
    if (table.year_ranges.empty() || table.year_ranges.back().year != year) {
      table.year_ranges.push_back({year, pos, pos});
    }
    table.year_ranges.back().end = pos + 1;
  }
  return table;
}

std::optional<bool> parse_flag(std::string_view field) {
  if (field == "-1") return std::nullopt;
  if (field == "0") return false;
  if (field == "1") return true;
  throw Error("invalid flag value '" + std::string(field) + "'");
}

template <typename T>
T parse_number(std::string_view field) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error("invalid number '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

BinaryObservationWriter::BinaryObservationWriter(const std::filesystem::path& path,
                                                 const PaperTable& table)
    : out_(path, std::ios::binary | std::ios::trunc), table_(table) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  out_.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(table.max_depth));
  put<std::uint32_t>(out_, table.flow_mode == FlowMode::strict ? 0 : 1);
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(table.countries.size()));
  for (const auto& c : table.countries) put_string(out_, c);
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(table.regions.size()));
  for (const auto& r : table.regions) put_string(out_, r);
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(table.size()));
  for (std::size_t pos = 0; pos < table.size(); ++pos) {
    put<std::uint32_t>(out_, table.paper_ids[pos]);
    put<std::int32_t>(out_, table.years[pos]);
    put<std::int32_t>(out_, table.country[pos]);
    put<std::int32_t>(out_, table.region[pos]);
  }
}

BinaryObservationWriter::~BinaryObservationWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void BinaryObservationWriter::write(const ObservationBlock& block) {
  if (finished_) throw ContractViolation("write after finish");
  if (block.distance_codes.size() != table_.target_count(block.source_position)) {
    throw ContractViolation("block size does not match the target sequence");
  }
  put<std::uint32_t>(out_, block.source_position);
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(block.distance_codes.size()));
  out_.write(reinterpret_cast<const char*>(block.distance_codes.data()),
             static_cast<std::streamsize>(block.distance_codes.size()));
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(block.flow_targets.size()));
  out_.write(reinterpret_cast<const char*>(block.flow_targets.data()),
             static_cast<std::streamsize>(block.flow_targets.size() * sizeof(std::uint32_t)));
  ++blocks_;
  observations_ += block.distance_codes.size();
}

void BinaryObservationWriter::finish() {
  if (finished_) return;
  finished_ = true;
  put<std::uint32_t>(out_, kTrailerTag);
  put<std::uint64_t>(out_, blocks_);
  put<std::uint64_t>(out_, observations_);
  out_.close();
  if (!out_) throw Error("failed writing observation file");
}

CsvObservationWriter::CsvObservationWriter(std::ostream& out) : out_(out) {
  out_ << "x_id,y_id,eval_year,distance_class,flow,same_country,same_region\n";
}

void CsvObservationWriter::write(const PairObservation& o) {
  auto flag = [](const std::optional<bool>& f) { return f ? (*f ? 1 : 0) : -1; };
  out_ << o.x_id << ',' << o.y_id << ',' << o.eval_year << ',' << o.distance.class_code() << ','
       << (o.flow ? 1 : 0) << ',' << flag(o.same_country) << ',' << flag(o.same_region) << '\n';
}

ObservationFormat parse_observation_format(std::string_view name) {
  if (name == "bin" || name == "binary") return ObservationFormat::binary;
  if (name == "csv") return ObservationFormat::csv;
  throw Error("unknown observation format: " + std::string(name));
}

ObservationReader::ObservationReader(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("cannot open observation file " + path_.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == static_cast<std::streamsize>(magic.size()) && magic == kMagic) {
    format_ = ObservationFormat::binary;
    in.seekg(0);
    const auto table = read_table(in);
    max_depth_ = table.max_depth;
    flow_mode_ = table.flow_mode;
  } else {
    format_ = ObservationFormat::csv;
  }
}

void ObservationReader::for_each(const std::function<void(const PairObservation&)>& visit) const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("cannot open observation file " + path_.string());

  if (format_ == ObservationFormat::csv) {
    std::string line;
    std::getline(in, line);  // header
    std::size_t line_no = 1;
    std::array<std::string_view, 7> fields;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::string_view rest(line);
      std::size_t n = 0;
      while (n < fields.size()) {
        const auto comma = rest.find(',');
        fields[n++] = rest.substr(0, comma);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (n != fields.size()) throw Error("bad column count @ line " + std::to_string(line_no));
      PairObservation o;
      o.x_id = parse_number<PaperId>(fields[0]);
      o.y_id = parse_number<PaperId>(fields[1]);
      o.eval_year = parse_number<int>(fields[2]);
      const int cls = parse_number<int>(fields[3]);
      o.distance = cls >= 0 ? Distance::finite(cls) : Distance::infinite();
      o.flow = parse_number<int>(fields[4]) != 0;
      o.same_country = parse_flag(fields[5]);
      o.same_region = parse_flag(fields[6]);
      visit(o);
    }
    return;
  }

  const PaperTable table = read_table(in);
  std::vector<std::int8_t> codes;
  std::vector<std::uint32_t> flows;
  std::uint64_t blocks = 0, observations = 0;
  for (;;) {
    const auto tag = get<std::uint32_t>(in);
    if (tag == kTrailerTag) {
      if (get<std::uint64_t>(in) != blocks || get<std::uint64_t>(in) != observations) {
        throw Error("observation file trailer does not match its contents");
      }
      return;
    }
    if (tag >= table.size()) throw Error("corrupt block header");
    const auto n_targets = get<std::uint32_t>(in);
    if (n_targets != table.target_count(tag)) throw Error("corrupt block length");
    codes.resize(n_targets);
    if (!in.read(reinterpret_cast<char*>(codes.data()), n_targets)) {
      throw Error("observation file truncated");
    }
    const auto n_flow = get<std::uint32_t>(in);
    flows.resize(n_flow);
    if (!in.read(reinterpret_cast<char*>(flows.data()),
                 static_cast<std::streamsize>(n_flow * sizeof(std::uint32_t)))) {
      throw Error("observation file truncated");
    }
    expand_block(table, ObservationBlock{tag, codes, flows}, visit);
    ++blocks;
    observations += n_targets;
  }
}

}  // namespace knowflow::graph
