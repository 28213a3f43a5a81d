#pragma once

// Persistence for observation streams.
//
// Binary layout (little-endian), written block by block so that a 10^9-pair
// stream never has to exist in memory:
//
//   "KFOBS\0\0\1"                      magic
//   u32 max_depth, u32 flow_mode
//   u32 n_countries, strings           (u32 length + bytes)
//   u32 n_regions, strings
//   u32 n_papers, n x {u32 paper_id, i32 year, i32 country, i32 region}
//   blocks: u32 source_position, u32 n_targets, n_targets x i8 distance code,
//           u32 n_flow, n_flow x u32 target index
//   trailer: u32 0xFFFFFFFF, u64 n_blocks, u64 n_observations
//
// Per-pair columns (y_id, eval_year, same_country, same_region) are implied
// by the paper table and the target order, so a pair costs one byte plus
// four bytes per flow event.
//
// CSV layout: x_id,y_id,eval_year,distance_class,flow,same_country,same_region
// with -1 for unreachable distances and absent geography flags.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <optional>

#include "knowflow/graph.hpp"

namespace knowflow::graph {

class BinaryObservationWriter {
 public:
  BinaryObservationWriter(const std::filesystem::path& path, const PaperTable& table);
  ~BinaryObservationWriter();

  BinaryObservationWriter(const BinaryObservationWriter&) = delete;
  BinaryObservationWriter& operator=(const BinaryObservationWriter&) = delete;

  void write(const ObservationBlock& block);
  /// Writes the trailer and closes the file; called by the destructor if needed.
  void finish();

  std::uint64_t observations() const { return observations_; }

 private:
  std::ofstream out_;
  const PaperTable& table_;
  std::uint64_t blocks_ = 0;
  std::uint64_t observations_ = 0;
  bool finished_ = false;
};

class CsvObservationWriter {
 public:
  explicit CsvObservationWriter(std::ostream& out);
  void write(const PairObservation& obs);

 private:
  std::ostream& out_;
};

enum class ObservationFormat { binary, csv };

ObservationFormat parse_observation_format(std::string_view name);

/// Streams observations from either format (detected by the magic bytes).
class ObservationReader {
 public:
  explicit ObservationReader(std::filesystem::path path);

  ObservationFormat format() const { return format_; }
  /// Known for binary files; CSV files do not record it.
  std::optional<int> max_depth() const { return max_depth_; }
  std::optional<FlowMode> flow_mode() const { return flow_mode_; }

  /// Calls `visit` once per observation. May be called repeatedly. Throws
  /// Error on truncated or corrupt input.
  void for_each(const std::function<void(const PairObservation&)>& visit) const;

 private:
  std::filesystem::path path_;
  ObservationFormat format_ = ObservationFormat::binary;
  std::optional<int> max_depth_;
  std::optional<FlowMode> flow_mode_;
};

}  // namespace knowflow::graph
