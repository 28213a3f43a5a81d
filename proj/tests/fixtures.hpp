#pragma once

#include <filesystem>
#include <string>

#include "knowflow/corpus.hpp"

namespace fixtures {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(KNOWFLOW_TEST_DATA) / name;
}

inline knowflow::corpus::Corpus figure1() {
  const auto parsed = knowflow::corpus::parse_corpus_file(data_path("figure1.jsonl"));
  return knowflow::corpus::resolve_papers(parsed.records);
}

// Paper ids of the Figure 1 fixture follow its record order.
enum Fig1 : knowflow::PaperId { A = 0, B = 1, C = 2, D = 3, E = 4 };

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("knowflow-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
