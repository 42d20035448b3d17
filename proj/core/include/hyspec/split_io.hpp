#pragma once

#include <filesystem>
#include <string>

#include "hyspec/split.hpp"

namespace hyspec::split {

// Split file JSON:
// {"problem_hash": "<16 hex>", "proportions": {"train", "validation", "test"},
//  "assignment": {"<group id>": <set id>, ...}, "objective": n, "feasible": bool,
//  "realized_proportions": {"train", "labeled_pool", "validation", "test"}}
std::string split_to_json(const SplitProblem& problem, const SplitAssignment& assignment);
void write_split(const std::filesystem::path& path, const SplitProblem& problem,
                 const SplitAssignment& assignment);

struct SplitFile {
  std::string problem_hash;
  Proportions proportions;
  SplitAssignment assignment;
};

SplitFile read_split(const std::filesystem::path& path);

}  // namespace hyspec::split
