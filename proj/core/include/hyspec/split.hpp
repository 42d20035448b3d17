#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyspec/scene.hpp"

namespace hyspec::split {

// Destination of a group of polygons.
enum class SetId : std::uint8_t {
  kTrain = 1,       // labeled training set
  kPool = 2,        // labeled pool (unlabeled training data of known classes)
  kValidation = 3,
  kTest = 4,
};

inline constexpr std::array<SetId, 4> kAllSets = {SetId::kTrain, SetId::kPool,
                                                  SetId::kValidation, SetId::kTest};
// Sets carrying a minimum per-class proportion.
inline constexpr std::array<SetId, 3> kConstrainedSets = {SetId::kTrain, SetId::kValidation,
                                                          SetId::kTest};

inline int set_number(SetId s) { return static_cast<int>(s); }
SetId set_from_number(int n);
const char* set_name(SetId s);

// Minimum fraction of every class each constrained set must receive.
struct Proportions {
  double train = 0.10;
  double validation = 0.10;
  double test = 0.40;

  double of(SetId s) const;
};

class SplitProblem {
 public:
  // Throws ConfigError when proportions are outside [0, 1), sum to >= 1, or a
  // class has no pixels.
  SplitProblem(GroupClassMatrix counts, Proportions proportions);

  const GroupClassMatrix& counts() const noexcept { return counts_; }
  const Proportions& proportions() const noexcept { return proportions_; }
  std::size_t groups() const noexcept { return counts_.groups(); }
  std::size_t classes() const noexcept { return counts_.classes(); }

  // Smallest pixel count of class `cls` that satisfies the proportion of `s`:
  // ceil(p_s * total_k), 0 for the pool.
  std::int64_t required(SetId s, std::size_t cls) const;
  std::int64_t class_total(std::size_t cls) const { return class_totals_[cls]; }
  std::int64_t group_total(std::size_t group) const { return group_totals_[group]; }
  std::int64_t labeled_total() const { return labeled_total_; }

  // Stable 64-bit FNV-1a digest of the counts and proportions, as 16 hex digits.
  std::string hash() const;

 private:
  GroupClassMatrix counts_;
  Proportions proportions_;
  std::vector<std::int64_t> class_totals_;
  std::vector<std::int64_t> group_totals_;
  std::int64_t labeled_total_ = 0;
  std::array<std::vector<std::int64_t>, 5> required_;  // indexed by set number
};

struct SplitAssignment {
  std::vector<SetId> sets;       // sets[i] is the destination of group i
  std::int64_t objective = 0;    // pixels in train + validation + test
  bool feasible = false;

  bool operator==(const SplitAssignment&) const = default;
};

struct Violation {
  SetId set;
  std::size_t cls;  // 0-based class index
  double realized;
  double required;
};

struct FeasibilityReport {
  // realized[s - 1][k]: fraction of class k's pixels assigned to set s.
  std::array<std::vector<double>, 4> realized;
  std::vector<Violation> violations;
  std::int64_t objective = 0;
  bool feasible = false;
};

// Objective: total pixels placed in train, validation and test.
std::int64_t objective_of(const SplitProblem& problem, const std::vector<SetId>& sets);

// Throws MalformedAssignment when `sets` does not cover exactly the problem's groups.
FeasibilityReport verify_assignment(const SplitProblem& problem, const std::vector<SetId>& sets);

// Class-averaged fraction of labeled pixels in each set, indexed by set number - 1.
std::array<double, 4> realized_proportions(const SplitProblem& problem,
                                           const std::vector<SetId>& sets);

struct ExactOptions {
  std::size_t max_groups = 24;
  // Previous solutions the result must differ from, in at least `min_hamming` groups each.
  std::vector<std::vector<SetId>> avoid;
  std::size_t min_hamming = 0;
};

// Depth-first branch and bound over group -> set choices. Returns the feasible
// assignment of minimum objective, breaking ties by the lexicographically
// smallest set vector, or std::nullopt when the problem is infeasible. Throws
// SizeError when the instance has more than `max_groups` groups.
std::optional<SplitAssignment> solve_exact(const SplitProblem& problem,
                                           const ExactOptions& options = {});

struct HeuristicOptions {
  std::uint64_t seed = 0;
  std::size_t budget = 20000;  // annealing moves per restart
  int restarts = 4;
  std::vector<std::vector<SetId>> avoid;
  std::size_t min_hamming = 0;
};

// Greedy construction followed by simulated-annealing repair. Never throws on
// infeasibility: the result carries `feasible == false` and the assignment of
// least constraint violation.
SplitAssignment solve_heuristic(const SplitProblem& problem, const HeuristicOptions& options = {});

struct SplitPortfolio {
  std::vector<SplitAssignment> splits;
  std::size_t min_hamming = 0;
  bool exhausted = false;  // fewer than K splits could satisfy the diversity floor
};

std::size_t hamming_distance(const std::vector<SetId>& a, const std::vector<SetId>& b);

struct DiversityOptions {
  std::size_t max_exact_groups = 24;  // larger instances fall back to the heuristic
  std::size_t heuristic_budget = 20000;
};

// Up to `k` feasible assignments, each differing from all previous ones in at
// least `min_hamming` groups.
SplitPortfolio enumerate_diverse_splits(const SplitProblem& problem, std::size_t k,
                                        std::size_t min_hamming, std::uint64_t seed,
                                        const DiversityOptions& options = {});

}  // namespace hyspec::split
