#include "hyspec/split.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "hyspec/error.hpp"
#include "hyspec/hash.hpp"

namespace hyspec::split {

SetId set_from_number(int n) {
  if (n < 1 || n > 4) throw MalformedAssignment("set id " + std::to_string(n) + " not in 1..4");
  return static_cast<SetId>(n);
}

const char* set_name(SetId s) {
  switch (s) {
    case SetId::kTrain: return "train";
    case SetId::kPool: return "labeled_pool";
    case SetId::kValidation: return "validation";
    case SetId::kTest: return "test";
  }
  return "?";
}

double Proportions::of(SetId s) const {
  switch (s) {
    case SetId::kTrain: return train;
    case SetId::kValidation: return validation;
    case SetId::kTest: return test;
    case SetId::kPool: return 0.0;
  }
  return 0.0;
}

SplitProblem::SplitProblem(GroupClassMatrix counts, Proportions proportions)
    : counts_(std::move(counts)), proportions_(proportions) {
  for (SetId s : kConstrainedSets) {
    const double p = proportions_.of(s);
    if (!(p >= 0.0 && p < 1.0)) {
      throw ConfigError(std::string("proportion for ") + set_name(s) + " must lie in [0, 1)");
    }
  }
  if (!(proportions_.train + proportions_.validation + proportions_.test < 1.0)) {
    throw ConfigError("train + validation + test proportions must sum to less than 1");
  }
  const std::size_t n = counts_.groups();
  const std::size_t c = counts_.classes();
  if (n == 0 || c == 0) throw ConfigError("split problem needs at least one group and one class");
  class_totals_.resize(c);
  group_totals_.resize(n);
  for (std::size_t k = 0; k < c; ++k) {
    class_totals_[k] = counts_.class_total(k);
    if (class_totals_[k] <= 0) {
      throw ConfigError("class " + std::to_string(k + 1) + " has no labeled pixels");
    }
  }
  for (std::size_t i = 0; i < n; ++i) group_totals_[i] = counts_.row_total(i);
  labeled_total_ = counts_.total();
  for (SetId s : kAllSets) {
    auto& req = required_[static_cast<std::size_t>(set_number(s))];
    req.assign(c, 0);
    const double p = proportions_.of(s);
    for (std::size_t k = 0; k < c; ++k) {
      const double x = p * static_cast<double>(class_totals_[k]);
      // Guard against products such as 0.1 * 30 landing a hair above an integer.
      req[k] = static_cast<std::int64_t>(std::ceil(x - 1e-12 * std::max(1.0, x)));
    }
  }
}

std::int64_t SplitProblem::required(SetId s, std::size_t cls) const {
  return required_[static_cast<std::size_t>(set_number(s))][cls];
}

std::string SplitProblem::hash() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(counts_.groups()));
  h.add(static_cast<std::uint64_t>(counts_.classes()));
  for (auto v : counts_.counts()) h.add(static_cast<std::uint64_t>(v));
  for (SetId s : kConstrainedSets) h.add(std::bit_cast<std::uint64_t>(proportions_.of(s)));
  return h.hex();
}

std::int64_t objective_of(const SplitProblem& problem, const std::vector<SetId>& sets) {
  std::int64_t obj = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i] != SetId::kPool) obj += problem.group_total(i);
  }
  return obj;
}

namespace {

void check_shape(const SplitProblem& problem, const std::vector<SetId>& sets) {
  if (sets.size() != problem.groups()) {
    throw MalformedAssignment("assignment covers " + std::to_string(sets.size()) +
                              " groups, problem has " + std::to_string(problem.groups()));
  }
  for (SetId s : sets) {
    const int n = set_number(s);
    if (n < 1 || n > 4) throw MalformedAssignment("set id out of range");
  }
}

// per_set[s - 1][k] pixel counts.
std::array<std::vector<std::int64_t>, 4> tally(const SplitProblem& problem,
                                               const std::vector<SetId>& sets) {
  std::array<std::vector<std::int64_t>, 4> per_set;
  for (auto& v : per_set) v.assign(problem.classes(), 0);
  const auto& P = problem.counts();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto& row = per_set[static_cast<std::size_t>(set_number(sets[i]) - 1)];
    for (std::size_t k = 0; k < problem.classes(); ++k) row[k] += P(i, k);
  }
  return per_set;
}

}  // namespace

FeasibilityReport verify_assignment(const SplitProblem& problem, const std::vector<SetId>& sets) {
  check_shape(problem, sets);
  const auto per_set = tally(problem, sets);
  FeasibilityReport report;
  for (SetId s : kAllSets) {
    const auto si = static_cast<std::size_t>(set_number(s) - 1);
    auto& realized = report.realized[si];
    realized.resize(problem.classes());
    for (std::size_t k = 0; k < problem.classes(); ++k) {
      realized[k] = static_cast<double>(per_set[si][k]) / static_cast<double>(problem.class_total(k));
      if (s != SetId::kPool && per_set[si][k] < problem.required(s, k)) {
        report.violations.push_back({s, k, realized[k], problem.proportions().of(s)});
      }
    }
  }
  report.objective = objective_of(problem, sets);
  report.feasible = report.violations.empty();
  return report;
}

std::array<double, 4> realized_proportions(const SplitProblem& problem,
                                           const std::vector<SetId>& sets) {
  check_shape(problem, sets);
  const auto per_set = tally(problem, sets);
  std::array<double, 4> out{};
  const auto c = static_cast<double>(problem.classes());
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t k = 0; k < problem.classes(); ++k) {
      out[s] += static_cast<double>(per_set[s][k]) / static_cast<double>(problem.class_total(k));
    }
    out[s] /= c;
  }
  return out;
}

std::size_t hamming_distance(const std::vector<SetId>& a, const std::vector<SetId>& b) {
  if (a.size() != b.size()) throw MalformedAssignment("assignments differ in length");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

// ---------------------------------------------------------------------------
// Exact branch and bound

namespace {

constexpr std::array<std::size_t, 3> kConstrainedIndex = {0, 2, 3};  // set number - 1

class BranchAndBound {
 public:
  BranchAndBound(const SplitProblem& problem, const ExactOptions& options)
      : problem_(problem), options_(options), n_(problem.groups()), c_(problem.classes()) {
    const auto& P = problem.counts();
    for (std::size_t si = 0; si < 3; ++si) {
      deficit_[si].resize(c_);
      for (std::size_t k = 0; k < c_; ++k) deficit_[si][k] = problem.required(kConstrainedSets[si], k);
    }
    remaining_.resize(c_);
    for (std::size_t k = 0; k < c_; ++k) remaining_[k] = problem.class_total(k);
    // For each class, groups ordered by cost per pixel of that class.
    by_ratio_.resize(c_);
    for (std::size_t k = 0; k < c_; ++k) {
      for (std::size_t i = 0; i < n_; ++i) {
        if (P(i, k) > 0) by_ratio_[k].push_back(i);
      }
      std::stable_sort(by_ratio_[k].begin(), by_ratio_[k].end(), [&](std::size_t a, std::size_t b) {
        // rowsum_a / P[a,k] < rowsum_b / P[b,k], compared without division.
        return static_cast<long double>(problem.group_total(a)) * P(b, k) <
               static_cast<long double>(problem.group_total(b)) * P(a, k);
      });
    }
    current_.assign(n_, SetId::kPool);
    distance_.assign(options_.avoid.size(), 0);
    for (const auto& a : options_.avoid) {
      if (a.size() != n_) throw MalformedAssignment("avoided assignment has the wrong length");
    }
  }

  void set_cutoff(std::int64_t cutoff) { best_value_ = cutoff; }

  std::optional<SplitAssignment> run() {
    search(0, 0);
    if (!found_) return std::nullopt;
    SplitAssignment out;
    out.sets = best_;
    out.objective = objective_of(problem_, best_);
    out.feasible = true;
    return out;
  }

 private:
  // Fractional covering cost of `need` pixels of class k using groups >= depth.
  double cover_cost(std::size_t k, std::int64_t need, std::size_t depth) const {
    if (need <= 0) return 0.0;
    const auto& P = problem_.counts();
    double cost = 0.0;
    std::int64_t left = need;
    for (std::size_t i : by_ratio_[k]) {
      if (i < depth) continue;
      const std::int64_t take = std::min(left, P(i, k));
      cost += static_cast<double>(take) * static_cast<double>(problem_.group_total(i)) /
              static_cast<double>(P(i, k));
      left -= take;
      if (left == 0) break;
    }
    return left > 0 ? std::numeric_limits<double>::infinity() : cost;
  }

  bool prune(std::size_t depth, std::int64_t objective) const {
    for (std::size_t k = 0; k < c_; ++k) {
      std::int64_t need = 0;
      for (std::size_t si = 0; si < 3; ++si) need += std::max<std::int64_t>(0, deficit_[si][k]);
      if (need > remaining_[k]) return true;
    }
    for (std::size_t a = 0; a < distance_.size(); ++a) {
      if (distance_[a] + (n_ - depth) < options_.min_hamming) return true;
    }
    double bound = static_cast<double>(objective);
    for (std::size_t si = 0; si < 3; ++si) {
      double set_bound = 0.0;
      for (std::size_t k = 0; k < c_; ++k) set_bound = std::max(set_bound, cover_cost(k, deficit_[si][k], depth));
      bound += set_bound;
    }
    // Integral objective: a fractional bound b implies at least ceil(b).
    return std::ceil(bound - 1e-9) >= static_cast<double>(best_value_);
  }

  void search(std::size_t depth, std::int64_t objective) {
    if (prune(depth, objective)) return;
    if (depth == n_) {
      // prune() passing at a leaf means all deficits are met and objective < best.
      best_value_ = objective;
      best_ = current_;
      found_ = true;
      return;
    }
    const auto& P = problem_.counts();
    for (std::size_t k = 0; k < c_; ++k) remaining_[k] -= P(depth, k);
    for (SetId s : kAllSets) {
      const int sn = set_number(s);
      current_[depth] = s;
      for (std::size_t a = 0; a < distance_.size(); ++a) distance_[a] += options_.avoid[a][depth] != s;
      std::size_t si = 3;
      if (s != SetId::kPool) {
        si = sn == 1 ? 0 : (sn == 3 ? 1 : 2);
        for (std::size_t k = 0; k < c_; ++k) deficit_[si][k] -= P(depth, k);
      }
      search(depth + 1, objective + (s == SetId::kPool ? 0 : problem_.group_total(depth)));
      if (si < 3) {
        for (std::size_t k = 0; k < c_; ++k) deficit_[si][k] += P(depth, k);
      }
      for (std::size_t a = 0; a < distance_.size(); ++a) distance_[a] -= options_.avoid[a][depth] != s;
    }
    for (std::size_t k = 0; k < c_; ++k) remaining_[k] += P(depth, k);
    current_[depth] = SetId::kPool;
  }

  const SplitProblem& problem_;
  const ExactOptions& options_;
  std::size_t n_, c_;
  std::array<std::vector<std::int64_t>, 3> deficit_;
  std::vector<std::int64_t> remaining_;
  std::vector<std::vector<std::size_t>> by_ratio_;
  std::vector<SetId> current_;
  std::vector<std::size_t> distance_;
  std::vector<SetId> best_;
  std::int64_t best_value_ = std::numeric_limits<std::int64_t>::max();
  bool found_ = false;
};

bool satisfies_diversity(const std::vector<SetId>& sets, const std::vector<std::vector<SetId>>& avoid,
                         std::size_t min_hamming) {
  return std::all_of(avoid.begin(), avoid.end(), [&](const std::vector<SetId>& a) {
    return hamming_distance(sets, a) >= min_hamming;
  });
}

}  // namespace

std::optional<SplitAssignment> solve_exact(const SplitProblem& problem, const ExactOptions& options) {
  if (problem.groups() > options.max_groups) {
    throw SizeError("exact split solver is capped at " + std::to_string(options.max_groups) +
                    " groups (instance has " + std::to_string(problem.groups()) +
                    "); use solve_heuristic for larger instances");
  }
  BranchAndBound bnb(problem, options);
  // A feasible heuristic solution bounds the search; the cutoff is one above its
  // objective so equally good, lexicographically smaller assignments survive.
  HeuristicOptions warm;
  warm.budget = 2000 + 200 * problem.groups();
  warm.restarts = 2;
  warm.avoid = options.avoid;
  warm.min_hamming = options.min_hamming;
  const SplitAssignment start = solve_heuristic(problem, warm);
  if (start.feasible && satisfies_diversity(start.sets, options.avoid, options.min_hamming)) {
    bnb.set_cutoff(start.objective + 1);
  }
  return bnb.run();
}

// ---------------------------------------------------------------------------
// Heuristic

namespace {

class Annealer {
 public:
  Annealer(const SplitProblem& problem, const HeuristicOptions& options)
      : problem_(problem), options_(options), n_(problem.groups()), c_(problem.classes()) {
    std::int64_t biggest = 0;
    for (std::size_t i = 0; i < n_; ++i) biggest = std::max(biggest, problem.group_total(i));
    diversity_weight_ = static_cast<double>(std::max<std::int64_t>(biggest, 1));
    for (const auto& a : options_.avoid) {
      if (a.size() != n_) throw MalformedAssignment("avoided assignment has the wrong length");
    }
  }

  std::vector<SetId> greedy() const {
    const auto& P = problem_.counts();
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return problem_.group_total(a) > problem_.group_total(b);
    });
    std::array<std::vector<std::int64_t>, 3> deficit;
    for (std::size_t si = 0; si < 3; ++si) {
      deficit[si].resize(c_);
      for (std::size_t k = 0; k < c_; ++k) deficit[si][k] = problem_.required(kConstrainedSets[si], k);
    }
    std::vector<SetId> sets(n_, SetId::kPool);
    for (std::size_t i : order) {
      // The set whose per-class shortfall this group relieves the most, relative to need.
      double best_gain = 0.0;
      std::size_t best_set = 3;
      for (std::size_t si = 0; si < 3; ++si) {
        double gain = 0.0;
        for (std::size_t k = 0; k < c_; ++k) {
          if (deficit[si][k] <= 0) continue;
          const double need = static_cast<double>(problem_.required(kConstrainedSets[si], k));
          gain += static_cast<double>(std::min(P(i, k), deficit[si][k])) / need;
        }
        if (gain > best_gain) {
          best_gain = gain;
          best_set = si;
        }
      }
      if (best_set < 3) {
        sets[i] = kConstrainedSets[best_set];
        for (std::size_t k = 0; k < c_; ++k) deficit[best_set][k] -= P(i, k);
      }
    }
    return sets;
  }

  SplitAssignment run() {
    std::mt19937_64 rng(options_.seed);
    const std::vector<SetId> start = greedy();
    std::uniform_int_distribution<int> pick_set(1, 4);
    for (int restart = 0; restart < std::max(1, options_.restarts); ++restart) {
      if (restart == 0) {
        load(start);
      } else if (best_feasible_ && restart % 2 == 1) {
        load(best_feasible_sets_);
      } else {
        std::vector<SetId> random(n_);
        for (auto& x : random) x = set_from_number(pick_set(rng));
        load(random);
      }
      if (penalty() > 0.0) repair(rng);
      if (penalty() == 0.0) improve(rng);
    }
  SplitAssignment out;
    if (best_feasible_) {
      out.sets = polish(best_feasible_sets_);
      out.feasible = true;
    } else {
      out.sets = best_penalty_sets_;
      out.feasible = false;
    }
    out.objective = objective_of(problem_, out.sets);
    return out;
  }

 private:
  void load(const std::vector<SetId>& sets) {
    sets_ = sets;
    for (auto& v : count_) v.assign(c_, 0);
    const auto& P = problem_.counts();
    objective_ = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto si = static_cast<std::size_t>(set_number(sets_[i]) - 1);
      for (std::size_t k = 0; k < c_; ++k) count_[si][k] += P(i, k);
      if (sets_[i] != SetId::kPool) objective_ += problem_.group_total(i);
    }
    distance_.assign(options_.avoid.size(), 0);
    for (std::size_t a = 0; a < options_.avoid.size(); ++a) {
      distance_[a] = hamming_distance(sets_, options_.avoid[a]);
    }
    shortfall_ = compute_shortfall();
    diversity_gap_ = compute_diversity_gap();
    record();
  }

  std::int64_t shortfall_of(std::size_t si, std::size_t k, std::int64_t count) const {
    if (si == 1) return 0;
    return std::max<std::int64_t>(0, problem_.required(kAllSets[si], k) - count);
  }

  std::int64_t compute_shortfall() const {
    std::int64_t total = 0;
    for (std::size_t si : kConstrainedIndex) {
      for (std::size_t k = 0; k < c_; ++k) total += shortfall_of(si, k, count_[si][k]);
    }
    return total;
  }

  std::int64_t compute_diversity_gap() const {
    std::int64_t gap = 0;
    for (std::size_t d : distance_) {
      gap += static_cast<std::int64_t>(options_.min_hamming > d ? options_.min_hamming - d : 0);
    }
    return gap;
  }

  double penalty() const {
    return static_cast<double>(shortfall_) + diversity_weight_ * static_cast<double>(diversity_gap_);
  }

  void record() {
    const double pen = penalty();
    if (pen == 0.0) {
      if (!best_feasible_ || objective_ < best_feasible_objective_) {
        best_feasible_ = true;
        best_feasible_objective_ = objective_;
        best_feasible_sets_ = sets_;
      }
    }
    if (pen < best_penalty_ || (pen == best_penalty_ && objective_ < best_penalty_objective_)) {
      best_penalty_ = pen;
      best_penalty_objective_ = objective_;
      best_penalty_sets_ = sets_;
    }
  }

  // Moves group i to set `to`, updating every incremental quantity.
  void apply(std::size_t i, SetId to) {
    const auto& P = problem_.counts();
    const SetId from = sets_[i];
    const auto fi = static_cast<std::size_t>(set_number(from) - 1);
    const auto ti = static_cast<std::size_t>(set_number(to) - 1);
    for (std::size_t k = 0; k < c_; ++k) {
      shortfall_ -= shortfall_of(fi, k, count_[fi][k]) + shortfall_of(ti, k, count_[ti][k]);
      count_[fi][k] -= P(i, k);
      count_[ti][k] += P(i, k);
      shortfall_ += shortfall_of(fi, k, count_[fi][k]) + shortfall_of(ti, k, count_[ti][k]);
    }
    if (from == SetId::kPool) objective_ += problem_.group_total(i);
    if (to == SetId::kPool) objective_ -= problem_.group_total(i);
    for (std::size_t a = 0; a < distance_.size(); ++a) {
      const SetId ref = options_.avoid[a][i];
      distance_[a] += (to != ref) - (from != ref);
    }
    diversity_gap_ = compute_diversity_gap();
    sets_[i] = to;
  }

  double initial_temperature() const {
    const double mean_group =
        static_cast<double>(problem_.labeled_total()) / static_cast<double>(std::max<std::size_t>(n_, 1));
    return std::max(1.0, 0.5 * mean_group);
  }

  // Annealing on the constraint penalty alone; stops at the first feasible state.
  void repair(std::mt19937_64& rng) {
    const double t0 = initial_temperature();
    const std::size_t budget = std::max<std::size_t>(options_.budget, 1);
    const double cooling = std::pow(1e-3, 1.0 / static_cast<double>(budget));
    std::uniform_int_distribution<std::size_t> pick_group(0, n_ - 1);
    std::uniform_int_distribution<int> pick_offset(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double temperature = t0;
    double energy = penalty();
    for (std::size_t step = 0; step < budget && energy > 0.0; ++step, temperature *= cooling) {
      const std::size_t i = pick_group(rng);
      const SetId from = sets_[i];
      apply(i, set_from_number((set_number(from) - 1 + pick_offset(rng)) % 4 + 1));
      const double delta = penalty() - energy;
      if (delta <= 0.0 || unit(rng) < std::exp(-delta / temperature)) {
        energy += delta;
        record();
      } else {
        apply(i, from);
      }
    }
  }

  // Annealing on the objective over feasible states only, with single-group
  // moves and swaps of two groups' sets.
  void improve(std::mt19937_64& rng) {
    const double t0 = initial_temperature();
    const std::size_t budget = std::max<std::size_t>(options_.budget, 1);
    const double cooling = std::pow(1e-3, 1.0 / static_cast<double>(budget));
    std::uniform_int_distribution<std::size_t> pick_group(0, n_ - 1);
    std::uniform_int_distribution<int> pick_offset(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double temperature = t0;
    for (std::size_t step = 0; step < budget; ++step, temperature *= cooling) {
      const std::int64_t before = objective_;
      const std::size_t i = pick_group(rng);
      const SetId si = sets_[i];
      std::size_t j = i;
      SetId sj = si;
      if (n_ > 1 && unit(rng) < 0.5) {
        j = pick_group(rng);
        sj = sets_[j];
        if (sj == si) continue;
        apply(i, sj);
        apply(j, si);
      } else {
        apply(i, set_from_number((set_number(si) - 1 + pick_offset(rng)) % 4 + 1));
      }
      const double delta = static_cast<double>(objective_ - before);
      if (penalty() == 0.0 && (delta <= 0.0 || unit(rng) < std::exp(-delta / temperature))) {
        record();
      } else {
        apply(i, si);
        if (j != i) apply(j, sj);
      }
    }
  }

  // Descent on a feasible assignment: send groups to the pool, or swap a
  // constrained group with a pool group, whenever feasibility survives and
  // the objective drops.
  std::vector<SetId> polish(const std::vector<SetId>& sets) {
    load(sets);
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t i = 0; i < n_; ++i) {
        if (sets_[i] == SetId::kPool) continue;
        const SetId from = sets_[i];
        apply(i, SetId::kPool);
        if (penalty() == 0.0) {
          improved = true;
          continue;
        }
        apply(i, from);
      }
      for (std::size_t i = 0; i < n_ && !improved; ++i) {
        if (sets_[i] == SetId::kPool) continue;
        for (std::size_t j = 0; j < n_ && !improved; ++j) {
          if (sets_[j] != SetId::kPool || problem_.group_total(j) >= problem_.group_total(i)) continue;
          const SetId from = sets_[i];
          apply(i, SetId::kPool);
          apply(j, from);
          if (penalty() == 0.0) {
            improved = true;
          } else {
            apply(j, SetId::kPool);
            apply(i, from);
          }
        }
      }
    }
    return sets_;
  }

  const SplitProblem& problem_;
  const HeuristicOptions& options_;
  std::size_t n_, c_;
  double diversity_weight_ = 1.0;

  std::vector<SetId> sets_;
  std::array<std::vector<std::int64_t>, 4> count_;
  std::vector<std::size_t> distance_;
  std::int64_t objective_ = 0;
  std::int64_t shortfall_ = 0;
  std::int64_t diversity_gap_ = 0;

  bool best_feasible_ = false;
  std::int64_t best_feasible_objective_ = 0;
  std::vector<SetId> best_feasible_sets_;
  double best_penalty_ = std::numeric_limits<double>::infinity();
  std::int64_t best_penalty_objective_ = 0;
  std::vector<SetId> best_penalty_sets_;
};

}  // namespace

SplitAssignment solve_heuristic(const SplitProblem& problem, const HeuristicOptions& options) {
  if (options.budget == 0) throw ConfigError("heuristic budget must be positive");
  Annealer annealer(problem, options);
  return annealer.run();
}

SplitPortfolio enumerate_diverse_splits(const SplitProblem& problem, std::size_t k,
                                        std::size_t min_hamming, std::uint64_t seed,
                                        const DiversityOptions& options) {
  if (k == 0) throw ConfigError("portfolio size must be at least 1");
  SplitPortfolio portfolio;
  portfolio.min_hamming = min_hamming;
  std::vector<std::vector<SetId>> found;
  for (std::size_t round = 0; round < k; ++round) {
    std::optional<SplitAssignment> next;
    if (problem.groups() <= options.max_exact_groups) {
      ExactOptions exact;
      exact.max_groups = options.max_exact_groups;
      exact.avoid = found;
      exact.min_hamming = min_hamming;
      next = solve_exact(problem, exact);
    } else {
      HeuristicOptions heuristic;
      heuristic.seed = seed + round;
      heuristic.budget = options.heuristic_budget;
      heuristic.avoid = found;
      heuristic.min_hamming = min_hamming;
      SplitAssignment candidate = solve_heuristic(problem, heuristic);
      if (candidate.feasible && satisfies_diversity(candidate.sets, found, min_hamming)) {
        next = std::move(candidate);
      }
    }
    if (!next) {
      portfolio.exhausted = true;
      break;
    }
    found.push_back(next->sets);
    portfolio.splits.push_back(std::move(*next));
  }
  return portfolio;
}

}  // namespace hyspec::split
