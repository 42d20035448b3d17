#include "hyspec/split_io.hpp"

#include <nlohmann/json.hpp>

#include "hyspec/error.hpp"
#include "hyspec/scene_io.hpp"

namespace hyspec::split {

using nlohmann::json;
using nlohmann::ordered_json;

std::string split_to_json(const SplitProblem& problem, const SplitAssignment& assignment) {
  const FeasibilityReport report = verify_assignment(problem, assignment.sets);
  const auto realized = realized_proportions(problem, assignment.sets);
  ordered_json doc;
  doc["problem_hash"] = problem.hash();
  doc["proportions"] = {{"train", problem.proportions().train},
                        {"validation", problem.proportions().validation},
                        {"test", problem.proportions().test}};
  ordered_json assign = ordered_json::object();
  for (std::size_t i = 0; i < assignment.sets.size(); ++i) {
    assign[std::to_string(i)] = set_number(assignment.sets[i]);
  }
  doc["assignment"] = std::move(assign);
  doc["objective"] = report.objective;
  doc["feasible"] = report.feasible;
  doc["realized_proportions"] = {{"train", realized[0]},
                                 {"labeled_pool", realized[1]},
                                 {"validation", realized[2]},
                                 {"test", realized[3]}};
  return doc.dump(2) + "\n";
}

void write_split(const std::filesystem::path& path, const SplitProblem& problem,
                 const SplitAssignment& assignment) {
  write_file_atomic(path, split_to_json(problem, assignment));
}

SplitFile read_split(const std::filesystem::path& path) {
  SplitFile out;
  try {
    const json doc = json::parse(read_file(path));
    out.problem_hash = doc.at("problem_hash").get<std::string>();
    const json& p = doc.at("proportions");
    out.proportions.train = p.at("train").get<double>();
    out.proportions.validation = p.at("validation").get<double>();
    out.proportions.test = p.at("test").get<double>();
    const json& assign = doc.at("assignment");
    out.assignment.sets.assign(assign.size(), SetId::kPool);
    std::vector<bool> seen(assign.size(), false);
    for (const auto& [key, value] : assign.items()) {
      const std::size_t group = std::stoul(key);
      if (group >= seen.size() || seen[group]) {
        throw MalformedAssignment("split file " + path.string() + " has a gap or duplicate at group " + key);
      }
      seen[group] = true;
      out.assignment.sets[group] = set_from_number(value.get<int>());
    }
    out.assignment.objective = doc.at("objective").get<std::int64_t>();
    out.assignment.feasible = doc.at("feasible").get<bool>();
  } catch (const json::exception& e) {
    throw IoError("bad split file " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw MalformedAssignment("split file " + path.string() + " has a non-numeric group id");
  }
  return out;
}

}  // namespace hyspec::split
