#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace nstate {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& j);
};

// Subject-wise stratified k-fold. Each group must carry a single label.
// Groups are shuffled within each label, then assigned one at a time to
// the fold holding the fewest groups of that label (ties: fewest groups
// overall, then a seeded fold order). Labels are processed largest class
// first so per-fold group totals differ by at most one.
FoldPlan stratified_group_kfold(const std::vector<int>& labels,
                                const std::vector<std::string>& groups,
                                std::size_t k, std::uint64_t seed);

}  // namespace nstate
