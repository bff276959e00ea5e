#include "nstate/splitter.hpp"

#include <algorithm>
#include <map>

#include "nstate/errors.hpp"
#include "nstate/rng.hpp"

namespace nstate {

using nlohmann::json;

json FoldPlan::to_json() const {
  json folds_j = json::array();
  for (const auto& f : folds) folds_j.push_back({{"train", f.train}, {"val", f.val}});
  return {{"k", k}, {"seed", seed}, {"folds", folds_j}};
}

FoldPlan FoldPlan::from_json(const json& j) {
  FoldPlan p;
  p.k = j.at("k");
  p.seed = j.at("seed");
  for (const auto& f : j.at("folds"))
    p.folds.push_back({f.at("train").get<std::vector<std::size_t>>(),
                       f.at("val").get<std::vector<std::size_t>>()});
  return p;
}

FoldPlan stratified_group_kfold(const std::vector<int>& labels,
                                const std::vector<std::string>& groups, std::size_t k,
                                std::uint64_t seed) {
  require(labels.size() == groups.size(), "kfold: labels and groups differ in length");
  require(k >= 2, "kfold: need k >= 2");

  // ordered by first appearance for a seed-only dependence on input order
  std::vector<std::string> order;
  std::map<std::string, int> group_label;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = group_label.emplace(groups[i], labels[i]);
    if (fresh) order.push_back(groups[i]);
    else if (it->second != labels[i])
      throw ContractError("kfold: group '" + groups[i] + "' has more than one label");
  }
  if (order.size() < k)
    throw ContractError("kfold: " + std::to_string(order.size()) + " groups is fewer than k=" +
                        std::to_string(k));

  std::map<int, std::vector<std::string>> by_label;
  for (const auto& g : order) by_label[group_label[g]].push_back(g);
  std::vector<std::pair<int, std::vector<std::string>>> classes(by_label.begin(), by_label.end());
  std::stable_sort(classes.begin(), classes.end(),
                   [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });

  Rng rng(seed, streams::kFolds);
  std::vector<std::size_t> tie_rank(k);
  for (std::size_t i = 0; i < k; ++i) tie_rank[i] = i;
  rng.shuffle(tie_rank.begin(), tie_rank.end());

  std::vector<std::size_t> total(k, 0);
  std::map<std::string, std::size_t> fold_of;
  for (auto& [label, members] : classes) {
    rng.shuffle(members.begin(), members.end());
    std::vector<std::size_t> count(k, 0);
    for (const auto& g : members) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < k; ++f) {
        const auto key = [&](std::size_t x) {
          return std::make_tuple(count[x], total[x], tie_rank[x]);
        };
        if (key(f) < key(best)) best = f;
      }
      fold_of[g] = best;
      ++count[best];
      ++total[best];
    }
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t f = fold_of[groups[i]];
    for (std::size_t j = 0; j < k; ++j) (j == f ? plan.folds[j].val : plan.folds[j].train).push_back(i);
  }
  return plan;
}

}  // namespace nstate
