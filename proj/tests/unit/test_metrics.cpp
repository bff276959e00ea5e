#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "nstate/errors.hpp"
#include "nstate/metrics.hpp"
#include "nstate/rng.hpp"

using namespace nstate;

namespace {

MetricsRecord row(const std::vector<double>& r) {
  MetricsRecord m;
  m.accuracy = r[0];
  m.loss = r[1];
  m.f1 = r[2];
  m.precision = r[3];
  m.recall = r[4];
  return m;
}

nlohmann::json fold_tables() {
  std::ifstream is(std::string(NSTATE_FIXTURE_DIR) + "/fold_tables.json");
  REQUIRE(is);
  return nlohmann::json::parse(is).at("tables");
}

}  // namespace

TEST_CASE("confusion tallies") {
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[i] = i < 10;
  auto c = confusion(y, y);
  CHECK(c.tp == 10);
  CHECK(c.tn == 10);
  CHECK(c.fp + c.fn == 0);
  std::vector<int> inv(20);
  for (int i = 0; i < 20; ++i) inv[i] = 1 - y[i];
  c = confusion(inv, y);
  CHECK(c.tp + c.tn == 0);
  CHECK(c.fp == 10);
  CHECK(c.fn == 10);
  std::vector<int> truth(20, 0), all(20, 1);
  for (int i = 0; i < 13; ++i) truth[i] = 1;
  c = confusion(all, truth);
  CHECK(c.tp == 13);
  CHECK(c.fp == 7);
  CHECK(c.tn + c.fn == 0);
  CHECK_THROWS_AS(confusion({1, 0}, {1}), ContractError);
  CHECK_THROWS_AS(confusion({2}, {1}), ContractError);
}

TEST_CASE("metric formulas") {
  const auto perfect = compute_metrics({5, 5, 0, 0}, 0.1);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.loss == 0.1);

  const auto none = compute_metrics({0, 10, 0, 10}, 0.0);
  CHECK(none.precision == 0.0);
  CHECK(none.precision_undefined);
  CHECK(none.recall == 0.0);
  CHECK(!none.recall_undefined);
  CHECK(none.f1 == 0.0);
  CHECK(none.accuracy == 0.5);
  CHECK_THROWS_AS(compute_metrics({}, 0.0), ContractError);

  // precision 0.7652, recall 0.8417 -> F1 0.8016
  const double p = 0.7652, r = 0.8417;
  CHECK(std::abs(2 * p * r / (p + r) - 0.8016) <= 5e-4);

  Rng rng(1, 0);
  for (int i = 0; i < 2000; ++i) {
    ConfusionCounts cc{rng.below(30), rng.below(30), rng.below(30), rng.below(30)};
    if (cc.total() == 0) continue;
    const auto m = compute_metrics(cc, 0.0);
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (!m.precision_undefined && !m.recall_undefined && m.precision + m.recall > 0)
      CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12);
  }
}

TEST_CASE("aggregation") {
  std::vector<MetricsRecord> folds;
  for (double a : {0.7917, 0.7958, 0.7563, 0.6458, 0.8375, 0.7417}) folds.push_back(row({a, 0, 0, 0, 0}));
  const auto rep = aggregate(folds);
  CHECK(std::abs(rep.mean.accuracy - 0.7615) <= 5e-4);
  CHECK(std::abs(rep.stddev.accuracy - 0.0658) <= 1e-3);
  const auto same = aggregate({row({0.5, 1, 0.2, 0.3, 0.4}), row({0.5, 1, 0.2, 0.3, 0.4})});
  CHECK(same.stddev.accuracy == 0.0);
  CHECK(same.stddev.loss == 0.0);
  CHECK_THROWS_AS(aggregate({row({1, 0, 0, 0, 0})}), ContractError);
}

TEST_CASE("published fold tables are internally consistent") {
  const auto tables = fold_tables();
  REQUIRE(tables.size() == 8);
  std::vector<std::string> inconsistent;
  for (const auto& t : tables) {
    std::vector<MetricsRecord> folds;
    for (const auto& r : t.at("folds")) {
      const auto v = r.get<std::vector<double>>();
      folds.push_back(row(v));
      const double h = 2 * v[3] * v[4] / (v[3] + v[4]);
      if (std::abs(h - v[2]) > 5e-3)
        inconsistent.push_back(t.at("model").get<std::string>() + "/" + t.at("dataset").get<std::string>() +
                               "/" + std::to_string(folds.size()));
    }
    REQUIRE(folds.size() == 6);
    const auto rep = aggregate(folds);
    const auto avg = t.at("avg").get<std::vector<double>>(), sd = t.at("std").get<std::vector<double>>();
    const MetricsRecord ma = rep.mean, ms = rep.stddev;
    const double mean[5] = {ma.accuracy, ma.loss, ma.f1, ma.precision, ma.recall};
    const double stdv[5] = {ms.accuracy, ms.loss, ms.f1, ms.precision, ms.recall};
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(mean[k] - avg[k]) <= 5e-4);
      CHECK(std::abs(stdv[k] - sd[k]) <= 2e-3);
    }
  }
  // The first seven tables satisfy the identity; the hybrid model's COGN-26
  // fold 1 prints F1 0.7861 against P 0.7312, R 0.9758 (harmonic mean 0.836).
  CHECK(inconsistent == std::vector<std::string>{"cnnlstm/COGN-26/1"});

  // the best COGN-26 accuracy
  for (const auto& t : tables)
    if (t.at("model") == "cnn1d" && t.at("dataset") == "COGN-26") {
      std::vector<MetricsRecord> folds;
      for (const auto& r : t.at("folds")) folds.push_back(row(r.get<std::vector<double>>()));
      CHECK(std::abs(aggregate(folds).mean.accuracy - 0.8094) <= 5e-4);
    }
}

TEST_CASE("report rendering") {
  std::vector<MetricsRecord> folds;
  Rng rng(3, 0);
  for (int i = 0; i < 6; ++i)
    folds.push_back(compute_metrics({rng.below(50) + 1, rng.below(50) + 1, rng.below(50), rng.below(50)},
                                    rng.uniform()));
  const auto rep = aggregate(folds, "cnn1d", "COGN-26");
  const std::string md = render_report(rep, ReportFormat::kMarkdown);
  std::istringstream ms(md);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ms, line)) lines.push_back(line);
  REQUIRE(lines.size() == 2 + 8);
  for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), '|') == 7);
  CHECK(lines[0] == "| Fold | ACC | Loss | F1 | Precision | Recall |");
  CHECK(lines[8].rfind("| Avg |", 0) == 0);
  CHECK(lines[9].rfind("| Std |", 0) == 0);

  const std::string csv = render_report(rep, ReportFormat::kCsv);
  std::istringstream cs(csv);
  std::getline(cs, line);
  CHECK(line == "Fold,ACC,Loss,F1,Precision,Recall");
  std::size_t n = 0;
  while (std::getline(cs, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    const MetricsRecord& m = n < 6 ? folds[n] : (n == 6 ? rep.mean : rep.stddev);
    const double expect[5] = {m.accuracy, m.loss, m.f1, m.precision, m.recall};
    for (double e : expect) {
      std::getline(ls, cell, ',');
      CHECK(std::abs(std::stod(cell) - e) <= 5e-5 + 1e-12);
    }
    ++n;
  }
  CHECK(n == 8);

  const auto back = CvReport::from_json(rep.to_json());
  CHECK(back.to_json() == rep.to_json());
  CHECK(back.model == "cnn1d");
}
