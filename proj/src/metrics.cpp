#include "nstate/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nstate/errors.hpp"

namespace nstate {

using nlohmann::json;

ConfusionCounts confusion(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw ContractError("confusion: " + std::to_string(predicted.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1))
      throw ContractError("confusion: labels must be binary");
    if (p == 1 && t == 1) ++c.tp;
    else if (p == 0 && t == 0) ++c.tn;
    else if (p == 1) ++c.fp;
    else ++c.fn;
  }
  return c;
}

MetricsRecord compute_metrics(const ConfusionCounts& c, double loss) {
  if (c.total() == 0) throw ContractError("compute_metrics: no evaluated samples");
  MetricsRecord m;
  m.loss = loss;
  m.accuracy = double(c.tp + c.tn) / double(c.total());
  if (c.tp + c.fp == 0) m.precision_undefined = true;
  else m.precision = double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn == 0) m.recall_undefined = true;
  else m.recall = double(c.tp) / double(c.tp + c.fn);
  if (2 * c.tp + c.fp + c.fn == 0) m.f1_undefined = true;
  else m.f1 = 2.0 * double(c.tp) / double(2 * c.tp + c.fp + c.fn);
  return m;
}

json MetricsRecord::to_json() const {
  json j = {{"accuracy", accuracy}, {"loss", loss}, {"f1", f1},
            {"precision", precision}, {"recall", recall}};
  json flags = json::array();
  if (precision_undefined) flags.push_back("precision");
  if (recall_undefined) flags.push_back("recall");
  if (f1_undefined) flags.push_back("f1");
  j["undefined"] = flags;
  return j;
}

MetricsRecord MetricsRecord::from_json(const json& j) {
  MetricsRecord m;
  m.accuracy = j.at("accuracy");
  m.loss = j.at("loss");
  m.f1 = j.at("f1");
  m.precision = j.at("precision");
  m.recall = j.at("recall");
  for (const auto& f : j.value("undefined", json::array())) {
    if (f == "precision") m.precision_undefined = true;
    if (f == "recall") m.recall_undefined = true;
    if (f == "f1") m.f1_undefined = true;
  }
  return m;
}

namespace {

constexpr double MetricsRecord::*kFields[] = {&MetricsRecord::accuracy, &MetricsRecord::loss,
                                              &MetricsRecord::f1, &MetricsRecord::precision,
                                              &MetricsRecord::recall};

}  // namespace

CvReport aggregate(const std::vector<MetricsRecord>& folds, std::string model,
                   std::string dataset) {
  if (folds.size() < 2) throw ContractError("aggregate: need at least 2 folds");
  CvReport r;
  r.model = std::move(model);
  r.dataset = std::move(dataset);
  r.folds = folds;
  const double n = double(folds.size());
  for (auto field : kFields) {
    double mean = 0.0;
    for (const auto& f : folds) mean += f.*field;
    mean /= n;
    double ss = 0.0;
    for (const auto& f : folds) ss += (f.*field - mean) * (f.*field - mean);
    r.mean.*field = mean;
    r.stddev.*field = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

json CvReport::to_json() const {
  json folds_j = json::array();
  for (const auto& f : folds) folds_j.push_back(f.to_json());
  return {{"model", model}, {"dataset", dataset}, {"folds", folds_j},
          {"mean", mean.to_json()}, {"std", stddev.to_json()}};
}

CvReport CvReport::from_json(const json& j) {
  CvReport r;
  r.model = j.value("model", std::string());
  r.dataset = j.value("dataset", std::string());
  for (const auto& f : j.at("folds")) r.folds.push_back(MetricsRecord::from_json(f));
  r.mean = MetricsRecord::from_json(j.at("mean"));
  r.stddev = MetricsRecord::from_json(j.at("std"));
  return r;
}

std::string render_report(const CvReport& report, ReportFormat format) {
  std::ostringstream os;
  const char* names[] = {"Fold", "ACC", "Loss", "F1", "Precision", "Recall"};
  auto row = [&](const std::string& label, const MetricsRecord& m) {
    char buf[32];
    if (format == ReportFormat::kMarkdown) os << "| " << label << " |";
    else os << label;
    for (auto field : kFields) {
      std::snprintf(buf, sizeof buf, "%.4f", m.*field);
      if (format == ReportFormat::kMarkdown) os << ' ' << buf << " |";
      else os << ',' << buf;
    }
    os << '\n';
  };
  if (format == ReportFormat::kMarkdown) {
    os << '|';
    for (auto* n : names) os << ' ' << n << " |";
    os << "\n|";
    for (std::size_t i = 0; i < 6; ++i) os << "---|";
    os << '\n';
  } else {
    for (std::size_t i = 0; i < 6; ++i) os << (i ? "," : "") << names[i];
    os << '\n';
  }
  for (std::size_t i = 0; i < report.folds.size(); ++i) row(std::to_string(i + 1), report.folds[i]);
  row("Avg", report.mean);
  row("Std", report.stddev);
  return os.str();
}

}  // namespace nstate
