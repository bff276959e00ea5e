#pragma once

#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace nstate {

// Positive class is GI (label 1).
struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(const std::vector<int>& predicted, const std::vector<int>& truth);

struct MetricsRecord {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double loss = 0.0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  nlohmann::json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
};

MetricsRecord compute_metrics(const ConfusionCounts& c, double loss);

struct CvReport {
  std::string model;
  std::string dataset;
  std::vector<MetricsRecord> folds;
  MetricsRecord mean;
  MetricsRecord stddev;  // sample (n-1) standard deviation

  nlohmann::json to_json() const;
  static CvReport from_json(const nlohmann::json& j);
};

CvReport aggregate(const std::vector<MetricsRecord>& folds, std::string model = {},
                   std::string dataset = {});

enum class ReportFormat { kMarkdown, kCsv };

// Fold, ACC, Loss, F1, Precision, Recall rows plus Avg and Std, 4 decimals.
std::string render_report(const CvReport& report, ReportFormat format);

}  // namespace nstate
