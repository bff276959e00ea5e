#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nstate/data.hpp"
#include "nstate/dsp.hpp"
#include "nstate/metrics.hpp"
#include "nstate/models.hpp"
#include "nstate/montage.hpp"
#include "nstate/splitter.hpp"
#include "nstate/training.hpp"

namespace nstate {

struct PrepOptions {
  bool ransac = true;
  RansacParams ransac_params;
  double low_hz = 1.0;
  double high_hz = 45.0;
  double crop_start = 600.0;  // s
  double crop_end = 720.0;    // s
  double epoch_seconds = 1.0;
};

struct PrepResult {
  EpochSet epochs;
  std::vector<std::string> bad;
};

// ransac -> interpolate -> filtfilt -> crop -> epoch.
PrepResult prep_recording(const Recording& rec, const Montage& montage, const PrepOptions& opts);

struct PrepFileResult {
  std::filesystem::path path;
  std::string subject;
  std::vector<std::string> bad;
  std::string error;  // empty on success
};

// Runs prep_recording over container files, `jobs` at a time; results keep
// input order. Epochs from the successful files are concatenated.
EpochSet prep_files(const std::vector<std::filesystem::path>& paths, const Montage& montage,
                    const PrepOptions& opts, std::size_t jobs,
                    std::vector<PrepFileResult>& results);

// "FULL-256", "COGN-26" or "custom-<C>".
std::string dataset_name(const std::vector<std::string>& channels);

// Per-fold seed: seed xor splitmix64(fold).
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

struct CrossvalOptions {
  ModelSpec spec;
  std::size_t folds = 6;
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::function<void(const std::string&)> log;
};

struct CrossvalResult {
  FoldPlan plan;
  std::vector<TrainHistory> histories;
  CvReport report;
  ParamAudit audit;
  nlohmann::json run;  // seed, folds, epochs, batch size, model spec
};

CrossvalResult run_crossval(const EpochSet& data, const CrossvalOptions& opts);

// folds.json, history_fold<i>.ndjson, report.json, report.md, report.csv.
void write_crossval_artifacts(const std::filesystem::path& dir, const CrossvalResult& res);

}  // namespace nstate
