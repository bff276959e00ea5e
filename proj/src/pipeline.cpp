#include "nstate/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "nstate/rng.hpp"

namespace nstate {

using nlohmann::json;

PrepResult prep_recording(const Recording& rec, const Montage& montage, const PrepOptions& opts) {
  rec.validate();
  for (const auto& name : rec.channels)
    if (!montage.contains(name))
      throw ContractError("recording " + rec.subject + ": channel '" + name +
                          "' missing from montage");
  PrepResult res;
  Recording work = rec;
  if (opts.ransac) {
    res.bad = ransac_bad_channels(rec, montage, opts.ransac_params);
    if (!res.bad.empty()) work = interpolate_channels(rec, montage, res.bad);
  }
  work.provenance["ransac_bad"] = res.bad;
  const FirFilter filter = design_bandpass(opts.low_hz, opts.high_hz, rec.fs);
  work.data = filtfilt(work.data, filter);
  work.provenance["bandpass"] = {opts.low_hz, opts.high_hz};
  work = crop(work, opts.crop_start, opts.crop_end);
  res.epochs = epoch(work, opts.epoch_seconds);
  return res;
}

EpochSet prep_files(const std::vector<std::filesystem::path>& paths, const Montage& montage,
                    const PrepOptions& opts, std::size_t jobs,
                    std::vector<PrepFileResult>& results) {
  const std::size_t n = paths.size();
  results.assign(n, {});
  std::vector<EpochSet> sets(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      results[i].path = paths[i];
      try {
        const Recording rec = read_recording(paths[i]);
        results[i].subject = rec.subject;
        auto r = prep_recording(rec, montage, opts);
        results[i].bad = std::move(r.bad);
        sets[i] = std::move(r.epochs);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return concat(sets);
}

std::string dataset_name(const std::vector<std::string>& channels) {
  if (channels == cogn26_channels()) return kCogn26Name;
  if (channels.size() == 256) return "FULL-256";
  return "custom-" + std::to_string(channels.size());
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return seed ^ splitmix64(fold); }

CrossvalResult run_crossval(const EpochSet& data, const CrossvalOptions& opts) {
  data.validate();
  require(data.size() > 0, "crossval: empty data set");
  require(data.n_channels() == opts.spec.channels && data.n_samples() == opts.spec.timesteps,
          "crossval: data is " + std::to_string(data.n_channels()) + "x" +
              std::to_string(data.n_samples()) + " but the model expects " +
              std::to_string(opts.spec.channels) + "x" + std::to_string(opts.spec.timesteps));
  CrossvalResult res;
  res.audit = param_audit(opts.spec);
  res.run = {{"seed", opts.seed},
             {"folds", opts.folds},
             {"epochs", opts.epochs},
             {"batch_size", opts.batch_size},
             {"spec", opts.spec.to_json()}};
  res.plan = stratified_group_kfold(data.labels, data.groups, opts.folds, opts.seed);
  std::vector<MetricsRecord> records;
  for (std::size_t i = 0; i < res.plan.folds.size(); ++i) {
    const Fold& f = res.plan.folds[i];
    const EpochSet tr = subset_epochs(data, f.train);
    const EpochSet va = subset_epochs(data, f.val);
    const std::uint64_t s = fold_seed(opts.seed, i);
    auto model = build_model<float>(opts.spec);
    model.init_params(s);
    TrainOptions to;
    to.epochs = opts.epochs;
    to.batch_size = opts.batch_size;
    to.seed = s;
    to.learning_rate = opts.spec.learning_rate;
    res.histories.push_back(train(model, tr, va, to));
    const Predictions p = predict(model, va);
    const double loss = bce_loss(p.probabilities, va.labels).loss;
    records.push_back(compute_metrics(confusion(p.labels, va.labels), loss));
    if (opts.log) {
      std::ostringstream os;
      os.precision(4);
      os << std::fixed << "fold " << i + 1 << "/" << res.plan.folds.size() << ": acc "
         << records.back().accuracy << " loss " << loss;
      opts.log(os.str());
    }
  }
  res.report = aggregate(records, to_string(opts.spec.arch), dataset_name(data.channels));
  return res;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw FormatError("cannot write " + p.string());
}

}  // namespace

void write_crossval_artifacts(const std::filesystem::path& dir, const CrossvalResult& res) {
  std::filesystem::create_directories(dir);
  write_text(dir / "folds.json", res.plan.to_json().dump(2) + "\n");
  for (std::size_t i = 0; i < res.histories.size(); ++i)
    write_text(dir / ("history_fold" + std::to_string(i + 1) + ".ndjson"),
               res.histories[i].to_ndjson());
  json report = res.report.to_json();
  report["run"] = res.run;
  report["param_audit"] = res.audit.to_json();
  write_text(dir / "report.json", report.dump(2) + "\n");
  write_text(dir / "report.md", render_report(res.report, ReportFormat::kMarkdown));
  write_text(dir / "report.csv", render_report(res.report, ReportFormat::kCsv));
}

}  // namespace nstate
