#include "nstate/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "nstate/model_io.hpp"
#include "nstate/pipeline.hpp"
#include "nstate/synth.hpp"

namespace nstate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kContainerExt = ".nse";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw FormatError("cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw FormatError("cannot write " + p.string());
}

fs::path montage_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NSTATE_MONTAGE"); env && *env) return env;
  throw UsageError("no montage: pass --montage or set NSTATE_MONTAGE");
}

// cogn26 | full | all | path to a file with one channel name per line
std::optional<std::vector<std::string>> resolve_subset(const std::string& subset) {
  if (subset.empty() || subset == "full" || subset == "all") return std::nullopt;
  if (subset == "cogn26" || subset == "COGN-26") return cogn26_channels();
  if (!fs::exists(subset)) throw UsageError("unknown subset '" + subset + "'");
  std::vector<std::string> names;
  std::istringstream is(read_file(subset));
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  if (names.empty()) throw FormatError(subset + ": empty channel list");
  return names;
}

EpochSet apply_subset(const EpochSet& set, const std::string& subset) {
  auto names = resolve_subset(subset);
  return names ? select_channels(set, *names) : set;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == kContainerExt) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw FormatError(in + ": no " + kContainerExt + " files");
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::size_t subjects = 26;
  double delta = 2.0;
  std::uint64_t seed = 0;
  std::size_t channels = 32;
  std::string artifacts;
  std::string out_dir;
  double minutes = 20.0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.subjects == 0 || a.subjects % 2 != 0)
    throw UsageError("--subjects must be even and positive (half GI, half MT), got " +
                     std::to_string(a.subjects));
  SynthOptions o;
  o.n_subjects = a.subjects;
  o.delta = a.delta;
  o.seed = a.seed;
  o.minutes = a.minutes;
  o.artifacts = parse_artifacts(a.artifacts);
  const Montage m = synthetic_montage(a.channels);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  json listing = json::array();
  for (std::size_t i = 0; i < o.n_subjects; ++i) {
    // one subject in memory at a time
    const Recording r = synth_subject(o, m, i);
    const auto p = dir / (r.subject + kContainerExt);
    write_container(p, r);
    out << p.string() << '\t' << to_string(r.condition) << '\n';
    listing.push_back({{"file", p.filename().string()},
                       {"subject", r.subject},
                       {"condition", to_string(r.condition)}});
  }
  save_montage(dir / "montage.csv", m);
  json manifest = {{"montage", "montage.csv"},
                   {"seed", a.seed},
                   {"delta", a.delta},
                   {"channels", a.channels},
                   {"minutes", a.minutes},
                   {"artifacts", to_string(o.artifacts)},
                   {"recordings", listing}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// ------------------------------------------------------------------ prep

struct PrepArgs {
  std::vector<std::string> inputs;
  std::string montage;
  std::string out;
  std::string subset;
  bool no_ransac = false;
  std::uint64_t ransac_seed = 0;
  std::size_t jobs = 1;
  double crop_start = 600.0, crop_end = 720.0;
  double low = 1.0, high = 45.0;
};

int cmd_prep(const PrepArgs& a, std::ostream& out, std::ostream& err) {
  const Montage m = load_montage(montage_path(a.montage));
  PrepOptions o;
  o.ransac = !a.no_ransac;
  o.ransac_params.seed = a.ransac_seed;
  o.crop_start = a.crop_start;
  o.crop_end = a.crop_end;
  o.low_hz = a.low;
  o.high_hz = a.high;
  const auto paths = expand_inputs(a.inputs);
  std::vector<PrepFileResult> results;
  EpochSet set = prep_files(paths, m, o, a.jobs, results);
  int failures = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) {
      err << "error: " << r.path.string() << ": " << r.error << '\n';
      ++failures;
      continue;
    }
    err << r.subject << ": " << r.bad.size() << " channel(s) flagged\n";
    for (const auto& b : r.bad) out << b << '\n';
  }
  if (failures > 0) {
    err << failures << " of " << results.size() << " file(s) failed; nothing written\n";
    return 1;
  }
  set = apply_subset(set, a.subset);
  write_container(a.out, set);
  err << "wrote " << set.size() << " epochs x " << set.n_channels() << " channels to " << a.out
      << '\n';
  return 0;
}

// ------------------------------------------------------------------ epoch

struct EpochArgs {
  std::string input, out;
  double seconds = 1.0;
  std::optional<double> crop_start, crop_end;
};

int cmd_epoch(const EpochArgs& a, std::ostream& err) {
  Recording rec = read_recording(a.input);
  if (a.crop_start.has_value() != a.crop_end.has_value())
    throw UsageError("--crop-start and --crop-end go together");
  if (a.crop_start) rec = crop(rec, *a.crop_start, *a.crop_end);
  const EpochSet set = epoch(rec, a.seconds);
  write_container(a.out, set);
  err << "wrote " << set.size() << " epochs to " << a.out << '\n';
  return 0;
}

// ------------------------------------------------------------------ psd

struct PsdArgs {
  std::string input, out;
};

int cmd_psd(const PsdArgs& a, std::ostream& out) {
  auto payload = read_container(a.input);
  std::vector<std::string> channels;
  PsdEstimate psd;
  if (auto* rec = std::get_if<Recording>(&payload)) {
    channels = rec->channels;
    psd = welch_psd(rec->data.cast<double>(), rec->fs);
  } else {
    const auto& set = std::get<EpochSet>(payload);
    require(set.size() > 0, "psd: empty epoch set");
    channels = set.channels;
    const std::size_t c = set.n_channels(), s = set.n_samples();
    // average of per-epoch estimates
    for (std::size_t e = 0; e < set.size(); ++e) {
      TensorD x({c, s});
      for (std::size_t i = 0; i < c * s; ++i) x[i] = set.epochs[e * c * s + i];
      auto p = welch_psd(x, set.fs, std::min<std::size_t>(250, s));
      if (e == 0) {
        psd = std::move(p);
      } else {
        for (std::size_t i = 0; i < psd.power.size(); ++i) psd.power[i] += p.power[i];
      }
    }
    for (auto& v : psd.power.storage()) v /= double(set.size());
  }
  std::ostringstream os;
  os << "channel,band,power_uv2\n";
  std::vector<std::vector<double>> per_band;
  for (const auto& b : standard_bands()) per_band.push_back(band_power(psd, b));
  for (std::size_t ch = 0; ch < channels.size(); ++ch)
    for (std::size_t b = 0; b < standard_bands().size(); ++b)
      os << channels[ch] << ',' << standard_bands()[b].name << ','
         << fmt("%.6g", per_band[b][ch]) << '\n';
  if (a.out.empty() || a.out == "-")
    out << os.str();
  else
    write_file(a.out, os.str());
  return 0;
}

// ------------------------------------------------------------------ train / crossval

struct TrainArgs {
  std::string input, model, subset, out, history;
  std::uint64_t seed = 0;
  std::size_t epochs = 100, batch = 64, folds = 6, val_fold = 1;
  std::optional<double> lr;
  bool quiet = false;
};

ModelSpec spec_for(const std::string& model, const EpochSet& set, std::optional<double> lr) {
  Architecture arch;
  try {
    arch = architecture_from_string(model);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  ModelSpec spec = make_spec(arch, set.n_channels(), set.n_samples());
  if (lr) {
    if (!(*lr > 0.0)) throw UsageError("--lr must be positive");
    spec.learning_rate = *lr;
  }
  return spec;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const EpochSet set = apply_subset(read_epochs(a.input), a.subset);
  const ModelSpec spec = spec_for(a.model, set, a.lr);
  if (a.val_fold < 1 || a.val_fold > a.folds) throw UsageError("--val-fold must be in [1, folds]");
  const FoldPlan plan = stratified_group_kfold(set.labels, set.groups, a.folds, a.seed);
  const Fold& f = plan.folds[a.val_fold - 1];
  const EpochSet tr = subset_epochs(set, f.train), va = subset_epochs(set, f.val);
  auto model = build_model<float>(spec);
  model.init_params(a.seed);
  TrainOptions o;
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  o.seed = a.seed;
  o.learning_rate = spec.learning_rate;
  if (!a.quiet)
    o.on_epoch = [&](const EpochRecord& r) {
      err << "epoch " << r.epoch << ": loss " << fmt("%.4f", r.train_loss) << " acc "
          << fmt("%.4f", r.train_acc) << " val_loss " << fmt("%.4f", r.val_loss) << " val_acc "
          << fmt("%.4f", r.val_acc) << '\n';
    };
  const TrainHistory h = train(model, tr, va, o);
  save_model(a.out, model, spec, a.seed);
  const fs::path hist = a.history.empty() ? fs::path(a.out + ".history.ndjson") : fs::path(a.history);
  write_file(hist, h.to_ndjson());
  const Predictions p = predict(model, va);
  const MetricsRecord m =
      compute_metrics(confusion(p.labels, va.labels), bce_loss(p.probabilities, va.labels).loss);
  out << m.to_json().dump() << '\n';
  return 0;
}

int cmd_crossval(const TrainArgs& a, const std::string& out_dir, std::ostream& out,
                 std::ostream& err) {
  const EpochSet set = apply_subset(read_epochs(a.input), a.subset);
  CrossvalOptions o;
  o.spec = spec_for(a.model, set, a.lr);
  o.folds = a.folds;
  o.seed = a.seed;
  o.epochs = a.epochs;
  o.batch_size = a.batch;
  if (!a.quiet) o.log = [&](const std::string& s) { err << s << '\n'; };
  const ParamAudit audit = param_audit(o.spec);
  out << "# " << audit.model << " on " << dataset_name(set.channels) << ": " << audit.total
      << " parameters\n";
  const CrossvalResult res = run_crossval(set, o);
  const fs::path dir = out_dir.empty()
                           ? fs::path(a.input).parent_path() / ("crossval_" + to_string(o.spec.arch))
                           : fs::path(out_dir);
  write_crossval_artifacts(dir, res);
  out << render_report(res.report, ReportFormat::kMarkdown);
  err << "artifacts in " << dir.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------ audit / report

int cmd_audit(const std::string& model, std::size_t channels, bool as_json, std::ostream& out) {
  Architecture arch;
  try {
    arch = architecture_from_string(model);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const ParamAudit audit = param_audit(make_spec(arch, channels));
  out << (as_json ? audit.to_json().dump(2) + "\n" : audit.render());
  return 0;
}

int cmd_report(const std::string& input, const std::string& format, std::ostream& out) {
  const std::string text = read_file(input);
  const ReportFormat f = format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    j = nullptr;  // not a single document: try NDJSON history
  }
  if (j.is_object() && j.contains("folds")) {
    try {
      out << render_report(CvReport::from_json(j), f);
    } catch (const json::exception& e) {
      throw FormatError(input + ": not a report: " + e.what());
    }
    return 0;
  }
  const TrainHistory h = TrainHistory::from_ndjson(text);
  const bool csv = f == ReportFormat::kCsv;
  out << (csv ? "Epoch,TrainLoss,TrainACC,ValLoss,ValACC\n"
              : "| Epoch | TrainLoss | TrainACC | ValLoss | ValACC |\n|---|---|---|---|---|\n");
  for (const auto& r : h.records) {
    const std::vector<std::string> cells = {std::to_string(r.epoch), fmt("%.4f", r.train_loss),
                                            fmt("%.4f", r.train_acc), fmt("%.4f", r.val_loss),
                                            fmt("%.4f", r.val_acc)};
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << (csv ? (i ? "," : "") : "| ") << cells[i] << (csv ? "" : " ");
    out << (csv ? "\n" : "|\n");
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subject-wise EEG relaxation-state classification pipeline", "nstate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nstate 0.1.0");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-condition cohort");
  synth->add_option("--subjects", sa.subjects, "Number of subjects (even; half GI, half MT)")
      ->capture_default_str();
  synth->add_option("--delta", sa.delta, "Condition oscillation amplitude / baseline RMS")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--seed", sa.seed, "Generator seed")->capture_default_str();
  synth->add_option("--channels", sa.channels, "Channel count of the synthetic net (1-256)")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  synth->add_option("--artifacts", sa.artifacts,
                    "Injected artifacts, e.g. flat:E5,noise:E7 or noise:E7:3");
  synth->add_option("--minutes", sa.minutes, "Recording length in minutes")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--out-dir", sa.out_dir, "Output directory")->required();

  PrepArgs pa;
  auto* prep = app.add_subcommand("prep", "Detect/interpolate bad channels, filter, crop, epoch");
  prep->add_option("inputs", pa.inputs, "Continuous containers or directories of them")
      ->required();
  prep->add_option("--montage", pa.montage, "Montage CSV (default: $NSTATE_MONTAGE)");
  prep->add_option("--out", pa.out, "Output epoch container")->required();
  prep->add_option("--subset", pa.subset, "Channel subset: cogn26, full, or a name-list file");
  prep->add_flag("--no-ransac", pa.no_ransac, "Skip bad-channel detection");
  prep->add_option("--ransac-seed", pa.ransac_seed, "RANSAC seed")->capture_default_str();
  prep->add_option("--jobs", pa.jobs, "Recordings processed in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prep->add_option("--crop-start", pa.crop_start, "Crop start (s)")->capture_default_str();
  prep->add_option("--crop-end", pa.crop_end, "Crop end (s)")->capture_default_str();
  prep->add_option("--low", pa.low, "Band-pass low edge (Hz)")->capture_default_str();
  prep->add_option("--high", pa.high, "Band-pass high edge (Hz)")->capture_default_str();

  EpochArgs ea;
  auto* ep = app.add_subcommand("epoch", "Split a continuous container into epochs");
  ep->add_option("--input", ea.input, "Continuous container")->required();
  ep->add_option("--out", ea.out, "Output epoch container")->required();
  ep->add_option("--seconds", ea.seconds, "Epoch length (s)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ep->add_option("--crop-start", ea.crop_start, "Crop start (s) before epoching");
  ep->add_option("--crop-end", ea.crop_end, "Crop end (s) before epoching");

  PsdArgs psa;
  auto* psd = app.add_subcommand("psd", "Welch band power per channel as CSV");
  psd->add_option("--input", psa.input, "Continuous or epoch container")->required();
  psd->add_option("--out", psa.out, "Output CSV (default: stdout)");

  TrainArgs ta;
  std::string cv_out;
  auto add_train_flags = [&](CLI::App* c) {
    c->add_option("--input", ta.input, "Epoch container")->required();
    c->add_option("--model", ta.model, "eegnet | lstm | cnn1d | cnnlstm")->required();
    c->add_option("--seed", ta.seed, "Seed for initialization, shuffling and folds")->required();
    c->add_option("--epochs", ta.epochs, "Training epochs")->capture_default_str();
    c->add_option("--batch-size", ta.batch, "Mini-batch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c->add_option("--lr", ta.lr, "Learning-rate override (default per model)");
    c->add_option("--folds", ta.folds, "Number of subject-wise folds")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    c->add_option("--subset", ta.subset, "Channel subset: cogn26, full, or a name-list file");
    c->add_flag("--quiet", ta.quiet, "No per-epoch / per-fold progress on stderr");
  };
  auto* tr = app.add_subcommand("train", "Train one model on one subject-wise split");
  add_train_flags(tr);
  tr->add_option("--val-fold", ta.val_fold, "Fold used for validation (1-based)")
      ->capture_default_str();
  tr->add_option("--out", ta.out, "Output weights file")->required();
  tr->add_option("--history", ta.history, "History NDJSON (default: <out>.history.ndjson)");
  auto* cv = app.add_subcommand("crossval", "Subject-wise k-fold cross-validation");
  add_train_flags(cv);
  cv->add_option("--out-dir", cv_out, "Artifact directory (default: beside the input)");

  std::string am_model;
  std::size_t am_channels = 26;
  bool am_json = false;
  auto* am = app.add_subcommand("audit-params", "Layer-by-layer parameter audit");
  am->add_option("--model", am_model, "eegnet | lstm | cnn1d | cnnlstm")->required();
  am->add_option("--channels", am_channels, "Input channels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  am->add_flag("--json", am_json, "Emit JSON");

  std::string rp_input, rp_format = "markdown";
  auto* rp = app.add_subcommand("report", "Render a cross-validation report or training history");
  rp->add_option("--input", rp_input, "report.json or history NDJSON")->required();
  rp->add_option("--format", rp_format, "markdown | csv")
      ->check(CLI::IsMember({"markdown", "csv"}))
      ->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(sa, out);
    if (*prep) return cmd_prep(pa, out, err);
    if (*ep) return cmd_epoch(ea, err);
    if (*psd) return cmd_psd(psa, out);
    if (*tr) return cmd_train(ta, out, err);
    if (*cv) return cmd_crossval(ta, cv_out, out, err);
    if (*am) return cmd_audit(am_model, am_channels, am_json, out);
    if (*rp) return cmd_report(rp_input, rp_format, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace nstate
