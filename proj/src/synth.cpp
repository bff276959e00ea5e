#include "nstate/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nstate/rng.hpp"

namespace nstate {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSensorNoise = 2.0;  // uV

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(dot(v, v));
    if (n > 1e-6) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

// Kellet's refined pink filter on white noise, scaled to unit RMS.
std::vector<double> pink_noise(Rng& rng, std::size_t n) {
  constexpr std::size_t kBurnIn = 8192;
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (std::size_t i = 0; i < n + kBurnIn; ++i) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    const double p = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    if (i >= kBurnIn) out[i - kBurnIn] = p;
  }
  double mean = 0.0, ss = 0.0;
  for (double v : out) mean += v;
  mean /= double(n);
  for (double& v : out) {
    v -= mean;
    ss += v * v;
  }
  const double rms = std::sqrt(ss / double(n));
  for (double& v : out) v /= rms;
  return out;
}

}  // namespace

std::vector<ArtifactSpec> parse_artifacts(const std::string& text) {
  std::vector<ArtifactSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3 || parts[1].empty())
      throw ContractError("bad artifact '" + item + "' (expected kind:channel[:scale])");
    ArtifactSpec a;
    if (parts[0] == "flat") {
      a.kind = ArtifactKind::kFlat;
      if (parts.size() == 3) throw ContractError("flat artifact takes no scale: '" + item + "'");
    } else if (parts[0] == "noise") {
      a.kind = ArtifactKind::kNoise;
    } else {
      throw ContractError("unknown artifact kind '" + parts[0] + "'");
    }
    a.channel = parts[1];
    if (parts.size() == 3) {
      try {
        a.scale = std::stod(parts[2]);
      } catch (const std::exception&) {
        throw ContractError("bad artifact scale in '" + item + "'");
      }
      if (!(a.scale > 0.0)) throw ContractError("artifact scale must be positive");
    }
    out.push_back(a);
  }
  return out;
}

std::string to_string(const std::vector<ArtifactSpec>& artifacts) {
  std::string s;
  for (const auto& a : artifacts) {
    if (!s.empty()) s += ',';
    if (a.kind == ArtifactKind::kFlat) {
      s += "flat:" + a.channel;
    } else {
      std::ostringstream os;
      os << "noise:" << a.channel << ':' << a.scale;
      s += os.str();
    }
  }
  return s;
}

std::string subject_id(std::size_t index) {
  std::ostringstream os;
  os << "sub-" << (index + 1 < 10 ? "0" : "") << index + 1;
  return os.str();
}

Recording synth_subject(const SynthOptions& opts, const Montage& montage, std::size_t index) {
  require(opts.delta >= 0.0, "synth: delta must be >= 0");
  require(opts.minutes > 0.0, "synth: minutes must be positive");
  require(opts.sources >= 1, "synth: need at least one source");
  require(montage.size() >= 1, "synth: empty montage");
  for (const auto& a : opts.artifacts)
    if (!montage.contains(a.channel))
      throw ContractError("artifact channel '" + a.channel + "' not in montage");

  Rng rng(opts.seed ^ splitmix64(index + 1), streams::kSynth);
  const std::size_t c = montage.size();
  const auto n = static_cast<std::size_t>(std::llround(opts.minutes * 60.0 * kSampleRate));
  const Condition cond = index % 2 == 0 ? Condition::kGI : Condition::kMT;
  const double gain = std::exp(0.2 * rng.normal());

  // background: pink sources through smooth bumps, normalized to the
  // nominal baseline RMS averaged over channels
  std::vector<std::vector<double>> src(opts.sources);
  std::vector<double> mix(c * opts.sources);
  for (std::size_t s = 0; s < opts.sources; ++s) {
    const Vec3 center = random_unit(rng);
    const double kappa = rng.uniform(1.5, 3.0);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    src[s] = pink_noise(rng, n);
    for (std::size_t ch = 0; ch < c; ++ch)
      mix[ch * opts.sources + s] =
          sign * std::exp(kappa * (dot(montage.positions[ch], center) - 1.0));
  }
  std::vector<double> row(n);
  auto background = [&](std::size_t ch) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t s = 0; s < opts.sources; ++s) {
      const double a = mix[ch * opts.sources + s];
      const double* x = src[s].data();
      for (std::size_t i = 0; i < n; ++i) row[i] += a * x[i];
    }
  };
  double ss = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    background(ch);
    for (double v : row) ss += v * v;
  }
  const double scale = kBaselineRms / std::sqrt(ss / double(c * n));

  // condition oscillation with slow amplitude modulation
  const double base_hz = cond == Condition::kGI ? 10.0 : 20.0;
  const double peak_hz = base_hz + rng.uniform(-1.0, 1.0);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double mod_hz = rng.uniform(0.05, 0.2);
  const double mod_phase = rng.uniform(0.0, 2.0 * kPi);
  const Vec3 focus = cond == Condition::kGI ? posterior_pole() : Vec3{0.0, 0.0, 1.0};
  const double amp = opts.delta * kBaselineRms;
  std::vector<double> osc(n, 0.0);
  if (amp > 0.0)
    for (std::size_t i = 0; i < n; ++i) {
      const double t = double(i) / kSampleRate;
      osc[i] = amp * (1.0 + 0.3 * std::sin(2.0 * kPi * mod_hz * t + mod_phase)) *
               std::sin(2.0 * kPi * peak_hz * t + phase);
    }

  Recording rec;
  rec.data = TensorF({c, n});
  for (std::size_t ch = 0; ch < c; ++ch) {
    background(ch);
    const double w = std::exp(2.0 * (dot(montage.positions[ch], focus) - 1.0));
    float* out = rec.data.data() + ch * n;
    for (std::size_t i = 0; i < n; ++i)
      out[i] = static_cast<float>(gain * (scale * row[i] + w * osc[i]) +
                                  kSensorNoise * rng.normal());
  }

  json applied = json::array();
  for (const auto& a : opts.artifacts) {
    float* out = rec.data.data() + montage.index_of(a.channel) * n;
    if (a.kind == ArtifactKind::kFlat) {
      std::fill(out, out + n, 0.0f);
      applied.push_back("flat:" + a.channel);
    } else {
      const double sd = a.scale * kBaselineRms;
      for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(double(out[i]) + sd * rng.normal());
      applied.push_back(to_string(std::vector<ArtifactSpec>{a}));
    }
  }

  rec.fs = kSampleRate;
  rec.channels = montage.names;
  rec.subject = subject_id(index);
  rec.condition = cond;
  rec.provenance = {{"generator", "synth"},
                    {"seed", opts.seed},
                    {"delta", opts.delta},
                    {"gain", gain},
                    {"peak_hz", peak_hz},
                    {"artifacts", applied}};
  return rec;
}

std::vector<Recording> synth_cohort(const SynthOptions& opts, const Montage& montage) {
  if (opts.n_subjects == 0 || opts.n_subjects % 2 != 0)
    throw ContractError("synth: subject count must be even and positive (half GI, half MT), got " +
                        std::to_string(opts.n_subjects));
  std::vector<Recording> out;
  out.reserve(opts.n_subjects);
  for (std::size_t i = 0; i < opts.n_subjects; ++i) out.push_back(synth_subject(opts, montage, i));
  return out;
}

std::vector<std::filesystem::path> write_cohort(const std::filesystem::path& dir,
                                                const std::vector<Recording>& recs,
                                                const Montage& montage) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  json manifest = {{"montage", "montage.csv"}, {"recordings", json::array()}};
  for (const auto& r : recs) {
    const auto p = dir / (r.subject + ".nse");
    write_container(p, r);
    paths.push_back(p);
    manifest["recordings"].push_back({{"file", p.filename().string()},
                                      {"subject", r.subject},
                                      {"condition", to_string(r.condition)}});
  }
  save_montage(dir / "montage.csv", montage);
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw FormatError("cannot write manifest in " + dir.string());
  return paths;
}

}  // namespace nstate
