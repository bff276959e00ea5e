#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "nstate/data.hpp"
#include "nstate/dsp.hpp"
#include "nstate/montage.hpp"
#include "nstate/rng.hpp"
#include "nstate/splitter.hpp"
#include "nstate/synth.hpp"

using namespace nstate;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nstate_data";
  fs::create_directories(dir);
  return dir / name;
}

Recording ramp(std::size_t c, std::size_t n, const std::string& subject = "sub-01") {
  Recording r;
  r.subject = subject;
  r.condition = Condition::kGI;
  for (std::size_t i = 0; i < c; ++i) r.channels.push_back("E" + std::to_string(i + 1));
  r.data = TensorF({c, n});
  for (std::size_t i = 0; i < c * n; ++i) r.data[i] = float(i) * 0.5f - 3.25f;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("container round trip is bit-exact") {
  Recording r = ramp(3, 1000);
  r.data[7] = -0.0f;
  r.data[8] = 1e-40f;
  r.provenance["note"] = "x";
  write_container(tmp("r.nse"), r);
  const Recording back = read_recording(tmp("r.nse"));
  CHECK(back.channels == r.channels);
  CHECK(back.subject == r.subject);
  CHECK(back.condition == r.condition);
  CHECK(back.fs == r.fs);
  CHECK(back.provenance == r.provenance);
  CHECK(std::memcmp(back.data.data(), r.data.data(), r.data.size() * sizeof(float)) == 0);

  const EpochSet e = epoch(r, 1.0);
  write_container(tmp("e.nse"), e);
  const EpochSet eb = read_epochs(tmp("e.nse"));
  CHECK(eb.labels == e.labels);
  CHECK(eb.groups == e.groups);
  CHECK(eb.epochs == e.epochs);
  CHECK(eb.provenance == e.provenance);

  CHECK_THROWS_AS(read_epochs(tmp("r.nse")), FormatError);
  CHECK_THROWS_AS(read_recording(tmp("e.nse")), FormatError);
}

TEST_CASE("container corruption is reported") {
  write_container(tmp("ok.nse"), ramp(2, 300));
  std::string bytes = slurp(tmp("ok.nse"));
  std::ofstream(tmp("cut.nse"), std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  CHECK_THROWS_AS(read_recording(tmp("cut.nse")), FormatError);
  std::ofstream(tmp("long.nse"), std::ios::binary) << bytes + "abcd";
  CHECK_THROWS_AS(read_recording(tmp("long.nse")), FormatError);
  std::ofstream(tmp("hdr.nse"), std::ios::binary) << bytes.substr(0, 20);
  CHECK_THROWS_AS(read_recording(tmp("hdr.nse")), FormatError);
  std::string bad = bytes;
  bad[3] = 'X';
  std::ofstream(tmp("magic.nse"), std::ios::binary) << bad;
  CHECK_THROWS_AS(read_recording(tmp("magic.nse")), FormatError);
  CHECK_THROWS_AS(read_recording(tmp("absent.nse")), FormatError);
  Recording nan = ramp(2, 300);
  nan.data[5] = std::nanf("");
  CHECK_THROWS_AS(write_container(tmp("nan.nse"), nan), NumericError);
}

TEST_CASE("crop and epoch counts") {
  const Recording r = ramp(2, 250 * 780);
  const Recording c = crop(r, 600.0, 720.0);
  CHECK(c.n_samples() == 30000);
  CHECK(c.data[0] == r.data[150000]);
  const EpochSet e = epoch(c);
  CHECK(e.size() == 120);
  CHECK(e.n_samples() == 250);
  CHECK(e.provenance["sub-01"]["dropped_samples"] == 0);
  CHECK_THROWS_AS(crop(r, 600.0, 900.0), ContractError);
  CHECK_THROWS_AS(crop(r, 10.0, 5.0), ContractError);

  Rng rng(2, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 250 + rng.below(5000);
    const EpochSet s = epoch(ramp(1, n));
    CHECK(s.size() * 250 <= n);
    CHECK(n - s.size() * 250 < 250);
  }
  CHECK_THROWS_AS(epoch(ramp(1, 200)), ContractError);
}

TEST_CASE("labels stay attached to their epochs") {
  // sentinel: every sample of epoch i on channel j holds 1000*i + j
  EpochSet s;
  const std::size_t e = 9, c = 4;
  for (std::size_t j = 0; j < c; ++j) s.channels.push_back("E" + std::to_string(j + 1));
  s.epochs = TensorF({e, c, 250});
  for (std::size_t i = 0; i < e; ++i) {
    s.labels.push_back(int(i % 3 == 0));
    s.groups.push_back("g" + std::to_string(i));
    for (std::size_t j = 0; j < c; ++j)
      std::fill_n(s.epochs.data() + (i * c + j) * 250, 250, float(1000 * i + j));
  }
  const EpochSet sel = select_channels(s, {"E3", "E1"});
  CHECK(sel.channels == std::vector<std::string>{"E3", "E1"});
  CHECK(sel.labels == s.labels);
  CHECK(sel.groups == s.groups);
  for (std::size_t i = 0; i < e; ++i) {
    CHECK(sel.epochs[(i * 2 + 0) * 250 + 17] == float(1000 * i + 2));
    CHECK(sel.epochs[(i * 2 + 1) * 250 + 17] == float(1000 * i + 0));
  }
  CHECK(select_channels(s, s.channels).epochs == s.epochs);
  CHECK_THROWS_AS(select_channels(s, {"E999"}), ContractError);

  const EpochSet sub = subset_epochs(s, {8, 0, 4});
  CHECK(sub.labels == std::vector<int>{0, 1, 0});
  CHECK(sub.groups == std::vector<std::string>{"g8", "g0", "g4"});
  CHECK(sub.epochs[0] == 8000.0f);
  const EpochSet both = concat({sub, s});
  CHECK(both.size() == 12);
  CHECK(both.epochs[3 * 4 * 250] == 0.0f);

  Recording r = ramp(3, 1000);
  const EpochSet ep = epoch(r, 1.0);
  for (std::size_t i = 0; i < ep.size(); ++i)
    CHECK(ep.epochs[(i * 3 + 1) * 250] == r.data[1 * 1000 + i * 250]);
}

TEST_CASE("COGN-26 subset of a 256-channel set") {
  const Montage m = synthetic_montage(256);
  EpochSet s;
  s.channels = m.names;
  s.epochs = TensorF({2, 256, 250});
  s.labels = {0, 1};
  s.groups = {"a", "b"};
  const EpochSet c = select_channels(s, cogn26_channels());
  CHECK(c.n_channels() == 26);
}

TEST_CASE("splitter") {
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (int s = 0; s < 26; ++s)
    for (int e = 0; e < 120; ++e) {
      labels.push_back(s % 2 == 0);
      groups.push_back("s" + std::to_string(s));
    }
  const FoldPlan plan = stratified_group_kfold(labels, groups, 6, 7);
  REQUIRE(plan.folds.size() == 6);
  for (const auto& f : plan.folds) {
    CHECK((f.val.size() == 480 || f.val.size() == 600));
    std::set<int> seen;
    for (auto i : f.val) seen.insert(labels[i]);
    CHECK(seen.size() == 2);
  }
  CHECK(FoldPlan::from_json(plan.to_json()).to_json() == plan.to_json());
  CHECK(stratified_group_kfold(labels, groups, 6, 7).to_json() == plan.to_json());

  // six groups: one per fold
  std::vector<int> l6;
  std::vector<std::string> g6;
  for (int s = 0; s < 6; ++s)
    for (int e = 0; e < 5; ++e) {
      l6.push_back(s % 2);
      g6.push_back("g" + std::to_string(s));
    }
  for (const auto& f : stratified_group_kfold(l6, g6, 6, 1).folds) {
    std::set<std::string> gs;
    for (auto i : f.val) gs.insert(g6[i]);
    CHECK(gs.size() == 1);
  }
  CHECK_THROWS_AS(stratified_group_kfold(l6, g6, 7, 1), ContractError);
  auto mixed = l6;
  mixed[1] = 1 - mixed[1];
  CHECK_THROWS_AS(stratified_group_kfold(mixed, g6, 3, 1), ContractError);

  // randomized instances: partition and disjointness
  Rng rng(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(6), ng = k + rng.below(20);
    std::vector<int> l;
    std::vector<std::string> g;
    std::vector<int> glabel(ng);
    for (auto& v : glabel) v = int(rng.below(2));
    const std::size_t n = ng + rng.below(300);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t gi = i < ng ? i : rng.below(ng);
      g.push_back("g" + std::to_string(gi));
      l.push_back(glabel[gi]);
    }
    const FoldPlan p = stratified_group_kfold(l, g, k, trial);
    std::vector<int> hits(n, 0);
    for (const auto& f : p.folds) {
      CHECK(f.train.size() + f.val.size() == n);
      std::set<std::string> tg, vg;
      for (auto i : f.train) tg.insert(g[i]);
      for (auto i : f.val) {
        vg.insert(g[i]);
        ++hits[i];
      }
      for (const auto& x : vg) CHECK(tg.count(x) == 0);
      CHECK(!f.val.empty());
    }
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("artifact spec parsing") {
  const auto a = parse_artifacts("flat:E5,noise:E7:3");
  REQUIRE(a.size() == 2);
  CHECK(a[0].kind == ArtifactKind::kFlat);
  CHECK(a[0].channel == "E5");
  CHECK(a[1].kind == ArtifactKind::kNoise);
  CHECK(a[1].scale == 3.0);
  CHECK(parse_artifacts("").empty());
  CHECK(parse_artifacts(to_string(a)).size() == 2);
  CHECK_THROWS_AS(parse_artifacts("spike:E1"), ContractError);
  CHECK_THROWS_AS(parse_artifacts("noise:E1:-2"), ContractError);
}

TEST_CASE("synthetic cohort") {
  const Montage m = synthetic_montage(32);
  SynthOptions o;
  o.n_subjects = 2;
  o.minutes = 0.5;
  o.seed = 3;
  o.delta = 3.0;
  const auto a = synth_cohort(o, m);
  const auto b = synth_cohort(o, m);
  REQUIRE(a.size() == 2);
  CHECK(a[0].condition == Condition::kGI);
  CHECK(a[1].condition == Condition::kMT);
  CHECK(a[0].subject == "sub-01");
  CHECK(a[0].n_samples() == 7500);
  CHECK(a[0].data == b[0].data);
  CHECK(a[1].data == b[1].data);
  o.seed = 4;
  CHECK(synth_cohort(o, m)[0].data != a[0].data);
  o.n_subjects = 3;
  CHECK_THROWS_AS(synth_cohort(o, m), ContractError);

  // posterior alpha power, GI vs MT
  auto alpha = [&](const Recording& r) {
    TensorD x({26, r.n_samples()});
    std::size_t row = 0;
    for (const auto& name : cogn26_channels()) {
      const std::size_t ch = m.index_of(name);
      for (std::size_t i = 0; i < r.n_samples(); ++i) x[row * r.n_samples() + i] = r.data[ch * r.n_samples() + i];
      ++row;
    }
    const auto p = band_power(welch_psd(x), band_definition(Band::kAlpha));
    return std::accumulate(p.begin(), p.end(), 0.0);
  };
  CHECK(alpha(a[0]) >= 5.0 * alpha(a[1]));

  // baseline scale: overall RMS near 20 uV at delta 0
  o.n_subjects = 2;
  o.delta = 0.0;
  const auto z = synth_cohort(o, m);
  double ss = 0.0;
  for (float v : z[1].data.values()) ss += double(v) * v;
  const double rms = std::sqrt(ss / double(z[1].data.size())) / z[1].provenance["gain"].get<double>();
  CHECK(rms == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("injected flat channel is flagged") {
  const Montage m = synthetic_montage(32);
  SynthOptions o;
  o.n_subjects = 2;
  o.minutes = 1.0;
  o.seed = 1;
  o.artifacts = parse_artifacts("flat:" + m.names[3] + ",noise:" + m.names[20]);
  const auto recs = synth_cohort(o, m);
  for (const auto& r : recs) {
    RansacParams p;
    p.seed = 2;
    auto bad = ransac_bad_channels(r, m, p);
    CHECK(bad == std::vector<std::string>{m.names[3], m.names[20]});
  }
  o.artifacts = parse_artifacts("flat:E999");
  CHECK_THROWS_AS(synth_cohort(o, m), ContractError);
}
