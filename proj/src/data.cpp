#include "nstate/data.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "nstate/byteio.hpp"

namespace nstate {

using nlohmann::json;

std::string to_string(Condition c) { return c == Condition::kGI ? "GI" : "MT"; }

Condition condition_from_string(const std::string& s) {
  if (s == "GI") return Condition::kGI;
  if (s == "MT") return Condition::kMT;
  throw FormatError("unknown condition '" + s + "'");
}

void Recording::validate() const {
  require(data.rank() == 2, "recording data must be [C x N]");
  require(data.dim(0) == channels.size(), "recording channel count mismatch");
  require(fs > 0.0, "recording sampling rate must be positive");
  if (!data.all_finite()) throw NumericError("recording " + subject + " has non-finite samples");
}

void EpochSet::validate() const {
  if (epochs.empty()) {
    require(labels.empty() && groups.empty(), "empty epoch set with labels");
    return;
  }
  require(epochs.rank() == 3, "epochs must be [E x C x S]");
  require(epochs.dim(0) == labels.size() && labels.size() == groups.size(),
          "epoch/label/group counts disagree");
  require(epochs.dim(1) == channels.size(), "epoch channel count mismatch");
  for (int l : labels) require(l == 0 || l == 1, "labels must be 0 or 1");
}

// ---------------------------------------------------------------- container

namespace {

void write_payload(const std::filesystem::path& path, std::uint8_t kind, const json& header,
                   std::span<const float> data) {
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kContainerMagic, sizeof kContainerMagic);
  os.put(static_cast<char>(kind));
  byteio::write_u32_le(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  byteio::write_f32_le(os, data);
  if (!os) throw FormatError("write failed: " + path.string());
}

void read_samples(std::ifstream& is, const std::filesystem::path& path, TensorF& t) {
  if (!byteio::read_f32_le(is, t.values()))
    throw FormatError(path.string() + ": sample data shorter than header declares");
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(path.string() + ": sample data longer than header declares");
}

}  // namespace

void write_container(const std::filesystem::path& path, const Recording& rec) {
  rec.validate();
  json h = {{"fs", rec.fs},
            {"channels", rec.channels},
            {"n_samples", rec.n_samples()},
            {"subject", rec.subject},
            {"condition", to_string(rec.condition)},
            {"provenance", rec.provenance}};
  write_payload(path, 0, h, rec.data.values());
}

void write_container(const std::filesystem::path& path, const EpochSet& set) {
  set.validate();
  require(!set.epochs.empty(), "cannot write an empty epoch set");
  json h = {{"fs", set.fs},
            {"channels", set.channels},
            {"n_epochs", set.size()},
            {"n_samples", set.n_samples()},
            {"labels", set.labels},
            {"groups", set.groups},
            {"provenance", set.provenance}};
  write_payload(path, 1, h, set.epochs.values());
}

std::variant<Recording, EpochSet> read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8)) throw FormatError(path.string() + ": truncated header");
  if (std::string(magic, 8) != std::string(kContainerMagic, 8))
    throw FormatError(path.string() + ": bad magic (expected NSEEG001)");
  const int kind = is.get();
  if (kind != 0 && kind != 1) throw FormatError(path.string() + ": unknown payload kind");
  const auto len = byteio::read_u32_le(is, path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError(path.string() + ": truncated header");
  json h;
  try {
    h = json::parse(text);
    const auto channels = h.at("channels").get<std::vector<std::string>>();
    if (channels.empty()) throw FormatError(path.string() + ": no channels");
    if (kind == 0) {
      Recording rec;
      rec.fs = h.at("fs");
      rec.channels = channels;
      rec.subject = h.at("subject");
      rec.condition = condition_from_string(h.at("condition"));
      rec.provenance = h.value("provenance", json::object());
      rec.data = TensorF({channels.size(), h.at("n_samples").get<std::size_t>()});
      read_samples(is, path, rec.data);
      return rec;
    }
    EpochSet set;
    set.fs = h.at("fs");
    set.channels = channels;
    set.labels = h.at("labels").get<std::vector<int>>();
    set.groups = h.at("groups").get<std::vector<std::string>>();
    set.provenance = h.value("provenance", json::object());
    const std::size_t n = h.at("n_epochs");
    if (set.labels.size() != n || set.groups.size() != n)
      throw FormatError(path.string() + ": label/group count disagrees with n_epochs");
    set.epochs = TensorF({n, channels.size(), h.at("n_samples").get<std::size_t>()});
    read_samples(is, path, set.epochs);
    return set;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid header: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(path.string() + ": invalid header: " + e.what());
  }
}

Recording read_recording(const std::filesystem::path& path) {
  auto v = read_container(path);
  if (!std::holds_alternative<Recording>(v))
    throw FormatError(path.string() + ": expected a continuous recording, found epochs");
  return std::get<Recording>(std::move(v));
}

EpochSet read_epochs(const std::filesystem::path& path) {
  auto v = read_container(path);
  if (!std::holds_alternative<EpochSet>(v))
    throw FormatError(path.string() + ": expected epochs, found a continuous recording");
  return std::get<EpochSet>(std::move(v));
}

// ---------------------------------------------------------------- epoching

Recording crop(const Recording& rec, double start_s, double end_s) {
  rec.validate();
  require(start_s >= 0.0 && end_s > start_s, "crop: need 0 <= start < end");
  const auto first = static_cast<std::size_t>(std::llround(start_s * rec.fs));
  const auto last = static_cast<std::size_t>(std::llround(end_s * rec.fs));
  if (last > rec.n_samples())
    throw ContractError("crop: recording " + rec.subject + " has " +
                        std::to_string(rec.n_samples()) + " samples, crop end needs " +
                        std::to_string(last));
  Recording out = rec;
  const std::size_t c = rec.n_channels(), n = rec.n_samples(), m = last - first;
  out.data = TensorF({c, m});
  for (std::size_t ch = 0; ch < c; ++ch)
    std::copy_n(rec.data.data() + ch * n + first, m, out.data.data() + ch * m);
  out.provenance["crop"] = {start_s, end_s};
  return out;
}

EpochSet epoch(const Recording& rec, double seconds) {
  rec.validate();
  require(seconds > 0.0, "epoch length must be positive");
  const auto len = static_cast<std::size_t>(std::llround(seconds * rec.fs));
  const std::size_t c = rec.n_channels(), n = rec.n_samples();
  const std::size_t e = n / len;
  if (e == 0)
    throw ContractError("epoch: recording " + rec.subject + " shorter than one epoch");
  EpochSet set;
  set.fs = rec.fs;
  set.channels = rec.channels;
  set.epochs = TensorF({e, c, len});
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(rec.data.data() + ch * n + i * len, len,
                  set.epochs.data() + (i * c + ch) * len);
  set.labels.assign(e, static_cast<int>(rec.condition));
  set.groups.assign(e, rec.subject);
  json p = rec.provenance;
  p["epoch_samples"] = len;
  p["dropped_samples"] = n - e * len;
  set.provenance = {{rec.subject, p}};
  return set;
}

EpochSet select_channels(const EpochSet& set, const std::vector<std::string>& subset) {
  set.validate();
  require(!subset.empty(), "select_channels: empty subset");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < set.channels.size(); ++i) index[set.channels[i]] = i;
  std::vector<std::size_t> pick;
  for (const auto& name : subset) {
    auto it = index.find(name);
    if (it == index.end()) throw ContractError("select_channels: unknown channel '" + name + "'");
    pick.push_back(it->second);
  }
  EpochSet out = set;
  out.channels = subset;
  if (set.epochs.empty()) return out;
  const std::size_t e = set.size(), c = set.n_channels(), s = set.n_samples(), k = pick.size();
  out.epochs = TensorF({e, k, s});
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t j = 0; j < k; ++j)
      std::copy_n(set.epochs.data() + (i * c + pick[j]) * s, s, out.epochs.data() + (i * k + j) * s);
  return out;
}

EpochSet subset_epochs(const EpochSet& set, const std::vector<std::size_t>& indices) {
  EpochSet out;
  out.fs = set.fs;
  out.channels = set.channels;
  out.provenance = set.provenance;
  if (indices.empty()) return out;
  const std::size_t c = set.n_channels(), s = set.n_samples(), stride = c * s;
  out.epochs = TensorF({indices.size(), c, s});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < set.size(), "subset_epochs: index out of range");
    std::copy_n(set.epochs.data() + indices[i] * stride, stride, out.epochs.data() + i * stride);
    out.labels.push_back(set.labels[indices[i]]);
    out.groups.push_back(set.groups[indices[i]]);
  }
  return out;
}

EpochSet concat(const std::vector<EpochSet>& sets) {
  EpochSet out;
  std::size_t total = 0, s_len = 0;
  for (const auto& s : sets) {
    if (s.size() == 0) continue;
    if (total == 0) {
      out.channels = s.channels;
      out.fs = s.fs;
      s_len = s.n_samples();
    }
    require(s.channels == out.channels, "concat: channel lists differ");
    require(s.n_samples() == s_len, "concat: epoch lengths differ");
    total += s.size();
  }
  if (total == 0) return out;
  const std::size_t stride = out.channels.size() * s_len;
  out.epochs = TensorF({total, out.channels.size(), s_len});
  std::size_t at = 0;
  for (const auto& s : sets) {
    if (s.size() == 0) continue;
    std::copy_n(s.epochs.data(), s.size() * stride, out.epochs.data() + at * stride);
    at += s.size();
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    out.groups.insert(out.groups.end(), s.groups.begin(), s.groups.end());
    for (auto it = s.provenance.begin(); it != s.provenance.end(); ++it)
      out.provenance[it.key()] = it.value();
  }
  return out;
}

}  // namespace nstate
