#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "nlohmann/json.hpp"
#include "nstate/tensor.hpp"

namespace nstate {

inline constexpr double kSampleRate = 250.0;
inline constexpr std::size_t kEpochSamples = 250;

// MT (mental task) is the negative class, GI (guided imagery) positive.
enum class Condition { kMT = 0, kGI = 1 };

std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

// Continuous multichannel signal in microvolts, [C x N].
struct Recording {
  TensorF data;
  double fs = kSampleRate;
  std::vector<std::string> channels;
  std::string subject;
  Condition condition = Condition::kMT;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return data.empty() ? 0 : data.dim(1); }
  void validate() const;
};

// Fixed-length epochs [E x C x S] with per-epoch labels (0=MT, 1=GI) and
// subject ids.
struct EpochSet {
  TensorF epochs;
  std::vector<int> labels;
  std::vector<std::string> groups;
  std::vector<std::string> channels;
  double fs = kSampleRate;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return labels.size(); }
  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return epochs.empty() ? 0 : epochs.dim(2); }
  void validate() const;
};

inline constexpr char kContainerMagic[8] = {'N', 'S', 'E', 'E', 'G', '0', '0', '1'};

// Layout: magic "NSEEG001", u8 kind (0 continuous, 1 epochs), u32 LE JSON
// header length, JSON header, float32 LE samples. Continuous data is stored
// channel-major [C x N]; epochs as [E x C x S].
void write_container(const std::filesystem::path& path, const Recording& rec);
void write_container(const std::filesystem::path& path, const EpochSet& set);
std::variant<Recording, EpochSet> read_container(const std::filesystem::path& path);
Recording read_recording(const std::filesystem::path& path);
EpochSet read_epochs(const std::filesystem::path& path);

// Keeps samples [start*fs, end*fs).
Recording crop(const Recording& rec, double start_s, double end_s);

// Splits into floor(N / (seconds*fs)) epochs; the remainder is dropped and
// noted in provenance.
EpochSet epoch(const Recording& rec, double seconds = 1.0);

EpochSet select_channels(const EpochSet& set, const std::vector<std::string>& subset);
EpochSet subset_epochs(const EpochSet& set, const std::vector<std::size_t>& indices);
// Concatenates sets with identical channel lists.
EpochSet concat(const std::vector<EpochSet>& sets);

}  // namespace nstate
