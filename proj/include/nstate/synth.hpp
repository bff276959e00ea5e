#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nstate/data.hpp"
#include "nstate/montage.hpp"

namespace nstate {

inline constexpr double kBaselineRms = 20.0;  // uV

enum class ArtifactKind { kFlat, kNoise };

// "flat:E5" zeroes a channel; "noise:E7" adds independent white noise of
// `scale` x baseline RMS (default 5). Applied to every subject.
struct ArtifactSpec {
  ArtifactKind kind = ArtifactKind::kFlat;
  std::string channel;
  double scale = 5.0;
};

// Comma-separated list, e.g. "flat:E5,noise:E7:3". Empty string -> none.
std::vector<ArtifactSpec> parse_artifacts(const std::string& text);
std::string to_string(const std::vector<ArtifactSpec>& artifacts);

struct SynthOptions {
  std::size_t n_subjects = 26;
  double delta = 2.0;  // condition oscillation amplitude in baseline-RMS units
  std::vector<ArtifactSpec> artifacts;
  std::uint64_t seed = 0;
  double minutes = 20.0;
  std::size_t sources = 12;
};

// Pink-noise background mixed through smooth spatial bumps, plus a
// posterior 10 Hz (GI) or central 20 Hz (MT) oscillation of amplitude
// delta * baseline RMS, per-subject jittered by up to 1 Hz. Subjects
// alternate GI, MT starting with GI.
std::vector<Recording> synth_cohort(const SynthOptions& opts, const Montage& montage);
Recording synth_subject(const SynthOptions& opts, const Montage& montage, std::size_t index);

std::string subject_id(std::size_t index);

// Writes <subject>.nse per recording, montage.csv and manifest.json; returns
// the container paths.
std::vector<std::filesystem::path> write_cohort(const std::filesystem::path& dir,
                                                const std::vector<Recording>& recs,
                                                const Montage& montage);

}  // namespace nstate
