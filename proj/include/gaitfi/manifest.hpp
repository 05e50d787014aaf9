#pragma once

// Dataset manifest (JSON lines, one record per sample) and run configuration
// (key = value file with CLI overrides).

#include <cstdint>
#include <string>
#include <vector>

namespace gaitfi {

struct ManifestEntry {
    int64_t subject_id = 0;
    int64_t sample_index = 0;
    std::string csi_path;  // relative to the manifest directory
    std::string sil_path;
    std::string split;  // "gallery" or "probe"
};

struct Manifest {
    std::string root;  // directory holding the manifest file
    std::vector<ManifestEntry> entries;

    std::string resolve(const std::string& rel) const;
    std::vector<int64_t> subjects() const;  // sorted distinct ids
    std::vector<ManifestEntry> split(const std::string& name) const;
};

// Parses and validates: unique (subject_id, sample_index), known split names,
// referenced paths present on disk, and the same gallery count for every
// subject (the retrieval score sums unnormalized over gallery samples).
Manifest load_manifest(const std::string& path);

void save_manifest(const Manifest& m, const std::string& path);

struct RunConfig {
    double alpha = 0.001;  // triplet loss weight
    double margin = 0.2;
    double lr = 1e-3;
    int64_t batch = 32;
    int64_t epochs = 30;
    int64_t p = 8;  // subjects per batch
    int64_t q = 4;  // samples per subject per batch
    uint64_t seed = 7;
    std::string fusion = "concat";
    std::string modality = "both";
    std::string lstm_feature = "last";  // or "mean"
    bool use_ce = true;
    int64_t frames = 32;      // silhouette sequence length L
    int64_t frame_size = 64;  // silhouette side S
    int64_t csi_packets = 500;
    int64_t denoise_window = 0;  // moving-average width; <2 disables
};

// Applies one key=value pair; unknown keys and unparsable values throw.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Empty path returns the defaults. Lines are `key = value`, blank lines and
// `#` comments allowed, values optionally quoted.
RunConfig load_run_config(const std::string& path);

}  // namespace gaitfi
