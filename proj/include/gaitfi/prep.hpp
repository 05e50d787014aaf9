#pragma once

// Manifest-driven preprocessing passes. Each rewrites the per-sample file it
// owns into a processed sibling directory and emits an updated manifest;
// raw inputs are left untouched.

#include <cstdint>
#include <string>

namespace gaitfi {

// Repairs invalid CSI readings, optionally smooths along time, z-scores per
// stream and resamples every capture to `target_packets`. Processed frames
// land in <root>/csi_proc/.
void run_csi_prep(const std::string& manifest_in, const std::string& manifest_out, int64_t target_packets,
                  int64_t denoise_window);

// Turns each sample's PGM frame directory into a length-L silhouette
// sequence (GFS1) under <root>/<out_subdir>/. When corrupt_prob > 0, samples
// in `corrupt_split` ("gallery", "probe" or "all") lose that fraction of
// foreground pixels, seeded per sample. A non-default out_subdir lets a
// degraded variant coexist with the clean one.
void run_vision_prep(const std::string& manifest_in, const std::string& manifest_out, int64_t frames,
                     int64_t frame_size, double corrupt_prob, const std::string& corrupt_split,
                     uint64_t corrupt_seed, const std::string& out_subdir = "sil");

}  // namespace gaitfi
