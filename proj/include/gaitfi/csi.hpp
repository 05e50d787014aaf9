#pragma once

// WiFi CSI amplitude frames and their preprocessing chain:
// repair (NaN interpolation) -> optional moving-average denoise ->
// per-stream z-score -> temporal resample to the model's packet count.

#include <cstdint>
#include <string>
#include <vector>

namespace gaitfi {

struct CsiLayout {
    int64_t n_tx = 1;
    int64_t n_rx = 3;
    int64_t n_subcarriers = 114;
    int64_t packet_rate = 800;  // packets per second

    int64_t streams() const { return n_tx * n_rx; }
};

// Total stream count n_tx * n_rx * n_subcarriers; every factor must be >= 1.
int64_t stream_count(int64_t n_tx, int64_t n_rx, int64_t n_subcarriers);

struct CsiFrame {
    CsiLayout layout;
    int64_t packets = 0;
    // Row-major [antenna stream][subcarrier][packet].
    std::vector<float> amp;
    // 1 = trustworthy measurement, 0 = hole to repair; same indexing as amp.
    std::vector<uint8_t> valid;

    int64_t numel() const { return layout.streams() * layout.n_subcarriers * packets; }
    int64_t idx(int64_t s, int64_t c, int64_t p) const { return (s * layout.n_subcarriers + c) * packets + p; }
    double duration() const { return static_cast<double>(packets) / static_cast<double>(layout.packet_rate); }

    static CsiFrame zeros(CsiLayout layout, int64_t packets);
};

// Fills every invalid or non-finite element by linear interpolation along the
// packet axis of its (stream, subcarrier) series; edge gaps copy the nearest
// valid value; an all-invalid series becomes zeros. Idempotent.
CsiFrame repair_nan(const CsiFrame& frame);

// Centered moving average; the window is clipped to the valid index range at
// the boundaries, so output length equals input length.
std::vector<float> moving_average(const std::vector<float>& series, int64_t window);

// moving_average applied along the packet axis of every series.
CsiFrame denoise(const CsiFrame& frame, int64_t window);

// Per-antenna-stream z-score over all (subcarrier, packet) elements;
// a zero-variance stream maps to zeros.
CsiFrame normalize(const CsiFrame& frame);

// Picks packet indices floor(i * P / target) for i in [0, target). Handles
// both down- and up-sampling (the latter repeats packets).
CsiFrame temporal_resample(const CsiFrame& frame, int64_t target_packets);

// repair -> optional denoise (window > 1) -> normalize -> resample.
CsiFrame preprocess_csi(const CsiFrame& frame, int64_t target_packets, int64_t denoise_window = 0);

// GFC1 container (see README): magic, u32 header, f32 payload, packed mask.
void save_csi(const CsiFrame& frame, const std::string& path);
CsiFrame load_csi(const std::string& path);

}  // namespace gaitfi
