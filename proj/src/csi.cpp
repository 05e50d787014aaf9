#include "gaitfi/csi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gaitfi/io_util.hpp"
#include "gaitfi/parallel.hpp"

namespace gaitfi {

int64_t stream_count(int64_t n_tx, int64_t n_rx, int64_t n_subcarriers) {
    if (n_tx < 1 || n_rx < 1 || n_subcarriers < 1)
        throw std::invalid_argument("stream_count: antenna and subcarrier counts must be >= 1");
    return n_tx * n_rx * n_subcarriers;
}

CsiFrame CsiFrame::zeros(CsiLayout layout, int64_t packets) {
    if (packets < 1) throw std::invalid_argument("csi frame: packet count must be >= 1");
    stream_count(layout.n_tx, layout.n_rx, layout.n_subcarriers);
    CsiFrame f;
    f.layout = layout;
    f.packets = packets;
    f.amp.assign(static_cast<size_t>(f.numel()), 0.0f);
    f.valid.assign(static_cast<size_t>(f.numel()), 1);
    return f;
}

CsiFrame repair_nan(const CsiFrame& frame) {
    CsiFrame out = frame;
    const int64_t series_count = frame.layout.streams() * frame.layout.n_subcarriers;
    const int64_t P = frame.packets;
    parallel_for(series_count, [&](int64_t sc) {
        float* a = out.amp.data() + sc * P;
        uint8_t* v = out.valid.data() + sc * P;
        auto ok = [&](int64_t p) { return v[p] && std::isfinite(a[p]); };
        // Walk holes between consecutive valid anchors.
        int64_t prev = -1;
        int64_t p = 0;
        while (p < P) {
            if (ok(p)) {
                prev = p;
                ++p;
                continue;
            }
            int64_t next = p + 1;
            while (next < P && !ok(next)) ++next;
            if (prev < 0 && next >= P) {
                for (int64_t q = 0; q < P; ++q) a[q] = 0.0f;  // nothing valid anywhere
            } else if (prev < 0) {
                for (int64_t q = p; q < next; ++q) a[q] = a[next];
            } else if (next >= P) {
                for (int64_t q = p; q < P; ++q) a[q] = a[prev];
            } else {
                const double lo = a[prev], hi = a[next];
                const double span = static_cast<double>(next - prev);
                for (int64_t q = p; q < next; ++q)
                    a[q] = static_cast<float>(lo + (hi - lo) * static_cast<double>(q - prev) / span);
            }
            p = next;
        }
        for (int64_t q = 0; q < P; ++q) v[q] = 1;
    });
    return out;
}

std::vector<float> moving_average(const std::vector<float>& series, int64_t window) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("moving_average: window must be odd and >= 1, got " + std::to_string(window));
    const int64_t n = static_cast<int64_t>(series.size());
    std::vector<float> out(series.size());
    const int64_t r = window / 2;
    for (int64_t i = 0; i < n; ++i) {
        const int64_t lo = std::max<int64_t>(0, i - r);
        const int64_t hi = std::min<int64_t>(n - 1, i + r);
        double acc = 0.0;
        for (int64_t j = lo; j <= hi; ++j) acc += static_cast<double>(series[j]);
        out[i] = static_cast<float>(acc / static_cast<double>(hi - lo + 1));
    }
    return out;
}

CsiFrame denoise(const CsiFrame& frame, int64_t window) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("denoise: window must be odd and >= 1, got " + std::to_string(window));
    CsiFrame out = frame;
    const int64_t series_count = frame.layout.streams() * frame.layout.n_subcarriers;
    const int64_t P = frame.packets;
    const int64_t r = window / 2;
    parallel_for(series_count, [&](int64_t sc) {
        const float* src = frame.amp.data() + sc * P;
        float* dst = out.amp.data() + sc * P;
        for (int64_t i = 0; i < P; ++i) {
            const int64_t lo = std::max<int64_t>(0, i - r);
            const int64_t hi = std::min<int64_t>(P - 1, i + r);
            double acc = 0.0;
            for (int64_t j = lo; j <= hi; ++j) acc += static_cast<double>(src[j]);
            dst[i] = static_cast<float>(acc / static_cast<double>(hi - lo + 1));
        }
    });
    return out;
}

CsiFrame normalize(const CsiFrame& frame) {
    CsiFrame out = frame;
    const int64_t S = frame.layout.streams();
    const int64_t n_per_stream = frame.layout.n_subcarriers * frame.packets;
    parallel_for(S, [&](int64_t s) {
        const float* src = frame.amp.data() + s * n_per_stream;
        float* dst = out.amp.data() + s * n_per_stream;
        double mean = 0.0;
        for (int64_t i = 0; i < n_per_stream; ++i) mean += static_cast<double>(src[i]);
        mean /= static_cast<double>(n_per_stream);
        double var = 0.0;
        for (int64_t i = 0; i < n_per_stream; ++i) {
            const double d = static_cast<double>(src[i]) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n_per_stream);
        if (var < 1e-20) {  // constant stream (up to float rounding)
            for (int64_t i = 0; i < n_per_stream; ++i) dst[i] = 0.0f;
            return;
        }
        const double inv_std = 1.0 / std::sqrt(var);
        for (int64_t i = 0; i < n_per_stream; ++i)
            dst[i] = static_cast<float>((static_cast<double>(src[i]) - mean) * inv_std);
    });
    return out;
}

CsiFrame temporal_resample(const CsiFrame& frame, int64_t target_packets) {
    if (target_packets < 1)
        throw std::invalid_argument("temporal_resample: target packet count must be >= 1, got " +
                                    std::to_string(target_packets));
    if (frame.packets < 1) throw std::invalid_argument("temporal_resample: frame has no packets");
    CsiFrame out;
    out.layout = frame.layout;
    out.packets = target_packets;
    out.amp.resize(static_cast<size_t>(out.numel()));
    out.valid.resize(static_cast<size_t>(out.numel()));
    const int64_t series_count = frame.layout.streams() * frame.layout.n_subcarriers;
    const int64_t P = frame.packets;
    for (int64_t sc = 0; sc < series_count; ++sc) {
        const float* src = frame.amp.data() + sc * P;
        const uint8_t* sv = frame.valid.data() + sc * P;
        float* dst = out.amp.data() + sc * target_packets;
        uint8_t* dv = out.valid.data() + sc * target_packets;
        for (int64_t i = 0; i < target_packets; ++i) {
            const int64_t j = i * P / target_packets;
            dst[i] = src[j];
            dv[i] = sv[j];
        }
    }
    return out;
}

CsiFrame preprocess_csi(const CsiFrame& frame, int64_t target_packets, int64_t denoise_window) {
    CsiFrame f = repair_nan(frame);
    if (denoise_window > 1) f = denoise(f, denoise_window);
    return temporal_resample(normalize(f), target_packets);
}

namespace {
constexpr char kMagic[4] = {'G', 'F', 'C', '1'};
constexpr int64_t kMaxElements = int64_t(1) << 31;
}  // namespace

void save_csi(const CsiFrame& frame, const std::string& path) {
    std::ofstream f = io::open_write(path);
    io::write_bytes(f, kMagic, 4);
    io::write_u32(f, static_cast<uint32_t>(frame.layout.n_tx));
    io::write_u32(f, static_cast<uint32_t>(frame.layout.n_rx));
    io::write_u32(f, static_cast<uint32_t>(frame.layout.n_subcarriers));
    io::write_u32(f, static_cast<uint32_t>(frame.packets));
    io::write_u32(f, static_cast<uint32_t>(frame.layout.packet_rate));
    io::write_f32_array(f, frame.amp.data(), frame.amp.size());
    const std::vector<uint8_t> packed = io::pack_bits(frame.valid.data(), frame.valid.size());
    io::write_bytes(f, packed.data(), packed.size());
    io::require(f.good(), "write failed: " + path);
}

CsiFrame load_csi(const std::string& path) {
    std::ifstream f = io::open_read(path);
    char magic[4];
    io::read_exact(f, magic, 4, "GFC1 magic in " + path);
    io::require(std::memcmp(magic, kMagic, 4) == 0, "bad magic (expected GFC1): " + path);
    CsiFrame frame;
    frame.layout.n_tx = io::read_u32(f, "GFC1 header");
    frame.layout.n_rx = io::read_u32(f, "GFC1 header");
    frame.layout.n_subcarriers = io::read_u32(f, "GFC1 header");
    frame.packets = io::read_u32(f, "GFC1 header");
    frame.layout.packet_rate = io::read_u32(f, "GFC1 header");
    io::require(frame.layout.n_tx >= 1 && frame.layout.n_rx >= 1 && frame.layout.n_subcarriers >= 1 &&
                    frame.packets >= 1 && frame.layout.packet_rate >= 1,
                "GFC1 header has zero extent: " + path);
    const int64_t n = frame.layout.streams() * frame.layout.n_subcarriers * frame.packets;
    io::require(n <= kMaxElements, "GFC1 extent overflow: " + path);
    frame.amp.resize(static_cast<size_t>(n));
    io::read_f32_array(f, frame.amp.data(), frame.amp.size(), "GFC1 amplitudes in " + path);
    std::vector<uint8_t> packed((static_cast<size_t>(n) + 7) / 8);
    io::read_exact(f, packed.data(), packed.size(), "GFC1 mask in " + path);
    frame.valid.resize(static_cast<size_t>(n));
    io::unpack_bits(packed, frame.valid.data(), frame.valid.size());
    io::require(io::at_eof(f), "trailing bytes after GFC1 payload: " + path);
    return frame;
}

}  // namespace gaitfi
