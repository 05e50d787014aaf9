#pragma once

// Silhouette extraction pipeline: per-pixel Gaussian-mixture background
// subtraction, morphological cleanup, bounding-box crop normalized to S x S,
// and padding/truncation to a fixed-length sequence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gaitfi {

struct GrayImage {
    int64_t h = 0, w = 0;
    std::vector<uint8_t> pix;  // row-major, 8-bit

    static GrayImage filled(int64_t h, int64_t w, uint8_t value) {
        GrayImage im;
        im.h = h;
        im.w = w;
        im.pix.assign(static_cast<size_t>(h * w), value);
        return im;
    }
    uint8_t& at(int64_t r, int64_t c) { return pix[static_cast<size_t>(r * w + c)]; }
    uint8_t at(int64_t r, int64_t c) const { return pix[static_cast<size_t>(r * w + c)]; }
};

struct BinaryImage {
    int64_t h = 0, w = 0;
    std::vector<uint8_t> pix;  // 0 or 1

    static BinaryImage zeros(int64_t h, int64_t w) {
        BinaryImage im;
        im.h = h;
        im.w = w;
        im.pix.assign(static_cast<size_t>(h * w), 0);
        return im;
    }
    uint8_t& at(int64_t r, int64_t c) { return pix[static_cast<size_t>(r * w + c)]; }
    uint8_t at(int64_t r, int64_t c) const { return pix[static_cast<size_t>(r * w + c)]; }
    int64_t foreground_count() const;
};

// Per-pixel mixture of G Gaussians over 8-bit intensities.
struct GmmModel {
    int64_t h = 0, w = 0;
    int64_t components = 3;
    float rho = 0.01f;            // learning rate for weight/mean/variance
    float bg_threshold = 0.7f;    // cumulative top-weight mass treated as background
    float match_sigma = 2.5f;     // match window half-width in sigmas
    float var_floor = 4.0f;       // minimum variance (8-bit intensity scale)
    float var_init = 100.0f;      // variance for seeded/replaced components
    float new_weight = 0.05f;     // weight for a replacement component
    bool seeded = false;
    // SoA, indexed [pixel * components + k].
    std::vector<float> weight, mean, var;

    static GmmModel make(int64_t h, int64_t w, int64_t components = 3);
};

// Advances the model by one frame and returns the foreground mask. The first
// frame seeds component 0 at every pixel and classifies as all-background.
BinaryImage gmm_update_and_classify(GmmModel& model, const GrayImage& frame);

// 3x3 binary opening (erosion then dilation); pixels beyond the border count
// as background.
BinaryImage morph_open3x3(const BinaryImage& mask);

// Crops the tight foreground box, scales it to height S (aspect preserved,
// bilinear), centers it horizontally on the foreground centroid (rounded to a
// pixel, which keeps the result exactly translation invariant), pads/crops to
// S x S and re-binarizes at 0.5. Returns nothing when the foreground covers
// less than min_foreground_frac of the frame.
std::optional<BinaryImage> extract_silhouette(const BinaryImage& mask, int64_t S = 64,
                                              double min_foreground_frac = 0.005);

struct SilhouetteSequence {
    int64_t length = 0;       // L
    int64_t size = 0;         // S
    int64_t source_count = 0; // usable silhouettes before padding/truncation
    std::vector<uint8_t> frames;  // L * S * S values in {0,1}

    uint8_t& at(int64_t l, int64_t r, int64_t c) { return frames[static_cast<size_t>((l * size + r) * size + c)]; }
    uint8_t at(int64_t l, int64_t r, int64_t c) const { return frames[static_cast<size_t>((l * size + r) * size + c)]; }
};

// First L silhouettes, or all of them plus copies of the last to reach L.
SilhouetteSequence assemble_sequence(const std::vector<BinaryImage>& silhouettes, int64_t L);

// Full pipeline over an in-memory video.
SilhouetteSequence silhouettes_from_frames(const std::vector<GrayImage>& frames, int64_t L, int64_t S,
                                           double min_foreground_frac = 0.005);

// Drops each foreground pixel with probability drop_prob (seeded); used for
// the degraded-modality robustness datasets.
void corrupt_silhouettes(SilhouetteSequence& seq, double drop_prob, uint64_t seed);

// GFS1 container: magic, u32 L, u32 S, then L bit-packed S*S frames, each
// frame starting on a byte boundary.
void save_silhouettes(const SilhouetteSequence& seq, const std::string& path);
SilhouetteSequence load_silhouettes(const std::string& path);

// Binary 8-bit PGM (P5).
void save_pgm(const GrayImage& im, const std::string& path);
GrayImage load_pgm(const std::string& path);

// Lexicographically sorted *.pgm paths directly inside dir.
std::vector<std::string> list_pgm_frames(const std::string& dir);

}  // namespace gaitfi
