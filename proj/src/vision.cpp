#include "gaitfi/vision.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "gaitfi/io_util.hpp"
#include "gaitfi/parallel.hpp"

namespace gaitfi {

int64_t BinaryImage::foreground_count() const {
    int64_t n = 0;
    for (uint8_t p : pix) n += p;
    return n;
}

GmmModel GmmModel::make(int64_t h, int64_t w, int64_t components) {
    if (h < 1 || w < 1 || components < 1) throw std::invalid_argument("gmm: dimensions and component count must be >= 1");
    if (components > 8) throw std::invalid_argument("gmm: at most 8 components supported");
    GmmModel m;
    m.h = h;
    m.w = w;
    m.components = components;
    const size_t n = static_cast<size_t>(h * w * components);
    m.weight.assign(n, 0.0f);
    m.mean.assign(n, 0.0f);
    m.var.assign(n, m.var_init);
    return m;
}

BinaryImage gmm_update_and_classify(GmmModel& model, const GrayImage& frame) {
    if (frame.h != model.h || frame.w != model.w)
        throw std::invalid_argument("gmm: frame " + std::to_string(frame.h) + "x" + std::to_string(frame.w) +
                                    " does not match model " + std::to_string(model.h) + "x" + std::to_string(model.w));
    const int64_t npix = model.h * model.w;
    const int64_t G = model.components;
    BinaryImage mask = BinaryImage::zeros(model.h, model.w);

    if (!model.seeded) {
        // Seed component 0 from the first frame; by convention it is all
        // background.
        parallel_for(npix, [&](int64_t p) {
            model.weight[p * G] = 1.0f;
            model.mean[p * G] = static_cast<float>(frame.pix[p]);
            model.var[p * G] = model.var_init;
        });
        model.seeded = true;
        return mask;
    }

    const float rho = model.rho;
    const float match2 = model.match_sigma * model.match_sigma;
    parallel_for(npix, [&](int64_t p) {
        float* w = model.weight.data() + p * G;
        float* mu = model.mean.data() + p * G;
        float* var = model.var.data() + p * G;
        const float x = static_cast<float>(frame.pix[p]);

        std::array<bool, 8> matched{};
        bool any = false;
        for (int64_t k = 0; k < G; ++k) {
            const float d = x - mu[k];
            if (w[k] > 0.0f && d * d <= match2 * var[k]) {
                matched[static_cast<size_t>(k)] = true;
                any = true;
            }
        }

        if (any) {
            for (int64_t k = 0; k < G; ++k) {
                if (matched[static_cast<size_t>(k)]) {
                    mu[k] += rho * (x - mu[k]);
                    const float d = x - mu[k];
                    var[k] = (1.0f - rho) * var[k] + rho * d * d;
                    if (var[k] < model.var_floor) var[k] = model.var_floor;
                    w[k] = (1.0f - rho) * w[k] + rho;
                } else {
                    w[k] = (1.0f - rho) * w[k];
                }
            }
        } else {
            int64_t weakest = 0;
            for (int64_t k = 1; k < G; ++k)
                if (w[k] < w[weakest]) weakest = k;
            mu[weakest] = x;
            var[weakest] = model.var_init;
            w[weakest] = model.new_weight;
        }

        float total = 0.0f;
        for (int64_t k = 0; k < G; ++k) total += w[k];
        for (int64_t k = 0; k < G; ++k) w[k] /= total;

        if (!any) {
            mask.pix[p] = 1;  // nothing explains this pixel: foreground
            return;
        }
        // Background components: smallest top-weight prefix whose cumulative
        // weight reaches the threshold (stable order, heavier first).
        std::array<int64_t, 8> order;
        for (int64_t k = 0; k < G; ++k) order[static_cast<size_t>(k)] = k;
        std::stable_sort(order.begin(), order.begin() + G,
                         [&](int64_t a, int64_t b) { return w[a] > w[b]; });
        float cum = 0.0f;
        bool background = false;
        for (int64_t r = 0; r < G; ++r) {
            const int64_t k = order[static_cast<size_t>(r)];
            if (matched[static_cast<size_t>(k)]) {
                background = true;
                break;
            }
            cum += w[k];
            if (cum >= model.bg_threshold) break;  // remaining components are foreground-grade
        }
        mask.pix[p] = background ? 0 : 1;
    });
    return mask;
}

BinaryImage morph_open3x3(const BinaryImage& mask) {
    const int64_t h = mask.h, w = mask.w;
    BinaryImage eroded = BinaryImage::zeros(h, w);
    parallel_for(h, [&](int64_t r) {
        for (int64_t c = 0; c < w; ++c) {
            if (r == 0 || c == 0 || r == h - 1 || c == w - 1) continue;  // border counts as background
            bool all = true;
            for (int64_t dr = -1; dr <= 1 && all; ++dr)
                for (int64_t dc = -1; dc <= 1; ++dc)
                    if (!mask.at(r + dr, c + dc)) {
                        all = false;
                        break;
                    }
            eroded.at(r, c) = all ? 1 : 0;
        }
    });
    BinaryImage dilated = BinaryImage::zeros(h, w);
    parallel_for(h, [&](int64_t r) {
        for (int64_t c = 0; c < w; ++c) {
            bool hit = false;
            for (int64_t dr = -1; dr <= 1 && !hit; ++dr) {
                const int64_t rr = r + dr;
                if (rr < 0 || rr >= h) continue;
                for (int64_t dc = -1; dc <= 1; ++dc) {
                    const int64_t cc = c + dc;
                    if (cc >= 0 && cc < w && eroded.at(rr, cc)) {
                        hit = true;
                        break;
                    }
                }
            }
            dilated.at(r, c) = hit ? 1 : 0;
        }
    });
    return dilated;
}

std::optional<BinaryImage> extract_silhouette(const BinaryImage& mask, int64_t S, double min_foreground_frac) {
    if (S < 1) throw std::invalid_argument("extract_silhouette: output size must be >= 1");
    const int64_t h = mask.h, w = mask.w;
    int64_t fg = 0, r0 = h, r1 = -1, c0 = w, c1 = -1;
    int64_t col_sum = 0;
    for (int64_t r = 0; r < h; ++r)
        for (int64_t c = 0; c < w; ++c)
            if (mask.at(r, c)) {
                ++fg;
                col_sum += c;
                r0 = std::min(r0, r);
                r1 = std::max(r1, r);
                c0 = std::min(c0, c);
                c1 = std::max(c1, c);
            }
    if (fg < static_cast<int64_t>(std::ceil(min_foreground_frac * static_cast<double>(h * w))) || fg == 0)
        return std::nullopt;

    // Integer centroid column (round half up) keeps the placement exactly
    // translation invariant.
    const int64_t c_mid = (2 * col_sum + fg) / (2 * fg);
    const double box_h = static_cast<double>(r1 - r0 + 1);
    const double inv_scale = box_h / static_cast<double>(S);  // source pixels per output pixel

    BinaryImage out = BinaryImage::zeros(S, S);
    for (int64_t r = 0; r < S; ++r) {
        // Offsets are computed without the box origin so the same fractional
        // weights arise for any integer shift of the mask.
        const double u = (static_cast<double>(r) + 0.5) * inv_scale - 0.5;
        const int64_t ui = static_cast<int64_t>(std::floor(u));
        const double ty = u - static_cast<double>(ui);
        const int64_t sy0 = r0 + ui, sy1 = sy0 + 1;
        for (int64_t c = 0; c < S; ++c) {
            const double v = (static_cast<double>(c) + 0.5 - static_cast<double>(S) * 0.5) * inv_scale;
            const int64_t vi = static_cast<int64_t>(std::floor(v));
            const double tx = v - static_cast<double>(vi);
            const int64_t sx0 = c_mid + vi, sx1 = sx0 + 1;
            auto px = [&](int64_t rr, int64_t cc) -> double {
                return (rr >= 0 && rr < h && cc >= 0 && cc < w && mask.at(rr, cc)) ? 1.0 : 0.0;
            };
            const double val = (1.0 - ty) * ((1.0 - tx) * px(sy0, sx0) + tx * px(sy0, sx1)) +
                               ty * ((1.0 - tx) * px(sy1, sx0) + tx * px(sy1, sx1));
            out.at(r, c) = val >= 0.5 ? 1 : 0;
        }
    }
    return out;
}

SilhouetteSequence assemble_sequence(const std::vector<BinaryImage>& silhouettes, int64_t L) {
    if (L < 1) throw std::invalid_argument("assemble_sequence: length must be >= 1");
    if (silhouettes.empty()) throw std::runtime_error("assemble_sequence: no person in sample");
    const int64_t S = silhouettes.front().h;
    for (const auto& im : silhouettes)
        if (im.h != S || im.w != S)
            throw std::invalid_argument("assemble_sequence: all silhouettes must be " + std::to_string(S) + "x" +
                                        std::to_string(S));
    SilhouetteSequence seq;
    seq.length = L;
    seq.size = S;
    seq.source_count = static_cast<int64_t>(silhouettes.size());
    seq.frames.resize(static_cast<size_t>(L * S * S));
    for (int64_t l = 0; l < L; ++l) {
        const BinaryImage& src = silhouettes[static_cast<size_t>(std::min<int64_t>(l, seq.source_count - 1))];
        std::memcpy(seq.frames.data() + l * S * S, src.pix.data(), static_cast<size_t>(S * S));
    }
    return seq;
}

SilhouetteSequence silhouettes_from_frames(const std::vector<GrayImage>& frames, int64_t L, int64_t S,
                                           double min_foreground_frac) {
    if (frames.empty()) throw std::invalid_argument("silhouettes_from_frames: empty frame list");
    GmmModel gmm = GmmModel::make(frames.front().h, frames.front().w);
    std::vector<BinaryImage> usable;
    for (const GrayImage& frame : frames) {
        BinaryImage mask = morph_open3x3(gmm_update_and_classify(gmm, frame));
        if (auto sil = extract_silhouette(mask, S, min_foreground_frac)) usable.push_back(std::move(*sil));
    }
    return assemble_sequence(usable, L);
}

void corrupt_silhouettes(SilhouetteSequence& seq, double drop_prob, uint64_t seed) {
    if (drop_prob < 0.0 || drop_prob > 1.0) throw std::invalid_argument("corrupt_silhouettes: drop probability outside [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (uint8_t& p : seq.frames)
        if (p && unit(rng) < drop_prob) p = 0;
}

namespace {
constexpr char kMagic[4] = {'G', 'F', 'S', '1'};
constexpr int64_t kMaxElements = int64_t(1) << 31;
}  // namespace

void save_silhouettes(const SilhouetteSequence& seq, const std::string& path) {
    std::ofstream f = io::open_write(path);
    io::write_bytes(f, kMagic, 4);
    io::write_u32(f, static_cast<uint32_t>(seq.length));
    io::write_u32(f, static_cast<uint32_t>(seq.size));
    const size_t frame_px = static_cast<size_t>(seq.size * seq.size);
    for (int64_t l = 0; l < seq.length; ++l) {
        const std::vector<uint8_t> packed = io::pack_bits(seq.frames.data() + l * seq.size * seq.size, frame_px);
        io::write_bytes(f, packed.data(), packed.size());
    }
    io::require(f.good(), "write failed: " + path);
}

SilhouetteSequence load_silhouettes(const std::string& path) {
    std::ifstream f = io::open_read(path);
    char magic[4];
    io::read_exact(f, magic, 4, "GFS1 magic in " + path);
    io::require(std::memcmp(magic, kMagic, 4) == 0, "bad magic (expected GFS1): " + path);
    SilhouetteSequence seq;
    seq.length = io::read_u32(f, "GFS1 header");
    seq.size = io::read_u32(f, "GFS1 header");
    io::require(seq.length >= 1 && seq.size >= 1, "GFS1 header has zero extent: " + path);
    io::require(seq.length * seq.size * seq.size <= kMaxElements, "GFS1 extent overflow: " + path);
    seq.source_count = seq.length;  // not stored; only meaningful pre-save
    seq.frames.resize(static_cast<size_t>(seq.length * seq.size * seq.size));
    const size_t frame_px = static_cast<size_t>(seq.size * seq.size);
    std::vector<uint8_t> packed((frame_px + 7) / 8);
    for (int64_t l = 0; l < seq.length; ++l) {
        io::read_exact(f, packed.data(), packed.size(), "GFS1 frame in " + path);
        io::unpack_bits(packed, seq.frames.data() + l * seq.size * seq.size, frame_px);
    }
    io::require(io::at_eof(f), "trailing bytes after GFS1 payload: " + path);
    return seq;
}

void save_pgm(const GrayImage& im, const std::string& path) {
    std::ofstream f = io::open_write(path);
    const std::string header = "P5\n" + std::to_string(im.w) + " " + std::to_string(im.h) + "\n255\n";
    io::write_bytes(f, header.data(), header.size());
    io::write_bytes(f, im.pix.data(), im.pix.size());
    io::require(f.good(), "write failed: " + path);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string pgm_token(std::ifstream& f, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = f.get()) != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = f.get();
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    io::require(!tok.empty(), "truncated PGM header: " + path);
    return tok;
}

}  // namespace

GrayImage load_pgm(const std::string& path) {
    std::ifstream f = io::open_read(path);
    io::require(pgm_token(f, path) == "P5", "not a binary PGM (expected P5): " + path);
    GrayImage im;
    im.w = std::stoll(pgm_token(f, path));
    im.h = std::stoll(pgm_token(f, path));
    const int64_t maxval = std::stoll(pgm_token(f, path));
    io::require(im.w >= 1 && im.h >= 1, "PGM with zero extent: " + path);
    io::require(maxval > 0 && maxval <= 255, "unsupported PGM maxval " + std::to_string(maxval) + ": " + path);
    im.pix.resize(static_cast<size_t>(im.h * im.w));
    io::read_exact(f, im.pix.data(), im.pix.size(), "PGM pixels in " + path);
    return im;
}

std::vector<std::string> list_pgm_frames(const std::string& dir) {
    namespace fs = std::filesystem;
    io::require(fs::is_directory(dir), "not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    std::vector<std::string> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back((fs::path(dir) / n).string());
    return out;
}

}  // namespace gaitfi
