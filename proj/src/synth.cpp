#include "gaitfi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "gaitfi/parallel.hpp"

namespace gaitfi {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLightSpeed = 299792458.0;
constexpr double kRefHeight = 1.7;   // meters, height_scale == 1
constexpr double kStartX = 0.7;      // walker x when it appears, meters
constexpr double kWalkY = 1.2;       // lateral offset of the walk line
constexpr double kRxX = 4.0;         // TX at x=0, RX array at x=4

uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::vector<double> subcarrier_freqs(int64_t n) {
    // n subcarriers spanning 40 MHz centered on 5.2 GHz.
    std::vector<double> f(static_cast<size_t>(n));
    const double lo = 5.2e9 - 20e6;
    const double step = n > 1 ? 40e6 / static_cast<double>(n - 1) : 0.0;
    for (int64_t i = 0; i < n; ++i) f[static_cast<size_t>(i)] = lo + step * static_cast<double>(i);
    return f;
}

// Joint state shared by the CSI simulator and the renderer. Lengths in
// meters; z is height above ground.
struct Body {
    bool present = false;
    double phase = 0.0;
    double x = 0.0;
    double h = 0.0;
    double hip_z = 0.0, shoulder_z = 0.0, head_z = 0.0;
    double leg_len = 0.0, arm_len = 0.0;
    double bob = 0.0;
    double leg_l = 0.0, leg_r = 0.0, arm_l = 0.0, arm_r = 0.0;  // swing angles
};

Body body_at(const SubjectProfile& p, const SynthConfig& cfg, double t, double phase0) {
    Body b;
    if (t < cfg.appear_time) return b;
    const double tw = t - cfg.appear_time;
    b.present = true;
    b.h = kRefHeight * p.height_scale;
    b.phase = 2.0 * kPi * tw / p.stride_period + phase0;
    b.x = kStartX + p.walk_speed * tw;
    b.hip_z = 0.53 * b.h;
    b.shoulder_z = 0.82 * b.h;
    b.head_z = 0.93 * b.h;
    b.leg_len = b.hip_z - 0.04 * b.h;
    b.arm_len = 0.36 * b.h;
    b.bob = 0.015 * b.h * std::sin(2.0 * b.phase);
    b.leg_l = p.limb_swing * std::sin(b.phase);
    b.leg_r = p.limb_swing * std::sin(b.phase + kPi);
    b.arm_l = 0.7 * p.limb_swing * std::sin(b.phase + kPi);
    b.arm_r = 0.7 * p.limb_swing * std::sin(b.phase);
    return b;
}

double dist3(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

uint64_t sample_seed(uint64_t subject_id, uint64_t sample_index, uint64_t master_seed) {
    uint64_t h = mix64(master_seed);
    h = mix64(h ^ subject_id);
    h = mix64(h ^ sample_index);
    return h;
}

std::vector<SubjectProfile> make_profiles(int64_t n_subjects, uint64_t master_seed) {
    if (n_subjects < 1) throw std::invalid_argument("make_profiles: need at least one subject");
    const size_t n = static_cast<size_t>(n_subjects);

    auto grid = [n](double lo, double hi) {
        std::vector<double> v(n);
        for (size_t i = 0; i < n; ++i)
            v[i] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        return v;
    };
    const auto stride = grid(0.85, 1.35);
    const auto swing = grid(0.35, 0.75);
    const auto torso = grid(0.70, 1.30);
    const auto height = grid(0.80, 1.10);
    const auto speed = grid(0.90, 1.40);

    // Subject i takes the i-th stride period; the other parameters are
    // assigned through independent permutations so parameters stay
    // decorrelated across the roster while any two subjects still differ by
    // one full grid step in each of them.
    std::mt19937_64 rng(mix64(master_seed ^ 0xA17C0DE5ull));
    auto perm = [&rng, n]() {
        std::vector<size_t> p(n);
        std::iota(p.begin(), p.end(), size_t{0});
        std::shuffle(p.begin(), p.end(), rng);
        return p;
    };
    const auto p_swing = perm(), p_torso = perm(), p_height = perm(), p_speed = perm();

    std::vector<SubjectProfile> out(n);
    for (size_t i = 0; i < n; ++i) {
        SubjectProfile& s = out[i];
        s.subject_id = static_cast<int64_t>(i);
        s.stride_period = stride[i];
        s.limb_swing = swing[p_swing[i]];
        s.torso_width_scale = torso[p_torso[i]];
        s.height_scale = height[p_height[i]];
        s.walk_speed = speed[p_speed[i]];
        s.rng_seed = sample_seed(static_cast<uint64_t>(i), 0x5150F11Eull, master_seed);
    }
    return out;
}

std::vector<double> ChannelModel::default_subcarriers() { return subcarrier_freqs(114); }

std::complex<double> channel_response(const ChannelModel& model, int64_t subcarrier_index) {
    if (subcarrier_index < 0 || subcarrier_index >= static_cast<int64_t>(model.freqs.size()))
        throw std::out_of_range("channel_response: subcarrier index out of range");
    const double f = model.freqs[static_cast<size_t>(subcarrier_index)];
    std::complex<double> h(0.0, 0.0);
    for (const auto& p : model.paths) h += std::polar(p.alpha, p.phi - 2.0 * kPi * f * p.tau);
    return h;
}

WalkerPose walker_pose(const SubjectProfile& profile, const SynthConfig& cfg, double t, double phase0) {
    WalkerPose w;
    const Body b = body_at(profile, cfg, t, phase0);
    if (!b.present) return w;
    w.present = true;
    w.phase = b.phase;
    w.x = b.x;
    w.points[0] = {b.x, kWalkY, 0.66 * b.h + b.bob};  // torso
    w.points[1] = {b.x + b.leg_len * std::sin(b.leg_l), kWalkY - 0.09,
                   b.hip_z + b.bob - b.leg_len * std::cos(b.leg_l)};
    w.points[2] = {b.x + b.leg_len * std::sin(b.leg_r), kWalkY + 0.09,
                   b.hip_z + b.bob - b.leg_len * std::cos(b.leg_r)};
    w.points[3] = {b.x + b.arm_len * std::sin(b.arm_l), kWalkY - 0.16,
                   b.shoulder_z + b.bob - b.arm_len * std::cos(b.arm_l)};
    w.points[4] = {b.x + b.arm_len * std::sin(b.arm_r), kWalkY + 0.16,
                   b.shoulder_z + b.bob - b.arm_len * std::cos(b.arm_r)};
    return w;
}

CsiFrame simulate_walk_csi(const SubjectProfile& profile, const SynthConfig& cfg, uint64_t seed) {
    const CsiLayout& lay = cfg.layout;
    const int64_t packets = cfg.packets();
    const int64_t streams = lay.streams();
    const int64_t nsub = lay.n_subcarriers;
    if (packets < 1) throw std::invalid_argument("simulate_walk_csi: empty capture");

    CsiFrame frame = CsiFrame::zeros(lay, packets);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);

    // First draw is the gait phase so the renderer, seeded identically,
    // produces the matching walk.
    const double phase0 = angle(rng);

    const std::array<double, 3> tx{0.0, 0.0, 1.0};
    std::vector<std::array<double, 3>> rx(static_cast<size_t>(lay.n_rx));
    for (int64_t a = 0; a < lay.n_rx; ++a)
        rx[static_cast<size_t>(a)] = {kRxX, 0.03 * static_cast<double>(a), 1.0};

    // Static environment per stream: the direct path plus two wall bounces
    // with random extra delay and phase.
    struct StaticPath {
        double alpha, phi, tau;
    };
    std::vector<std::vector<StaticPath>> statics(static_cast<size_t>(streams));
    std::uniform_real_distribution<double> refl_amp(0.05, 0.18);
    std::uniform_real_distribution<double> excess(1.5, 9.0);
    for (int64_t s = 0; s < streams; ++s) {
        const int64_t a = s % lay.n_rx;
        const double d_los = dist3(tx, rx[static_cast<size_t>(a)]);
        auto& sp = statics[static_cast<size_t>(s)];
        sp.push_back({1.2 / d_los, 0.0, d_los / kLightSpeed});
        for (int k = 0; k < 2; ++k)
            sp.push_back({refl_amp(rng), angle(rng), (d_los + excess(rng)) / kLightSpeed});
    }

    // Per-scatterer reflection phases, fixed for the capture.
    std::array<double, 5> scat_phi{};
    for (auto& p : scat_phi) p = angle(rng);
    const std::array<double, 5> reflect{0.9 * profile.torso_width_scale, 0.22, 0.22, 0.18, 0.18};

    const auto freqs = subcarrier_freqs(nsub);
    const double f0 = freqs[0];
    const double dfreq = nsub > 1 ? freqs[1] - freqs[0] : 0.0;

    std::normal_distribution<double> gauss(0.0, 1.0);
    const double nscale = cfg.noise_std / std::sqrt(2.0);

    std::vector<std::complex<double>> h(static_cast<size_t>(nsub));
    // Accumulates one path across the band: the per-subcarrier phase obeys
    // psi_{i+1} = psi_i - 2*pi*dfreq*tau, a single complex rotation.
    auto add_path = [&h, nsub, f0, dfreq](double alpha, double phi, double tau) {
        std::complex<double> cur = std::polar(alpha, phi - 2.0 * kPi * f0 * tau);
        const std::complex<double> rot = std::polar(1.0, -2.0 * kPi * dfreq * tau);
        for (int64_t i = 0; i < nsub; ++i) {
            h[static_cast<size_t>(i)] += cur;
            cur *= rot;
        }
    };

    for (int64_t p = 0; p < packets; ++p) {
        const double t = static_cast<double>(p) / static_cast<double>(lay.packet_rate);
        const WalkerPose pose = walker_pose(profile, cfg, t, phase0);
        for (int64_t s = 0; s < streams; ++s) {
            std::fill(h.begin(), h.end(), std::complex<double>(0.0, 0.0));
            for (const auto& st : statics[static_cast<size_t>(s)]) add_path(st.alpha, st.phi, st.tau);
            if (pose.present && cfg.dynamic_scale != 0.0) {
                const auto& ant = rx[static_cast<size_t>(s % lay.n_rx)];
                for (size_t m = 0; m < pose.points.size(); ++m) {
                    const double d1 = dist3(tx, pose.points[m]);
                    const double d2 = dist3(pose.points[m], ant);
                    add_path(reflect[m] * cfg.dynamic_scale / (d1 * d2), scat_phi[m], (d1 + d2) / kLightSpeed);
                }
            }
            for (int64_t i = 0; i < nsub; ++i) {
                const std::complex<double> noisy =
                    h[static_cast<size_t>(i)] + std::complex<double>(gauss(rng) * nscale, gauss(rng) * nscale);
                frame.amp[static_cast<size_t>(frame.idx(s, i, p))] = static_cast<float>(std::abs(noisy));
            }
        }
    }

    if (cfg.nan_fraction > 0.0) {
        std::bernoulli_distribution drop(cfg.nan_fraction);
        for (size_t i = 0; i < frame.amp.size(); ++i) {
            if (drop(rng)) {
                frame.amp[i] = std::numeric_limits<float>::quiet_NaN();
                frame.valid[i] = 0;
            }
        }
    }
    return frame;
}

namespace {

void draw_ellipse(GrayImage& img, double cx, double cy, double ax, double ay, double ang, uint8_t value) {
    const double r = std::max(ax, ay);
    const int64_t r0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - r)));
    const int64_t r1 = std::min<int64_t>(img.h - 1, static_cast<int64_t>(std::ceil(cy + r)));
    const int64_t c0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - r)));
    const int64_t c1 = std::min<int64_t>(img.w - 1, static_cast<int64_t>(std::ceil(cx + r)));
    if (r0 > r1 || c0 > c1) return;
    const double ca = std::cos(ang), sa = std::sin(ang);
    for (int64_t rr = r0; rr <= r1; ++rr) {
        for (int64_t cc = c0; cc <= c1; ++cc) {
            const double dx = static_cast<double>(cc) - cx;
            const double dy = static_cast<double>(rr) - cy;
            const double u = (dx * ca + dy * sa) / ax;
            const double v = (-dx * sa + dy * ca) / ay;
            if (u * u + v * v <= 1.0) img.at(rr, cc) = value;
        }
    }
}

// Limb drawn as a slender ellipse from a pivot joint, hanging at `ang` from
// vertical (screen y grows downward).
void draw_limb(GrayImage& img, double px, double py, double len, double ang, double half_w, uint8_t value) {
    const double mx = px + 0.5 * len * std::sin(ang);
    const double my = py + 0.5 * len * std::cos(ang);
    // draw_ellipse rotates the x semi-axis by its angle argument; a limb at
    // `ang` from vertical lies at pi/2 - ang from the x axis.
    draw_ellipse(img, mx, my, 0.5 * len, half_w, kPi / 2.0 - ang, value);
}

uint32_t hash32(uint32_t x) {
    x ^= x >> 16;
    x *= 0x7FEB352Du;
    x ^= x >> 15;
    x *= 0x846CA68Bu;
    x ^= x >> 16;
    return x;
}

}  // namespace

std::vector<GrayImage> render_walk_frames(const SubjectProfile& profile, const SynthConfig& cfg, uint64_t seed) {
    const int64_t W = cfg.frame_w, H = cfg.frame_h;
    if (W < 8 || H < 8) throw std::invalid_argument("render_walk_frames: frame too small");
    const int64_t n_frames = cfg.frames();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    const double phase0 = angle(rng);  // matches simulate_walk_csi's first draw
    const double tex_x = angle(rng), tex_y = angle(rng);
    const uint32_t salt = static_cast<uint32_t>(rng());

    // Static textured background; per-pixel hash noise keeps the scene busy
    // but frame-to-frame constant, so a background model sees variance only
    // from the walker.
    GrayImage bg = GrayImage::filled(H, W, 0);
    for (int64_t r = 0; r < H; ++r) {
        for (int64_t c = 0; c < W; ++c) {
            const double wave = std::sin(static_cast<double>(r) * 0.31 + tex_x) *
                                std::cos(static_cast<double>(c) * 0.23 + tex_y);
            const uint32_t hv = hash32(salt ^ hash32(static_cast<uint32_t>(r) * 0x9E37u + static_cast<uint32_t>(c)));
            const double noise = (static_cast<double>(hv & 0xFFFFu) / 65535.0 - 0.5) * 40.0;
            const double v = 90.0 + 60.0 * wave + noise;
            bg.pix[static_cast<size_t>(r * W + c)] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }

    const double ppm = 0.55 * static_cast<double>(H) / kRefHeight;  // pixels per meter
    const double ground_y = 0.92 * static_cast<double>(H);

    std::vector<GrayImage> frames;
    frames.reserve(static_cast<size_t>(n_frames));
    for (int64_t fi = 0; fi < n_frames; ++fi) {
        const double t = static_cast<double>(fi) * cfg.frame_interval;
        GrayImage img = bg;
        const Body b = body_at(profile, cfg, t, phase0);
        if (b.present) {
            const double x = b.x * ppm;
            const double hip_y = ground_y - (b.hip_z + b.bob) * ppm;
            const double sho_y = ground_y - (b.shoulder_z + b.bob) * ppm;
            const double head_y = ground_y - (b.head_z + b.bob) * ppm;
            const double hpx = b.h * ppm;
            const double leg_px = b.leg_len * ppm, arm_px = b.arm_len * ppm;
            const double leg_w = 0.040 * hpx, arm_w = 0.030 * hpx;
            // Far-side limbs first so the near side overdraws them.
            draw_limb(img, x, sho_y, arm_px, b.arm_l, arm_w, 206);
            draw_limb(img, x, hip_y, leg_px, b.leg_l, leg_w, 212);
            draw_ellipse(img, x, 0.5 * (sho_y + hip_y) - 0.02 * hpx, 0.105 * hpx * profile.torso_width_scale,
                         0.26 * hpx, 0.0, 232);
            draw_ellipse(img, x, head_y, 0.070 * hpx, 0.082 * hpx, 0.0, 226);
            draw_limb(img, x, hip_y, leg_px, b.leg_r, leg_w, 224);
            draw_limb(img, x, sho_y, arm_px, b.arm_r, arm_w, 218);
        }
        frames.push_back(std::move(img));
    }
    return frames;
}

std::string make_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (spec.subjects < 1) throw std::invalid_argument("make_dataset: need at least one subject");
    if (spec.samples_per_subject < 2) throw std::invalid_argument("make_dataset: need at least two samples per subject");
    if (spec.gallery_per_subject < 1 || spec.gallery_per_subject >= spec.samples_per_subject)
        throw std::invalid_argument("make_dataset: gallery size must leave at least one probe sample");

    const auto profiles = make_profiles(spec.subjects, spec.seed);
    for (size_t i = 1; i < profiles.size(); ++i)
        if (profiles[i].subject_id == profiles[i - 1].subject_id)
            throw std::runtime_error("make_dataset: duplicate subject id");

    fs::create_directories(fs::path(out_dir) / "csi_raw");
    fs::create_directories(fs::path(out_dir) / "frames");

    struct Entry {
        int64_t subject, sample;
        std::string csi_rel, sil_rel, split;
    };
    const int64_t total = spec.subjects * spec.samples_per_subject;
    std::vector<Entry> entries(static_cast<size_t>(total));

    parallel_for_checked(total, [&](int64_t job) {
        const int64_t si = job / spec.samples_per_subject;
        const int64_t ii = job % spec.samples_per_subject;
        const SubjectProfile& prof = profiles[static_cast<size_t>(si)];

        char name[64];
        std::snprintf(name, sizeof(name), "s%02lld_i%02lld", static_cast<long long>(si), static_cast<long long>(ii));
        const uint64_t seed = sample_seed(static_cast<uint64_t>(si), static_cast<uint64_t>(ii), spec.seed);

        const CsiFrame csi = simulate_walk_csi(prof, spec.synth, seed);
        const std::string csi_rel = std::string("csi_raw/") + name + ".gfc";
        save_csi(csi, (fs::path(out_dir) / csi_rel).string());

        const auto frames = render_walk_frames(prof, spec.synth, seed);
        const std::string sil_rel = std::string("frames/") + name;
        fs::create_directories(fs::path(out_dir) / sil_rel);
        for (size_t fi = 0; fi < frames.size(); ++fi) {
            char fname[32];
            std::snprintf(fname, sizeof(fname), "f%03zu.pgm", fi);
            save_pgm(frames[fi], (fs::path(out_dir) / sil_rel / fname).string());
        }

        entries[static_cast<size_t>(job)] =
            Entry{si, ii, csi_rel, sil_rel, ii < spec.gallery_per_subject ? "gallery" : "probe"};
    });

    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw std::runtime_error("make_dataset: cannot write " + manifest_path);
    for (const auto& e : entries) {
        nlohmann::json j;
        j["subject_id"] = e.subject;
        j["sample_index"] = e.sample;
        j["csi_path"] = e.csi_rel;
        j["sil_path"] = e.sil_rel;
        j["split"] = e.split;
        out << j.dump() << "\n";
    }
    out.close();
    if (!out) throw std::runtime_error("make_dataset: failed writing " + manifest_path);
    return manifest_path;
}

}  // namespace gaitfi
