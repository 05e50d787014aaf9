#pragma once

// Synthetic multimodal gait data. One kinematic walker trajectory drives
// both outputs of a sample: the CSI simulator treats body parts as moving
// multipath scatterers, the renderer draws the same walker as ellipses in a
// side view. Everything is a pure function of (profiles, layout, seed).

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "gaitfi/csi.hpp"
#include "gaitfi/vision.hpp"

namespace gaitfi {

struct SubjectProfile {
    int64_t subject_id = 0;
    double height_scale = 1.0;      // [0.8, 1.1] of the 1.7 m reference body
    double stride_period = 1.1;     // seconds per full gait cycle
    double limb_swing = 0.55;       // peak limb angle, radians
    double torso_width_scale = 1.0;
    double walk_speed = 1.2;        // m/s
    uint64_t rng_seed = 0;
};

// Evenly spreads each gait parameter over its range and assigns them to
// subjects through seed-derived permutations, so any two subjects differ in
// every varied parameter by at least the grid step.
std::vector<SubjectProfile> make_profiles(int64_t n_subjects, uint64_t master_seed);

struct ChannelModel {
    struct Path {
        double alpha = 0.0;  // amplitude attenuation
        double phi = 0.0;    // phase offset, radians
        double tau = 0.0;    // delay, seconds
    };
    std::vector<Path> paths;
    std::vector<double> freqs;  // subcarrier frequencies, Hz
    double noise_std = 0.0;

    static std::vector<double> default_subcarriers();  // 114 across 40 MHz at 5.2 GHz
};

// H(f_i) = sum_m alpha_m * exp(j * (phi_m - 2*pi*f_i*tau_m)).
std::complex<double> channel_response(const ChannelModel& model, int64_t subcarrier_index);

struct SynthConfig {
    CsiLayout layout;            // default 1 TX, 3 RX, 114 subcarriers, 800 pkt/s
    double duration = 2.0;       // capture seconds (CSI and video)
    int64_t frame_w = 320, frame_h = 240;
    double frame_interval = 0.035;  // seconds between video frames
    double noise_std = 0.02;     // complex channel noise, added before |.|
    double nan_fraction = 0.002; // injected invalid-measurement rate
    double dynamic_scale = 1.0;  // multiplies body-scatterer reflectivity
    double appear_time = 0.28;   // walker absent before this (lets the background model seed cleanly)

    int64_t packets() const { return static_cast<int64_t>(layout.packet_rate * duration + 0.5); }
    int64_t frames() const { return static_cast<int64_t>(duration / frame_interval); }
};

// Deterministic per-sample seed.
uint64_t sample_seed(uint64_t subject_id, uint64_t sample_index, uint64_t master_seed);

// Positions of the walker's radar-relevant body parts at time t, in meters:
// x along the walk, y lateral, z up. Valid only when present(t).
struct WalkerPose {
    bool present = false;
    double phase = 0.0;  // gait cycle phase, radians
    double x = 0.0;      // torso ground-plane position along the walk
    // Scatterer points: torso, left/right ankle, left/right hand.
    std::array<std::array<double, 3>, 5> points{};
};
WalkerPose walker_pose(const SubjectProfile& profile, const SynthConfig& cfg, double t, double phase0);

// Raw CSI frame (with injected NaN holes) for one walk.
CsiFrame simulate_walk_csi(const SubjectProfile& profile, const SynthConfig& cfg, uint64_t seed);

// Grayscale side-view video of the same walk.
std::vector<GrayImage> render_walk_frames(const SubjectProfile& profile, const SynthConfig& cfg, uint64_t seed);

struct DatasetSpec {
    int64_t subjects = 12;
    int64_t samples_per_subject = 30;
    int64_t gallery_per_subject = 20;
    uint64_t seed = 7;
    SynthConfig synth;
};

// Writes csi_raw/*.gfc, frames/<sample>/*.pgm and manifest.jsonl under
// out_dir. Returns the manifest path.
std::string make_dataset(const DatasetSpec& spec, const std::string& out_dir);

}  // namespace gaitfi
