#include "gaitfi/prep.hpp"

#include <filesystem>
#include <stdexcept>

#include "gaitfi/csi.hpp"
#include "gaitfi/manifest.hpp"
#include "gaitfi/parallel.hpp"
#include "gaitfi/synth.hpp"
#include "gaitfi/vision.hpp"

namespace gaitfi {

namespace fs = std::filesystem;

void run_csi_prep(const std::string& manifest_in, const std::string& manifest_out, int64_t target_packets,
                  int64_t denoise_window) {
    if (target_packets < 1) throw std::invalid_argument("csi-prep: target packet count must be >= 1");
    Manifest man = load_manifest(manifest_in);
    fs::create_directories(fs::path(man.root) / "csi_proc");

    parallel_for_checked(static_cast<int64_t>(man.entries.size()), [&](int64_t i) {
        ManifestEntry& e = man.entries[static_cast<size_t>(i)];
        const CsiFrame raw = load_csi(man.resolve(e.csi_path));
        const CsiFrame done = preprocess_csi(raw, target_packets, denoise_window);
        const std::string rel = "csi_proc/" + fs::path(e.csi_path).filename().string();
        save_csi(done, man.resolve(rel));
        e.csi_path = rel;
    });
    save_manifest(man, manifest_out);
}

void run_vision_prep(const std::string& manifest_in, const std::string& manifest_out, int64_t frames,
                     int64_t frame_size, double corrupt_prob, const std::string& corrupt_split,
                     uint64_t corrupt_seed, const std::string& out_subdir) {
    if (frames < 1) throw std::invalid_argument("vision-prep: sequence length must be >= 1");
    if (frame_size < 2) throw std::invalid_argument("vision-prep: frame size must be >= 2");
    if (corrupt_prob < 0.0 || corrupt_prob > 1.0)
        throw std::invalid_argument("vision-prep: corruption probability must be in [0,1]");
    if (corrupt_prob > 0.0 && corrupt_split != "gallery" && corrupt_split != "probe" && corrupt_split != "all")
        throw std::invalid_argument("vision-prep: corrupt split must be gallery, probe or all");
    if (out_subdir.empty() || out_subdir.find('/') != std::string::npos)
        throw std::invalid_argument("vision-prep: output subdirectory must be a bare name");
    Manifest man = load_manifest(manifest_in);
    fs::create_directories(fs::path(man.root) / out_subdir);

    parallel_for_checked(static_cast<int64_t>(man.entries.size()), [&](int64_t i) {
        ManifestEntry& e = man.entries[static_cast<size_t>(i)];
        const auto paths = list_pgm_frames(man.resolve(e.sil_path));
        if (paths.empty()) throw std::runtime_error("vision-prep: no frames in " + man.resolve(e.sil_path));
        std::vector<GrayImage> video;
        video.reserve(paths.size());
        for (const auto& p : paths) video.push_back(load_pgm(p));

        SilhouetteSequence seq = silhouettes_from_frames(video, frames, frame_size);
        if (corrupt_prob > 0.0 && (corrupt_split == "all" || corrupt_split == e.split))
            corrupt_silhouettes(seq, corrupt_prob,
                                sample_seed(static_cast<uint64_t>(e.subject_id),
                                            static_cast<uint64_t>(e.sample_index), corrupt_seed));

        const std::string rel = out_subdir + "/" + fs::path(e.sil_path).filename().string() + ".gfs";
        save_silhouettes(seq, man.resolve(rel));
        e.sil_path = rel;
    });
    save_manifest(man, manifest_out);
}

}  // namespace gaitfi
