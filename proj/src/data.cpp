#include "gaitfi/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gaitfi/csi.hpp"
#include "gaitfi/parallel.hpp"
#include "gaitfi/vision.hpp"

namespace gaitfi {

std::vector<SampleTensors> load_samples(const Manifest& man, const std::vector<ManifestEntry>& entries,
                                        const DataDims& dims, ModalityMode modality) {
    std::vector<SampleTensors> out(entries.size());
    parallel_for_checked(static_cast<int64_t>(entries.size()), [&](int64_t i) {
        const ManifestEntry& e = entries[static_cast<size_t>(i)];
        SampleTensors& s = out[static_cast<size_t>(i)];
        s.subject_id = e.subject_id;
        s.sample_index = e.sample_index;

        if (modality != ModalityMode::Vision) {
            const std::string path = man.resolve(e.csi_path);
            const CsiFrame frame = load_csi(path);
            if (frame.layout.streams() != dims.csi_streams || frame.layout.n_subcarriers != dims.csi_h)
                throw std::runtime_error("data: " + path + " has " + std::to_string(frame.layout.streams()) + "x" +
                                         std::to_string(frame.layout.n_subcarriers) + " streams x subcarriers, expected " +
                                         std::to_string(dims.csi_streams) + "x" + std::to_string(dims.csi_h));
            if (frame.packets != dims.csi_w)
                throw std::runtime_error("data: " + path + " has " + std::to_string(frame.packets) +
                                         " packets, expected " + std::to_string(dims.csi_w) +
                                         " (run csi-prep first)");
            s.csi.resize(frame.amp.size());
            for (size_t k = 0; k < frame.amp.size(); ++k) {
                const float v = frame.amp[k];
                if (!frame.valid[k] || !std::isfinite(v))
                    throw std::runtime_error("data: " + path + " holds invalid measurements (run csi-prep first)");
                s.csi[k] = v;
            }
        }
        if (modality != ModalityMode::Wifi) {
            const std::string path = man.resolve(e.sil_path);
            SilhouetteSequence seq;
            try {
                seq = load_silhouettes(path);
            } catch (const std::exception& ex) {
                throw std::runtime_error("data: " + path + ": " + ex.what() + " (run vision-prep first)");
            }
            if (seq.length != dims.frames || seq.size != dims.frame_size)
                throw std::runtime_error("data: " + path + " holds " + std::to_string(seq.length) + " frames of side " +
                                         std::to_string(seq.size) + ", expected " + std::to_string(dims.frames) +
                                         " of side " + std::to_string(dims.frame_size));
            s.sil.resize(seq.frames.size());
            for (size_t k = 0; k < seq.frames.size(); ++k) s.sil[k] = static_cast<float>(seq.frames[k]);
        }
    });
    return out;
}

int64_t class_index(const std::vector<int64_t>& subject_ids, int64_t subject) {
    const auto it = std::lower_bound(subject_ids.begin(), subject_ids.end(), subject);
    if (it == subject_ids.end() || *it != subject)
        throw std::runtime_error("data: subject " + std::to_string(subject) + " missing from the roster");
    return it - subject_ids.begin();
}

Batch assemble_batch(const std::vector<SampleTensors>& pool, const std::vector<int64_t>& picks,
                     const std::vector<int64_t>& subject_ids, const DataDims& dims, ModalityMode modality) {
    const int64_t B = static_cast<int64_t>(picks.size());
    if (B == 0) throw std::invalid_argument("assemble_batch: empty batch");
    Batch batch;
    batch.labels.resize(static_cast<size_t>(B));

    const int64_t csi_n = dims.csi_streams * dims.csi_h * dims.csi_w;
    const int64_t sil_n = dims.frames * dims.frame_size * dims.frame_size;
    float* wd = nullptr;
    float* vd = nullptr;
    if (modality != ModalityMode::Vision) {
        batch.x_w = Tensor::zeros({B, dims.csi_streams, dims.csi_h, dims.csi_w});
        wd = batch.x_w.data();
    }
    if (modality != ModalityMode::Wifi) {
        batch.x_v = Tensor::zeros({B * dims.frames, 1, dims.frame_size, dims.frame_size});
        vd = batch.x_v.data();
    }
    for (int64_t b = 0; b < B; ++b) {
        const SampleTensors& s = pool.at(static_cast<size_t>(picks[static_cast<size_t>(b)]));
        batch.labels[static_cast<size_t>(b)] = class_index(subject_ids, s.subject_id);
        if (wd) {
            if (static_cast<int64_t>(s.csi.size()) != csi_n)
                throw std::runtime_error("assemble_batch: sample csi size mismatch");
            std::memcpy(wd + b * csi_n, s.csi.data(), sizeof(float) * static_cast<size_t>(csi_n));
        }
        if (vd) {
            if (static_cast<int64_t>(s.sil.size()) != sil_n)
                throw std::runtime_error("assemble_batch: sample silhouette size mismatch");
            std::memcpy(vd + b * sil_n, s.sil.data(), sizeof(float) * static_cast<size_t>(sil_n));
        }
    }
    return batch;
}

}  // namespace gaitfi
