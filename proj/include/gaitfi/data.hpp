#pragma once

// Decodes preprocessed dataset samples into flat float buffers kept in RAM,
// so training batches and evaluation passes are pure memory copies.

#include <cstdint>
#include <string>
#include <vector>

#include "gaitfi/manifest.hpp"
#include "gaitfi/models.hpp"
#include "gaitfi/tensor.hpp"

namespace gaitfi {

struct SampleTensors {
    int64_t subject_id = 0;
    int64_t sample_index = 0;
    std::vector<float> csi;  // streams * subcarriers * packets, row-major
    std::vector<float> sil;  // frames * size * size, values {0,1}
};

struct DataDims {
    int64_t csi_streams = 3, csi_h = 114, csi_w = 500;
    int64_t frames = 32, frame_size = 64;
};

// Loads every entry; reads only the modalities the model consumes. Errors
// point at the offending file and suggest the missing preprocessing step.
std::vector<SampleTensors> load_samples(const Manifest& man, const std::vector<ManifestEntry>& entries,
                                        const DataDims& dims, ModalityMode modality);

// Copies selected samples into batch tensors. x_w is [B, C, H, W]; x_v is
// [B*L, 1, S, S] with sample n's frames at rows n*L .. n*L+L-1. Unused
// modalities come back as undefined tensors.
struct Batch {
    Tensor x_w, x_v;
    std::vector<int64_t> labels;  // class indices
};
Batch assemble_batch(const std::vector<SampleTensors>& pool, const std::vector<int64_t>& picks,
                     const std::vector<int64_t>& subject_ids, const DataDims& dims, ModalityMode modality);

// Class index of a subject id within the sorted roster; error if absent.
int64_t class_index(const std::vector<int64_t>& subject_ids, int64_t subject);

}  // namespace gaitfi
