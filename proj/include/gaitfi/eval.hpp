#pragma once

// Gallery-probe retrieval. A probe is assigned to the subject whose gallery
// embeddings minimize the summed squared Euclidean distance; ties go to the
// lowest subject id. Evaluation reports accuracy, a confusion matrix and
// per-probe inference timing (embedding + scoring, no disk I/O).

#include <cstdint>
#include <string>
#include <vector>

#include "gaitfi/checkpoint.hpp"
#include "gaitfi/data.hpp"
#include "gaitfi/manifest.hpp"

namespace gaitfi {

struct Gallery {
    std::vector<int64_t> subject_ids;  // sorted distinct
    int64_t dim = 0;
    // Embeddings grouped per subject, same order as subject_ids.
    std::vector<std::vector<std::vector<float>>> embeddings;
};

Gallery build_gallery(GaitFiModel<float>& model, const std::vector<SampleTensors>& samples, const DataDims& dims);

// Summed squared distance to each subject's gallery; argmin subject id.
int64_t predict(const std::vector<float>& probe, const Gallery& gallery);

struct EvalReport {
    double accuracy = 0.0;
    int64_t probe_count = 0;
    int64_t gallery_count = 0;
    std::vector<int64_t> subject_ids;
    std::vector<int64_t> confusion;  // K*K, [true*K + predicted]
    double timing_mean_ms = 0.0;
    double timing_std_ms = 0.0;
    // For concat-fused two-branch models: accuracy of each embedding half.
    bool has_sub_reports = false;
    double wifi_accuracy = 0.0;
    double vision_accuracy = 0.0;
};

EvalReport evaluate(GaitFiModel<float>& model, const Manifest& man, int64_t timing_reps = 3);

void write_report_json(const EvalReport& r, const Checkpoint& ck, const std::string& path);
void write_confusion_csv(const EvalReport& r, const std::string& path);

}  // namespace gaitfi
