#pragma once

// Joint training loop: PK-sampled batches from the gallery split, cross
// entropy on head logits plus a weighted batch-hard triplet term on the
// fused embeddings, Adam updates, per-epoch logging. Fully seeded: one
// generator drives model init and all sampling, so a seed pins every byte
// of the resulting checkpoint.

#include <cstdint>
#include <string>
#include <vector>

#include "gaitfi/checkpoint.hpp"
#include "gaitfi/manifest.hpp"

namespace gaitfi {

struct EpochLog {
    int64_t epoch = 0;  // 1-based
    double ce_loss = 0.0;
    double triplet_loss = 0.0;
    double total_loss = 0.0;
    double train_accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
};

// Validates the config against the manifest (P subjects with Q gallery
// samples each must exist, P*Q must equal the batch size) before any work.
TrainResult train_model(const Manifest& man, const RunConfig& cfg);

void write_train_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace gaitfi
