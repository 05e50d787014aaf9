#pragma once

// Model checkpoint container: a JSON header carrying the architecture and
// run metadata, followed by named float32 tensor records (parameters, batch
// norm running stats, optional Adam moments). No wall-clock fields, so two
// identically seeded runs write identical bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gaitfi/models.hpp"
#include "gaitfi/optim.hpp"

namespace gaitfi {

struct Checkpoint {
    GaitFiModel<float> model;
    std::vector<int64_t> subject_ids;  // sorted; class k <-> subject_ids[k]
    double alpha = 0.001;
    double margin = 0.2;
    double lr = 1e-3;
    uint64_t seed = 0;
    std::optional<AdamState<float>> adam;  // aligned with model.parameters()
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gaitfi
