#include "gaitfi/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gaitfi/data.hpp"
#include "gaitfi/losses.hpp"
#include "gaitfi/nn.hpp"

namespace gaitfi {

namespace {

int64_t argmax_row(const float* row, int64_t k) {
    int64_t best = 0;
    for (int64_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

}  // namespace

TrainResult train_model(const Manifest& man, const RunConfig& cfg) {
    const ModalityMode modality = parse_modality(cfg.modality);
    const FusionMode fusion = parse_fusion(cfg.fusion);
    LstmFeature feature;
    if (cfg.lstm_feature == "last") feature = LstmFeature::LastHidden;
    else if (cfg.lstm_feature == "mean") feature = LstmFeature::TemporalMean;
    else throw std::invalid_argument("train: unknown lstm_feature '" + cfg.lstm_feature + "'");

    if (cfg.p < 1 || cfg.q < 1 || cfg.p * cfg.q != cfg.batch)
        throw std::invalid_argument("train: p*q must equal batch (got " + std::to_string(cfg.p) + "*" +
                                    std::to_string(cfg.q) + " != " + std::to_string(cfg.batch) + ")");
    if (cfg.alpha < 0) throw std::invalid_argument("train: alpha must be >= 0");
    if (cfg.margin <= 0) throw std::invalid_argument("train: margin must be > 0");
    if (cfg.lr <= 0) throw std::invalid_argument("train: lr must be > 0");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    const bool use_triplet = !cfg.use_ce || cfg.alpha > 0;
    if (use_triplet && (cfg.p < 2 || cfg.q < 2))
        throw std::invalid_argument("train: the triplet term needs p >= 2 and q >= 2");

    const auto gallery = man.split("gallery");
    if (gallery.empty()) throw std::runtime_error("train: manifest has no gallery samples");
    const std::vector<int64_t> subject_ids = man.subjects();
    const int64_t K = static_cast<int64_t>(subject_ids.size());
    if (K < 2) throw std::runtime_error("train: need at least 2 subjects");
    if (K < cfg.p)
        throw std::runtime_error("train: config wants " + std::to_string(cfg.p) + " subjects per batch, dataset has " +
                                 std::to_string(K));

    const DataDims dims{3, 114, cfg.csi_packets, cfg.frames, cfg.frame_size};
    const auto pool = load_samples(man, gallery, dims, modality);

    // Pool indices per class, ordered by sample index so the shuffle is the
    // only source of randomness.
    std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(K));
    for (size_t i = 0; i < pool.size(); ++i)
        by_class[static_cast<size_t>(class_index(subject_ids, pool[i].subject_id))].push_back(
            static_cast<int64_t>(i));
    for (auto& v : by_class) {
        std::sort(v.begin(), v.end(), [&pool](int64_t a, int64_t b) {
            return pool[static_cast<size_t>(a)].sample_index < pool[static_cast<size_t>(b)].sample_index;
        });
        if (static_cast<int64_t>(v.size()) < cfg.q)
            throw std::runtime_error("train: config wants " + std::to_string(cfg.q) +
                                     " gallery samples per subject per batch, a subject has only " +
                                     std::to_string(v.size()));
    }

    std::mt19937_64 rng(cfg.seed);
    GaitFiModel<float> model = GaitFiModel<float>::make(rng, modality, fusion, K, cfg.frames, cfg.frame_size, dims.csi_h,
                                                        dims.csi_w, feature);
    model.mark_trainable();
    auto named = model.parameters();
    std::vector<Tensor> params;
    params.reserve(named.size());
    for (auto& [name, t] : named) params.push_back(t);
    AdamState<float> adam = AdamState<float>::init(params, static_cast<float>(cfg.lr));

    const int64_t batches_per_epoch =
        (static_cast<int64_t>(gallery.size()) + cfg.batch - 1) / cfg.batch;

    std::vector<int64_t> class_order(static_cast<size_t>(K));
    std::iota(class_order.begin(), class_order.end(), int64_t{0});

    TrainResult result;
    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double ce_sum = 0.0, trip_sum = 0.0, total_sum = 0.0;
        int64_t correct = 0, seen = 0;

        for (int64_t bi = 0; bi < batches_per_epoch; ++bi) {
            std::shuffle(class_order.begin(), class_order.end(), rng);
            std::vector<int64_t> picks;
            picks.reserve(static_cast<size_t>(cfg.batch));
            for (int64_t pi = 0; pi < cfg.p; ++pi) {
                auto samples = by_class[static_cast<size_t>(class_order[static_cast<size_t>(pi)])];
                std::shuffle(samples.begin(), samples.end(), rng);
                picks.insert(picks.end(), samples.begin(), samples.begin() + cfg.q);
            }
            Batch batch = assemble_batch(pool, picks, subject_ids, dims, modality);

            Tape<float> tape;
            TapeScope<float> scope(tape);
            Tensor z = model.embed(batch.x_w, batch.x_v, /*training=*/true);
            Tensor logits = model.logits(z);
            Tensor probs = softmax(logits);
            Tensor ce = cross_entropy(probs, one_hot<float>(batch.labels, K));

            Tensor trip, total;
            if (use_triplet) trip = batch_hard_triplet(z, batch.labels, static_cast<float>(cfg.margin));
            if (!cfg.use_ce) total = trip;
            else if (cfg.alpha > 0) total = add(ce, scale(trip, static_cast<float>(cfg.alpha)));
            else total = ce;

            const double ce_v = ce.item();
            const double trip_v = trip.defined() ? trip.item() : 0.0;
            const double total_v = total.item();
            if (!std::isfinite(total_v) || !std::isfinite(ce_v) || !std::isfinite(trip_v))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                         std::to_string(bi) + " (ce=" + std::to_string(ce_v) +
                                         ", triplet=" + std::to_string(trip_v) + ")");
            ce_sum += ce_v;
            trip_sum += trip_v;
            total_sum += total_v;

            const float* ld = logits.data();
            for (int64_t r = 0; r < cfg.batch; ++r) {
                if (argmax_row(ld + r * K, K) == batch.labels[static_cast<size_t>(r)]) ++correct;
                ++seen;
            }

            tape.backward(total);
            adam_step(params, adam);
        }

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(EpochLog{epoch, ce_sum / static_cast<double>(batches_per_epoch),
                                      trip_sum / static_cast<double>(batches_per_epoch),
                                      total_sum / static_cast<double>(batches_per_epoch),
                                      static_cast<double>(correct) / static_cast<double>(seen), wall});
    }

    result.checkpoint.model = std::move(model);
    result.checkpoint.subject_ids = subject_ids;
    result.checkpoint.alpha = cfg.alpha;
    result.checkpoint.margin = cfg.margin;
    result.checkpoint.lr = cfg.lr;
    result.checkpoint.seed = cfg.seed;
    result.checkpoint.adam = std::move(adam);
    return result;
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("train: cannot write " + path);
    out << "epoch,ce_loss,triplet_loss,total_loss,train_accuracy,wall_seconds\n";
    char line[256];
    for (const auto& e : log) {
        std::snprintf(line, sizeof(line), "%lld,%.6f,%.6f,%.6f,%.6f,%.3f\n", static_cast<long long>(e.epoch),
                      e.ce_loss, e.triplet_loss, e.total_loss, e.train_accuracy, e.wall_seconds);
        out << line;
    }
    out.close();
    if (!out) throw std::runtime_error("train: failed writing " + path);
}

}  // namespace gaitfi
