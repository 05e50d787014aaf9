#include "gaitfi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace gaitfi {

namespace {

// Rows of fused embeddings for `samples`, forwarded in eval mode in fixed
// chunks. Chunking only bounds activation memory; per-row arithmetic is
// independent of the chunk split.
std::vector<std::vector<float>> embed_all(GaitFiModel<float>& model, const std::vector<SampleTensors>& pool,
                                          const std::vector<int64_t>& roster, const DataDims& dims,
                                          int64_t chunk = 8) {
    NoGradGuard<float> guard;
    std::vector<std::vector<float>> out(pool.size());
    std::vector<int64_t> picks;
    for (int64_t begin = 0; begin < static_cast<int64_t>(pool.size()); begin += chunk) {
        const int64_t end = std::min<int64_t>(begin + chunk, static_cast<int64_t>(pool.size()));
        picks.resize(static_cast<size_t>(end - begin));
        std::iota(picks.begin(), picks.end(), begin);
        Batch b = assemble_batch(pool, picks, roster, dims, model.modality);
        Tensor z = model.embed(b.x_w, b.x_v, /*training=*/false);
        const float* zd = z.data();
        const int64_t D = z.dim(1);
        for (int64_t r = 0; r < end - begin; ++r)
            out[static_cast<size_t>(begin + r)].assign(zd + r * D, zd + (r + 1) * D);
    }
    return out;
}

double sq_dist(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

int64_t predict_cols(const std::vector<float>& probe, const Gallery& g, size_t col_begin, size_t col_end) {
    std::vector<float> p(probe.begin() + col_begin, probe.begin() + col_end);
    Gallery sub;
    sub.subject_ids = g.subject_ids;
    sub.dim = static_cast<int64_t>(col_end - col_begin);
    sub.embeddings.resize(g.embeddings.size());
    for (size_t s = 0; s < g.embeddings.size(); ++s)
        for (const auto& e : g.embeddings[s])
            sub.embeddings[s].emplace_back(e.begin() + col_begin, e.begin() + col_end);
    return predict(p, sub);
}

}  // namespace

Gallery build_gallery(GaitFiModel<float>& model, const std::vector<SampleTensors>& samples, const DataDims& dims) {
    if (samples.empty()) throw std::runtime_error("eval: empty gallery");
    std::set<int64_t> ids;
    for (const auto& s : samples) ids.insert(s.subject_id);

    Gallery g;
    g.subject_ids.assign(ids.begin(), ids.end());
    g.embeddings.resize(g.subject_ids.size());

    const auto rows = embed_all(model, samples, g.subject_ids, dims);
    g.dim = static_cast<int64_t>(rows.front().size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto slot = class_index(g.subject_ids, samples[i].subject_id);
        g.embeddings[static_cast<size_t>(slot)].push_back(rows[i]);
    }
    return g;
}

int64_t predict(const std::vector<float>& probe, const Gallery& gallery) {
    if (gallery.subject_ids.empty()) throw std::runtime_error("eval: empty gallery");
    if (static_cast<int64_t>(probe.size()) != gallery.dim)
        throw std::invalid_argument("eval: probe dim " + std::to_string(probe.size()) + " != gallery dim " +
                                    std::to_string(gallery.dim));
    int64_t best = -1;
    double best_d = 0.0;
    for (size_t s = 0; s < gallery.subject_ids.size(); ++s) {
        double d = 0.0;
        for (const auto& e : gallery.embeddings[s]) d += sq_dist(probe, e);
        if (best < 0 || d < best_d) {  // ids ascend, so ties keep the lowest
            best = static_cast<int64_t>(s);
            best_d = d;
        }
    }
    return gallery.subject_ids[static_cast<size_t>(best)];
}

EvalReport evaluate(GaitFiModel<float>& model, const Manifest& man, int64_t timing_reps) {
    if (timing_reps < 3) timing_reps = 3;
    const auto gal_entries = man.split("gallery");
    const auto probe_entries = man.split("probe");
    if (gal_entries.empty()) throw std::runtime_error("eval: empty gallery");
    if (probe_entries.empty()) throw std::runtime_error("eval: no probe samples");

    std::set<std::pair<int64_t, int64_t>> gal_keys;
    for (const auto& e : gal_entries) gal_keys.insert({e.subject_id, e.sample_index});
    for (const auto& e : probe_entries)
        if (gal_keys.count({e.subject_id, e.sample_index}))
            throw std::runtime_error("eval: sample (subject " + std::to_string(e.subject_id) + ", index " +
                                     std::to_string(e.sample_index) + ") is in both gallery and probe");

    const DataDims dims{3, model.csi_h, model.csi_w, model.frames, model.frame_size};
    const auto gal_pool = load_samples(man, gal_entries, dims, model.modality);
    const auto probe_pool = load_samples(man, probe_entries, dims, model.modality);

    const Gallery gallery = build_gallery(model, gal_pool, dims);
    const std::vector<int64_t>& roster = gallery.subject_ids;
    const int64_t K = static_cast<int64_t>(roster.size());

    EvalReport r;
    r.subject_ids = roster;
    r.gallery_count = static_cast<int64_t>(gal_pool.size());
    r.probe_count = static_cast<int64_t>(probe_pool.size());
    r.confusion.assign(static_cast<size_t>(K * K), 0);

    const auto probe_rows = embed_all(model, probe_pool, roster, dims);
    int64_t correct = 0;
    for (size_t i = 0; i < probe_pool.size(); ++i) {
        const int64_t truth = probe_pool[i].subject_id;
        const int64_t pred = predict(probe_rows[i], gallery);
        if (pred == truth) ++correct;
        const int64_t ti = class_index(roster, truth);
        const int64_t pi = class_index(roster, pred);
        ++r.confusion[static_cast<size_t>(ti * K + pi)];
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(probe_pool.size());

    if (model.modality == ModalityMode::Both && model.fusion == FusionMode::Concat) {
        const size_t half = static_cast<size_t>(gallery.dim) / 2;
        int64_t wifi_ok = 0, vision_ok = 0;
        for (size_t i = 0; i < probe_pool.size(); ++i) {
            if (predict_cols(probe_rows[i], gallery, 0, half) == probe_pool[i].subject_id) ++wifi_ok;
            if (predict_cols(probe_rows[i], gallery, half, 2 * half) == probe_pool[i].subject_id) ++vision_ok;
        }
        r.has_sub_reports = true;
        r.wifi_accuracy = static_cast<double>(wifi_ok) / static_cast<double>(probe_pool.size());
        r.vision_accuracy = static_cast<double>(vision_ok) / static_cast<double>(probe_pool.size());
    }

    // Timing: embed + score one probe at a time, decoded data already in
    // RAM. Repetitions interleave whole passes so drift spreads evenly.
    std::vector<double> ms;
    ms.reserve(static_cast<size_t>(timing_reps) * probe_pool.size());
    NoGradGuard<float> guard;
    for (int64_t rep = 0; rep < timing_reps; ++rep) {
        for (size_t i = 0; i < probe_pool.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            Batch b = assemble_batch(probe_pool, {static_cast<int64_t>(i)}, roster, dims, model.modality);
            Tensor z = model.embed(b.x_w, b.x_v, /*training=*/false);
            const std::vector<float> row(z.data(), z.data() + z.dim(1));
            (void)predict(row, gallery);
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    }
    double mean = 0.0;
    for (double v : ms) mean += v;
    mean /= static_cast<double>(ms.size());
    double var = 0.0;
    for (double v : ms) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ms.size());
    r.timing_mean_ms = mean;
    r.timing_std_ms = std::sqrt(var);
    return r;
}

void write_report_json(const EvalReport& r, const Checkpoint& ck, const std::string& path) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["probe_count"] = r.probe_count;
    j["gallery_count"] = r.gallery_count;
    j["subjects"] = r.subject_ids;
    j["modality"] = to_string(ck.model.modality);
    j["fusion"] = to_string(ck.model.fusion);
    j["num_classes"] = ck.model.num_classes;
    j["seed"] = ck.seed;
    j["alpha"] = ck.alpha;
    j["margin"] = ck.margin;
    j["timing_ms"] = {{"mean", r.timing_mean_ms}, {"std", r.timing_std_ms}};
    if (r.has_sub_reports) {
        j["sub_reports"] = {{"wifi", {{"accuracy", r.wifi_accuracy}}},
                            {"vision", {{"accuracy", r.vision_accuracy}}}};
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("eval: cannot write " + path);
    out << j.dump(2) << "\n";
    out.close();
    if (!out) throw std::runtime_error("eval: failed writing " + path);
}

void write_confusion_csv(const EvalReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("eval: cannot write " + path);
    const int64_t K = static_cast<int64_t>(r.subject_ids.size());
    out << "true_subject";
    for (int64_t k = 0; k < K; ++k) out << ",pred_" << r.subject_ids[static_cast<size_t>(k)];
    out << "\n";
    for (int64_t t = 0; t < K; ++t) {
        out << r.subject_ids[static_cast<size_t>(t)];
        for (int64_t p = 0; p < K; ++p) out << "," << r.confusion[static_cast<size_t>(t * K + p)];
        out << "\n";
    }
    out.close();
    if (!out) throw std::runtime_error("eval: failed writing " + path);
}

}  // namespace gaitfi
