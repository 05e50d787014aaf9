#include <cstdint>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "gaitfi/checkpoint.hpp"
#include "gaitfi/eval.hpp"
#include "gaitfi/gradcheck.hpp"
#include "gaitfi/losses.hpp"
#include "gaitfi/manifest.hpp"
#include "gaitfi/models.hpp"
#include "gaitfi/nn.hpp"
#include "gaitfi/prep.hpp"
#include "gaitfi/synth.hpp"
#include "gaitfi/train.hpp"

namespace {

using gaitfi::TensorT;
using D = TensorT<double>;
using NamedD = std::vector<std::pair<std::string, D>>;

struct CheckRow {
    std::string name;
    double tol;
    gaitfi::GradCheckReport rep;
};

// Finite-difference verification of every differentiable building block plus
// the two composed encoders. Sizes are small and probes strided so the whole
// suite stays well under a minute.
std::vector<CheckRow> run_gradcheck_suite(uint64_t seed) {
    using namespace gaitfi;
    std::mt19937_64 rng(seed);
    std::vector<CheckRow> rows;

    auto check = [&rows](const std::string& name, double tol, NamedD params, auto&& fwd, int64_t stride = 1,
                         double h = 1e-3) {
        rows.push_back({name, tol, gradcheck(fwd, params, h, stride)});
    };

    {
        D x = D::randn(rng, {2, 3, 6, 8});
        D w = D::randn(rng, {4, 3, 3, 3}, 0.0, 0.5);
        D b = D::randn(rng, {4});
        D r = D::randn(rng, {2, 4, 3, 4});
        check("conv2d", 1e-4, {{"x", x}, {"w", w}, {"b", b}},
              [=] { return sum(mul(conv2d(x, w, b, {2, 2}, {1, 1}), r)); });
    }
    {
        auto bn = BatchNorm2d<double>::make(3);
        D x = D::randn(rng, {2, 3, 4, 5});
        D r = D::randn(rng, {2, 3, 4, 5});
        check("batchnorm2d", 1e-4, {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}},
              [=]() mutable { return sum(mul(batchnorm2d(x, bn, true), r)); });
    }
    {
        D x = D::randn(rng, {2, 3, 6, 8});
        D r = D::randn(rng, {2, 3, 3, 4});
        check("maxpool2d", 1e-4, {{"x", x}}, [=] { return sum(mul(maxpool2d(x, {2, 2}, {2, 2}), r)); });
    }
    {
        D x = D::randn(rng, {3, 4});
        D w = D::randn(rng, {4, 2});
        D b = D::randn(rng, {2});
        D r = D::randn(rng, {3, 2});
        check("linear", 1e-4, {{"x", x}, {"w", w}, {"b", b}}, [=] { return sum(mul(linear(x, w, b), r)); });
    }
    {
        D x = D::randn(rng, {4, 6});
        D r = D::randn(rng, {4, 6});
        check("relu", 1e-4, {{"x", x}}, [=] { return sum(mul(relu(x), r)); });
        D y = D::randn(rng, {4, 6});
        check("sigmoid_tanh", 1e-4, {{"x", y}}, [=] { return sum(mul(sigmoid(y), tanh_op(y))); });
    }
    {
        auto lstm = LstmParams<double>::make(rng, 2, 4);
        std::vector<D> steps{D::randn(rng, {2, 2}), D::randn(rng, {2, 2}), D::randn(rng, {2, 2})};
        D r = D::randn(rng, {2, 4});
        check("lstm", 1e-4,
              {{"wx", lstm.wx}, {"wh", lstm.wh}, {"b", lstm.b}, {"x0", steps[0]}, {"x1", steps[1]}, {"x2", steps[2]}},
              [=] { return sum(mul(lstm_forward(steps, lstm, LstmFeature::LastHidden), r)); });
    }
    {
        D logits = D::randn(rng, {4, 5});
        const std::vector<int64_t> labels{0, 3, 1, 4};
        D onehot = one_hot<double>(labels, 5);
        check("softmax_cross_entropy", 1e-4, {{"logits", logits}},
              [=] { return cross_entropy(softmax(logits), onehot); });
    }
    {
        // Piecewise quadratic: the central difference is exact unless the
        // hardest-pair selection or a hinge switches inside +/-h, so probe
        // with a small step.
        D emb = D::randn(rng, {6, 4});
        const std::vector<int64_t> labels{0, 0, 1, 1, 2, 2};
        check("batch_hard_triplet", 1e-4, {{"emb", emb}}, [=] { return batch_hard_triplet(emb, labels, 0.2); }, 1,
              1e-6);
    }
    {
        // Composed convolutional encoder in training mode.
        auto enc = Lrcn<double>::make(rng, 2, 12, 16);
        D x = D::randn(rng, {2, 2, 12, 16});
        D r = D::randn(rng, {2, Lrcn<double>::kFeatureDim});
        // Deep ReLU stacks have densely packed kinks; any probe step that
        // crosses one measures a blend of two slopes. A small h keeps the
        // probe on one linear piece (double precision leaves plenty of
        // headroom above the rounding floor).
        NamedD params;
        enc.params("enc", params);
        params.emplace_back("x", x);
        check("lrcn_encoder", 1e-3, std::move(params), [=]() mutable { return sum(mul(enc.forward(x, true), r)); },
              37, 1e-6);
    }
    {
        // Full two-branch model: encoders, step-gathered LSTM, fusion, head,
        // CE plus weighted triplet.
        auto model = GaitFiModel<double>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, /*frames=*/3,
                                               /*frame_size=*/8, /*csi_h=*/10, /*csi_w=*/12);
        const std::vector<int64_t> labels{0, 0, 1, 1, 2, 2};
        D x_w = D::randn(rng, {6, 3, 10, 12});
        D x_v = D::randn(rng, {18, 1, 8, 8});
        D onehot = one_hot<double>(labels, 3);
        NamedD params = model.parameters();
        params.emplace_back("x_w", x_w);
        params.emplace_back("x_v", x_v);
        check("model_composed", 1e-3, std::move(params),
              [=]() mutable {
                  D z = model.embed(x_w, x_v, true);
                  D ce = cross_entropy(softmax(model.logits(z)), onehot);
                  return add(ce, scale(batch_hard_triplet(z, labels, 0.2), 0.5));
              },
              101, 1e-6);
    }
    return rows;
}

int cmd_gradcheck(uint64_t seed) {
    const auto rows = run_gradcheck_suite(seed);
    bool ok = true;
    for (const auto& r : rows) {
        const bool pass = r.rep.max_err < r.tol;
        ok = ok && pass;
        std::printf("%-24s max_rel_err %.3e  (tol %.0e, %lld probes)  %s\n", r.name.c_str(), r.rep.max_err, r.tol,
                    static_cast<long long>(r.rep.checked), pass ? "PASS" : "FAIL");
        if (!pass)
            std::printf("  worst: %s[%lld] analytic %.6e vs numeric %.6e\n", r.rep.worst_param.c_str(),
                        static_cast<long long>(r.rep.worst_index), r.rep.worst_analytic, r.rep.worst_numeric);
    }
    std::printf("gradcheck: %s\n", ok ? "all checks passed" : "FAILED");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WiFi + vision gait recognition pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic paired CSI/video dataset");
    std::string synth_out;
    gaitfi::DatasetSpec dspec;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--subjects", dspec.subjects, "number of subjects");
    synth->add_option("--samples", dspec.samples_per_subject, "samples per subject");
    synth->add_option("--gallery", dspec.gallery_per_subject, "gallery samples per subject (rest are probes)");
    synth->add_option("--seed", dspec.seed, "master seed");
    synth->add_option("--duration", dspec.synth.duration, "capture length in seconds");
    synth->add_option("--noise", dspec.synth.noise_std, "channel noise level");
    synth->add_option("--nan-fraction", dspec.synth.nan_fraction, "fraction of CSI readings invalidated");

    // csi-prep
    auto* cprep = app.add_subcommand("csi-prep", "Repair, normalize and resample raw CSI captures");
    std::string cp_manifest, cp_out_manifest;
    int64_t cp_packets = 500, cp_window = 0;
    uint64_t cp_seed = 7;
    cprep->add_option("--manifest", cp_manifest, "dataset manifest")->required();
    cprep->add_option("--out-manifest", cp_out_manifest, "where to write the updated manifest (default: in place)");
    cprep->add_option("--packets", cp_packets, "packets after temporal resampling");
    cprep->add_option("--denoise-window", cp_window, "moving-average width (odd; <2 disables)");
    cprep->add_option("--seed", cp_seed, "accepted for interface uniformity")->group("");

    // vision-prep
    auto* vprep = app.add_subcommand("vision-prep", "Extract fixed-length silhouette sequences from frames");
    std::string vp_manifest, vp_out_manifest, vp_corrupt_split = "probe", vp_subdir = "sil";
    int64_t vp_frames = 32, vp_size = 64;
    double vp_corrupt = 0.0;
    uint64_t vp_seed = 7;
    vprep->add_option("--manifest", vp_manifest, "dataset manifest")->required();
    vprep->add_option("--out-manifest", vp_out_manifest, "where to write the updated manifest (default: in place)");
    vprep->add_option("--frames", vp_frames, "silhouette sequence length");
    vprep->add_option("--size", vp_size, "silhouette side in pixels");
    vprep->add_option("--corrupt-foreground", vp_corrupt, "drop this fraction of foreground pixels");
    vprep->add_option("--corrupt-split", vp_corrupt_split, "which split to corrupt: gallery|probe|all");
    vprep->add_option("--out-subdir", vp_subdir, "output directory name under the dataset root");
    vprep->add_option("--seed", vp_seed, "seed for the corruption noise");

    // train
    auto* train = app.add_subcommand("train", "Train a model on the gallery split");
    std::string tr_data, tr_config, tr_out, tr_log;
    train->add_option("--data", tr_data, "dataset manifest")->required();
    train->add_option("--config", tr_config, "key = value config file");
    train->add_option("--out", tr_out, "output checkpoint path")->required();
    train->add_option("--log", tr_log, "training log CSV (default: <out>.log.csv)");
    std::vector<std::pair<std::string, CLI::Option*>> tr_overrides;
    auto add_override = [&](const std::string& flag, const std::string& key, const std::string& desc) {
        tr_overrides.emplace_back(key, train->add_option(flag, desc));
    };
    add_override("--alpha", "alpha", "triplet loss weight");
    add_override("--margin", "margin", "triplet margin");
    add_override("--lr", "lr", "Adam learning rate");
    add_override("--batch", "batch", "batch size (= p*q)");
    add_override("--epochs", "epochs", "training epochs");
    add_override("--p", "p", "subjects per batch");
    add_override("--q", "q", "samples per subject per batch");
    add_override("--seed", "seed", "training seed");
    add_override("--fusion", "fusion", "fusion mode: concat|add");
    add_override("--modality", "modality", "modality: wifi|vision|both");
    add_override("--lstm-feature", "lstm_feature", "sequence feature: last|mean");
    add_override("--use-ce", "use_ce", "include the cross-entropy term (true|false)");
    add_override("--frames", "frames", "silhouette sequence length");
    add_override("--size", "frame_size", "silhouette side in pixels");
    add_override("--packets", "csi_packets", "CSI packets per sample");

    // eval
    auto* eval = app.add_subcommand("eval", "Gallery-probe retrieval evaluation");
    std::string ev_ckpt, ev_data, ev_modality, ev_report, ev_confusion;
    int64_t ev_reps = 3;
    uint64_t ev_seed = 7;
    eval->add_option("--ckpt", ev_ckpt, "trained checkpoint")->required();
    eval->add_option("--data", ev_data, "dataset manifest")->required();
    eval->add_option("--modality", ev_modality, "must match the checkpoint (wifi|vision|both)");
    eval->add_option("--report", ev_report, "write a JSON report here");
    eval->add_option("--confusion", ev_confusion, "write the confusion matrix CSV here");
    eval->add_option("--reps", ev_reps, "timing repetitions (min 3)");
    eval->add_option("--seed", ev_seed, "accepted for interface uniformity")->group("");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
    uint64_t gc_seed = 42;
    gc->add_option("--seed", gc_seed, "seed for the probe tensors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            const std::string manifest = gaitfi::make_dataset(dspec, synth_out);
            std::printf("wrote %s (%lld subjects x %lld samples, %lld gallery each)\n", manifest.c_str(),
                        static_cast<long long>(dspec.subjects), static_cast<long long>(dspec.samples_per_subject),
                        static_cast<long long>(dspec.gallery_per_subject));
        } else if (cprep->parsed()) {
            const std::string out = cp_out_manifest.empty() ? cp_manifest : cp_out_manifest;
            gaitfi::run_csi_prep(cp_manifest, out, cp_packets, cp_window);
            std::printf("wrote %s\n", out.c_str());
        } else if (vprep->parsed()) {
            const std::string out = vp_out_manifest.empty() ? vp_manifest : vp_out_manifest;
            gaitfi::run_vision_prep(vp_manifest, out, vp_frames, vp_size, vp_corrupt, vp_corrupt_split, vp_seed,
                                    vp_subdir);
            std::printf("wrote %s\n", out.c_str());
        } else if (train->parsed()) {
            gaitfi::RunConfig cfg = gaitfi::load_run_config(tr_config);
            for (const auto& [key, opt] : tr_overrides)
                if (*opt) gaitfi::apply_config_kv(cfg, key, opt->results().front());
            const gaitfi::Manifest man = gaitfi::load_manifest(tr_data);
            gaitfi::TrainResult res = gaitfi::train_model(man, cfg);
            gaitfi::save_checkpoint(res.checkpoint, tr_out);
            gaitfi::write_train_log(res.log, tr_log.empty() ? tr_out + ".log.csv" : tr_log);
            const auto& last = res.log.back();
            std::printf("trained %lld epochs: ce %.4f, triplet %.4f, train accuracy %.4f -> %s\n",
                        static_cast<long long>(last.epoch), last.ce_loss, last.triplet_loss, last.train_accuracy,
                        tr_out.c_str());
        } else if (eval->parsed()) {
            gaitfi::Checkpoint ck = gaitfi::load_checkpoint(ev_ckpt);
            if (!ev_modality.empty() && gaitfi::parse_modality(ev_modality) != ck.model.modality)
                throw std::runtime_error("eval: checkpoint was trained with modality " +
                                         gaitfi::to_string(ck.model.modality) + ", requested " + ev_modality);
            const gaitfi::Manifest man = gaitfi::load_manifest(ev_data);
            const gaitfi::EvalReport rep = gaitfi::evaluate(ck.model, man, ev_reps);
            if (!ev_report.empty()) gaitfi::write_report_json(rep, ck, ev_report);
            if (!ev_confusion.empty()) gaitfi::write_confusion_csv(rep, ev_confusion);
            std::printf("accuracy %.4f over %lld probes (%lld gallery), %.2f +/- %.2f ms per sample\n", rep.accuracy,
                        static_cast<long long>(rep.probe_count), static_cast<long long>(rep.gallery_count),
                        rep.timing_mean_ms, rep.timing_std_ms);
            if (rep.has_sub_reports)
                std::printf("  wifi half %.4f, vision half %.4f\n", rep.wifi_accuracy, rep.vision_accuracy);
        } else if (gc->parsed()) {
            return cmd_gradcheck(gc_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "gaitfi: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
