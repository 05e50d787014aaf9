#pragma once

// Encoder architectures and the two-stream recognition model.
//
// Lrcn: the shared conv backbone (8/16/32 channels, each stage a stride-2
// 3x3 conv followed by two residual blocks) ending in a 64-d linear map.
// The CSI branch consumes the whole 3x114x500 sample as one image; the
// vision branch runs the same family (1 input channel) per frame and feeds
// the per-frame features to an LSTM. WifiLrcn is the wider single-modality
// variant with stride-5 ingest, projection shortcuts and a K-way classifier.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gaitfi/nn.hpp"
#include "gaitfi/tensor.hpp"

namespace gaitfi {

enum class FusionMode { Concat, Add };
enum class ModalityMode { Wifi, Vision, Both };

inline std::string to_string(FusionMode m) { return m == FusionMode::Concat ? "concat" : "add"; }
inline std::string to_string(ModalityMode m) {
    switch (m) {
        case ModalityMode::Wifi: return "wifi";
        case ModalityMode::Vision: return "vision";
        default: return "both";
    }
}

inline FusionMode parse_fusion(const std::string& s) {
    if (s == "concat") return FusionMode::Concat;
    if (s == "add") return FusionMode::Add;
    throw std::invalid_argument("unknown fusion mode '" + s + "' (expected concat|add)");
}

inline ModalityMode parse_modality(const std::string& s) {
    if (s == "wifi") return ModalityMode::Wifi;
    if (s == "vision") return ModalityMode::Vision;
    if (s == "both") return ModalityMode::Both;
    throw std::invalid_argument("unknown modality '" + s + "' (expected wifi|vision|both)");
}

template <class T>
using NamedParams = std::vector<std::pair<std::string, TensorT<T>>>;

template <class T>
struct ConvLayer {
    TensorT<T> w, b;
    std::array<int64_t, 2> stride{1, 1}, pad{0, 0};

    static ConvLayer make(std::mt19937_64& rng, int64_t out_ch, int64_t in_ch, int64_t kh, int64_t kw,
                          std::array<int64_t, 2> stride, std::array<int64_t, 2> pad) {
        ConvLayer l;
        const T bound = std::sqrt(T(6) / static_cast<T>(in_ch * kh * kw));  // He-uniform
        l.w = TensorT<T>::uniform(rng, {out_ch, in_ch, kh, kw}, -bound, bound);
        l.b = TensorT<T>::zeros({out_ch});
        l.stride = stride;
        l.pad = pad;
        return l;
    }

    TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, stride, pad); }

    int64_t param_count() const { return w.numel() + b.numel(); }
};

template <class T>
struct ConvBnLayer {
    ConvLayer<T> conv;
    BatchNorm2d<T> bn;

    static ConvBnLayer make(std::mt19937_64& rng, int64_t out_ch, int64_t in_ch, int64_t kh, int64_t kw,
                            std::array<int64_t, 2> stride, std::array<int64_t, 2> pad) {
        ConvBnLayer l;
        l.conv = ConvLayer<T>::make(rng, out_ch, in_ch, kh, kw, stride, pad);
        l.bn = BatchNorm2d<T>::make(out_ch);
        return l;
    }

    TensorT<T> forward(const TensorT<T>& x, bool training) { return batchnorm2d(conv.forward(x), bn, training); }

    void params(const std::string& prefix, NamedParams<T>& out) {
        out.emplace_back(prefix + ".conv.w", conv.w);
        out.emplace_back(prefix + ".conv.b", conv.b);
        out.emplace_back(prefix + ".bn.gamma", bn.gamma);
        out.emplace_back(prefix + ".bn.beta", bn.beta);
    }
    void buffers(const std::string& prefix, NamedParams<T>& out) {
        out.emplace_back(prefix + ".bn.running_mean", bn.running_mean);
        out.emplace_back(prefix + ".bn.running_var", bn.running_var);
    }
};

// Two 3x3 stride-1 convs with batch norm; ReLU between them and after the
// shortcut addition. A 1x1 conv + BN projects the shortcut when the channel
// count changes.
template <class T>
struct ResidualBlock {
    ConvBnLayer<T> c1, c2;
    bool projected = false;
    ConvBnLayer<T> proj;

    static ResidualBlock make(std::mt19937_64& rng, int64_t in_ch, int64_t out_ch) {
        ResidualBlock b;
        b.c1 = ConvBnLayer<T>::make(rng, out_ch, in_ch, 3, 3, {1, 1}, {1, 1});
        b.c2 = ConvBnLayer<T>::make(rng, out_ch, out_ch, 3, 3, {1, 1}, {1, 1});
        if (in_ch != out_ch) {
            b.projected = true;
            b.proj = ConvBnLayer<T>::make(rng, out_ch, in_ch, 1, 1, {1, 1}, {0, 0});
        }
        return b;
    }

    TensorT<T> forward(const TensorT<T>& x, bool training) {
        TensorT<T> path = c2.forward(relu(c1.forward(x, training)), training);
        TensorT<T> shortcut = projected ? proj.forward(x, training) : x;
        return relu(add(path, shortcut));
    }

    void params(const std::string& prefix, NamedParams<T>& out) {
        c1.params(prefix + ".c1", out);
        c2.params(prefix + ".c2", out);
        if (projected) proj.params(prefix + ".proj", out);
    }
    void buffers(const std::string& prefix, NamedParams<T>& out) {
        c1.buffers(prefix + ".c1", out);
        c2.buffers(prefix + ".c2", out);
        if (projected) proj.buffers(prefix + ".proj", out);
    }

    static int64_t param_count_for(int64_t in_ch, int64_t out_ch) {
        int64_t n = out_ch * in_ch * 9 + out_ch + 2 * out_ch;    // c1 + its BN
        n += out_ch * out_ch * 9 + out_ch + 2 * out_ch;          // c2 + its BN
        if (in_ch != out_ch) n += out_ch * in_ch + out_ch + 2 * out_ch;  // projection
        return n;
    }
};

// ---------------------------------------------------------------------------
// LRCN encoder (Table-style: conv s2 + 2 residual blocks per stage, fc to 64)
// ---------------------------------------------------------------------------

template <class T>
struct Lrcn {
    int64_t in_ch = 0, in_h = 0, in_w = 0, flatten_dim = 0;
    ConvBnLayer<T> conv1;
    ResidualBlock<T> res1a, res1b;
    ConvBnLayer<T> conv2;
    ResidualBlock<T> res2a, res2b;
    ConvBnLayer<T> conv3;
    ResidualBlock<T> res3a, res3b;
    TensorT<T> fc_w, fc_b;

    static constexpr int64_t kFeatureDim = 64;

    static Lrcn make(std::mt19937_64& rng, int64_t in_ch, int64_t in_h, int64_t in_w) {
        Lrcn m;
        m.in_ch = in_ch;
        m.in_h = in_h;
        m.in_w = in_w;
        m.conv1 = ConvBnLayer<T>::make(rng, 8, in_ch, 3, 3, {2, 2}, {1, 1});
        m.res1a = ResidualBlock<T>::make(rng, 8, 8);
        m.res1b = ResidualBlock<T>::make(rng, 8, 8);
        m.conv2 = ConvBnLayer<T>::make(rng, 16, 8, 3, 3, {2, 2}, {1, 1});
        m.res2a = ResidualBlock<T>::make(rng, 16, 16);
        m.res2b = ResidualBlock<T>::make(rng, 16, 16);
        m.conv3 = ConvBnLayer<T>::make(rng, 32, 16, 3, 3, {2, 2}, {1, 1});
        m.res3a = ResidualBlock<T>::make(rng, 32, 32);
        m.res3b = ResidualBlock<T>::make(rng, 32, 32);
        const int64_t h3 = conv_out_dim(conv_out_dim(conv_out_dim(in_h, 3, 2, 1), 3, 2, 1), 3, 2, 1);
        const int64_t w3 = conv_out_dim(conv_out_dim(conv_out_dim(in_w, 3, 2, 1), 3, 2, 1), 3, 2, 1);
        m.flatten_dim = 32 * h3 * w3;
        const T bound = T(1) / std::sqrt(static_cast<T>(m.flatten_dim));
        m.fc_w = TensorT<T>::uniform(rng, {m.flatten_dim, kFeatureDim}, -bound, bound);
        m.fc_b = TensorT<T>::zeros({kFeatureDim});
        return m;
    }

    TensorT<T> forward(const TensorT<T>& x, bool training) {
        if (x.rank() != 4 || x.dim(1) != in_ch || x.dim(2) != in_h || x.dim(3) != in_w)
            throw std::invalid_argument("lrcn: expected input [N, " + std::to_string(in_ch) + ", " + std::to_string(in_h) +
                                        ", " + std::to_string(in_w) + "] flattening to " + std::to_string(flatten_dim) +
                                        ", got " + shape_str(x.shape()));
        TensorT<T> a = relu(conv1.forward(x, training));
        a = res1b.forward(res1a.forward(a, training), training);
        a = relu(conv2.forward(a, training));
        a = res2b.forward(res2a.forward(a, training), training);
        a = relu(conv3.forward(a, training));
        a = res3b.forward(res3a.forward(a, training), training);
        TensorT<T> flat = reshape(a, {x.dim(0), flatten_dim});
        return linear(flat, fc_w, fc_b);
    }

    void params(const std::string& prefix, NamedParams<T>& out) {
        conv1.params(prefix + ".conv1", out);
        res1a.params(prefix + ".res1a", out);
        res1b.params(prefix + ".res1b", out);
        conv2.params(prefix + ".conv2", out);
        res2a.params(prefix + ".res2a", out);
        res2b.params(prefix + ".res2b", out);
        conv3.params(prefix + ".conv3", out);
        res3a.params(prefix + ".res3a", out);
        res3b.params(prefix + ".res3b", out);
        out.emplace_back(prefix + ".fc.w", fc_w);
        out.emplace_back(prefix + ".fc.b", fc_b);
    }
    void buffers(const std::string& prefix, NamedParams<T>& out) {
        conv1.buffers(prefix + ".conv1", out);
        res1a.buffers(prefix + ".res1a", out);
        res1b.buffers(prefix + ".res1b", out);
        conv2.buffers(prefix + ".conv2", out);
        res2a.buffers(prefix + ".res2a", out);
        res2b.buffers(prefix + ".res2b", out);
        conv3.buffers(prefix + ".conv3", out);
        res3a.buffers(prefix + ".res3a", out);
        res3b.buffers(prefix + ".res3b", out);
    }

    static int64_t param_count_for(int64_t in_ch, int64_t in_h, int64_t in_w) {
        auto stage_dim = [](int64_t d) { return conv_out_dim(d, 3, 2, 1); };
        const int64_t h3 = stage_dim(stage_dim(stage_dim(in_h)));
        const int64_t w3 = stage_dim(stage_dim(stage_dim(in_w)));
        int64_t n = 8 * in_ch * 9 + 8 + 16;  // conv1 + BN
        n += 2 * ResidualBlock<T>::param_count_for(8, 8);
        n += 16 * 8 * 9 + 16 + 32;
        n += 2 * ResidualBlock<T>::param_count_for(16, 16);
        n += 32 * 16 * 9 + 32 + 64;
        n += 2 * ResidualBlock<T>::param_count_for(32, 32);
        n += 32 * h3 * w3 * kFeatureDim + kFeatureDim;
        return n;
    }
};

// ---------------------------------------------------------------------------
// WiFi-LRCN: the wider single-modality classifier
// ---------------------------------------------------------------------------

template <class T>
struct WifiLrcn {
    int64_t num_classes = 0, flatten_dim = 0;
    ConvBnLayer<T> conv1;
    ResidualBlock<T> res1a, res1b;
    ConvBnLayer<T> conv2;
    ResidualBlock<T> res2a, res2b;
    ConvBnLayer<T> conv3;
    ResidualBlock<T> res3a, res3b;
    TensorT<T> fc1_w, fc1_b, fc2_w, fc2_b;

    static constexpr int64_t kInCh = 3, kInH = 114, kInW = 500;

    static WifiLrcn make(std::mt19937_64& rng, int64_t num_classes) {
        if (param_count_for(num_classes) <= Lrcn<T>::param_count_for(kInCh, kInH, kInW))
            throw std::logic_error("wifi-lrcn: expected strictly more parameters than the compact encoder");
        WifiLrcn m;
        m.num_classes = num_classes;
        m.conv1 = ConvBnLayer<T>::make(rng, 64, kInCh, 7, 21, {5, 5}, {3, 10});
        m.res1a = ResidualBlock<T>::make(rng, 64, 64);
        m.res1b = ResidualBlock<T>::make(rng, 64, 64);
        m.conv2 = ConvBnLayer<T>::make(rng, 64, 64, 3, 7, {1, 1}, {1, 3});
        m.res2a = ResidualBlock<T>::make(rng, 64, 128);
        m.res2b = ResidualBlock<T>::make(rng, 128, 128);
        m.conv3 = ConvBnLayer<T>::make(rng, 256, 128, 3, 7, {1, 1}, {1, 3});
        m.res3a = ResidualBlock<T>::make(rng, 256, 512);
        m.res3b = ResidualBlock<T>::make(rng, 512, 512);
        const int64_t h1 = conv_out_dim(kInH, 7, 5, 3), w1 = conv_out_dim(kInW, 21, 5, 10);
        const int64_t w_p1 = w1 / 2, w_p2 = w_p1 / 2;
        m.flatten_dim = 512 * h1 * w_p2;
        const T b1 = T(1) / std::sqrt(static_cast<T>(m.flatten_dim));
        m.fc1_w = TensorT<T>::uniform(rng, {m.flatten_dim, 512}, -b1, b1);
        m.fc1_b = TensorT<T>::zeros({512});
        const T b2 = T(1) / std::sqrt(T(512));
        m.fc2_w = TensorT<T>::uniform(rng, {512, num_classes}, -b2, b2);
        m.fc2_b = TensorT<T>::zeros({num_classes});
        return m;
    }

    // Returns (512-d feature, K-way logits).
    std::pair<TensorT<T>, TensorT<T>> forward(const TensorT<T>& x, bool training) {
        if (x.rank() != 4 || x.dim(1) != kInCh || x.dim(2) != kInH || x.dim(3) != kInW)
            throw std::invalid_argument("wifi-lrcn: expected input [N, 3, 114, 500], got " + shape_str(x.shape()));
        TensorT<T> a = relu(conv1.forward(x, training));
        a = res1b.forward(res1a.forward(a, training), training);
        a = relu(conv2.forward(a, training));
        a = res2b.forward(res2a.forward(a, training), training);
        a = maxpool2d(a, {1, 2}, {1, 2});
        a = relu(conv3.forward(a, training));
        a = maxpool2d(a, {1, 2}, {1, 2});
        a = res3b.forward(res3a.forward(a, training), training);
        TensorT<T> flat = reshape(a, {x.dim(0), flatten_dim});
        TensorT<T> feature = linear(flat, fc1_w, fc1_b);
        TensorT<T> logits = linear(feature, fc2_w, fc2_b);
        return {feature, logits};
    }

    void params(const std::string& prefix, NamedParams<T>& out) {
        conv1.params(prefix + ".conv1", out);
        res1a.params(prefix + ".res1a", out);
        res1b.params(prefix + ".res1b", out);
        conv2.params(prefix + ".conv2", out);
        res2a.params(prefix + ".res2a", out);
        res2b.params(prefix + ".res2b", out);
        conv3.params(prefix + ".conv3", out);
        res3a.params(prefix + ".res3a", out);
        res3b.params(prefix + ".res3b", out);
        out.emplace_back(prefix + ".fc1.w", fc1_w);
        out.emplace_back(prefix + ".fc1.b", fc1_b);
        out.emplace_back(prefix + ".fc2.w", fc2_w);
        out.emplace_back(prefix + ".fc2.b", fc2_b);
    }

    static int64_t param_count_for(int64_t num_classes) {
        const int64_t h1 = conv_out_dim(kInH, 7, 5, 3), w1 = conv_out_dim(kInW, 21, 5, 10);
        const int64_t flatten = 512 * h1 * ((w1 / 2) / 2);
        int64_t n = 64 * kInCh * 7 * 21 + 64 + 128;  // conv1 + BN
        n += ResidualBlock<T>::param_count_for(64, 64) * 2;
        n += 64 * 64 * 3 * 7 + 64 + 128;
        n += ResidualBlock<T>::param_count_for(64, 128) + ResidualBlock<T>::param_count_for(128, 128);
        n += 256 * 128 * 3 * 7 + 256 + 512;
        n += ResidualBlock<T>::param_count_for(256, 512) + ResidualBlock<T>::param_count_for(512, 512);
        n += flatten * 512 + 512;
        n += 512 * num_classes + num_classes;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Fusion + full model
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> fuse(const TensorT<T>& z_w, const TensorT<T>& z_v, FusionMode mode) {
    if (z_w.rank() != 2 || z_v.rank() != 2 || z_w.dim(0) != z_v.dim(0))
        throw std::invalid_argument("fuse: embeddings must share rows, got " + shape_str(z_w.shape()) + " and " +
                                    shape_str(z_v.shape()));
    if (mode == FusionMode::Concat) return concat_cols(z_w, z_v);
    if (z_w.dim(1) != z_v.dim(1))
        throw std::invalid_argument("fuse: addition needs equal dims, got " + shape_str(z_w.shape()) + " and " +
                                    shape_str(z_v.shape()));
    return add(z_w, z_v);
}

template <class T>
struct GaitFiModel {
    ModalityMode modality = ModalityMode::Both;
    FusionMode fusion = FusionMode::Concat;
    LstmFeature lstm_feature = LstmFeature::LastHidden;
    int64_t num_classes = 0;
    int64_t frames = 32;      // vision sequence length L
    int64_t frame_size = 64;  // silhouette side S
    int64_t csi_h = 114, csi_w = 500;

    std::optional<Lrcn<T>> wifi_enc;
    std::optional<Lrcn<T>> vision_enc;
    std::optional<LstmParams<T>> lstm;
    TensorT<T> head_w, head_b;

    static GaitFiModel make(std::mt19937_64& rng, ModalityMode modality, FusionMode fusion, int64_t num_classes,
                            int64_t frames = 32, int64_t frame_size = 64, int64_t csi_h = 114, int64_t csi_w = 500,
                            LstmFeature lstm_feature = LstmFeature::LastHidden) {
        if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
        if (frames < 1) throw std::invalid_argument("model: need at least 1 frame");
        GaitFiModel m;
        m.modality = modality;
        m.fusion = fusion;
        m.lstm_feature = lstm_feature;
        m.num_classes = num_classes;
        m.frames = frames;
        m.frame_size = frame_size;
        m.csi_h = csi_h;
        m.csi_w = csi_w;
        if (modality != ModalityMode::Vision) m.wifi_enc = Lrcn<T>::make(rng, 3, csi_h, csi_w);
        if (modality != ModalityMode::Wifi) {
            m.vision_enc = Lrcn<T>::make(rng, 1, frame_size, frame_size);
            m.lstm = LstmParams<T>::make(rng, Lrcn<T>::kFeatureDim, Lrcn<T>::kFeatureDim);
        }
        const int64_t ed = m.embed_dim();
        const T bound = T(1) / std::sqrt(static_cast<T>(ed));
        m.head_w = TensorT<T>::uniform(rng, {ed, num_classes}, -bound, bound);
        m.head_b = TensorT<T>::zeros({num_classes});
        return m;
    }

    int64_t embed_dim() const {
        if (modality != ModalityMode::Both) return Lrcn<T>::kFeatureDim;
        return fusion == FusionMode::Concat ? 2 * Lrcn<T>::kFeatureDim : Lrcn<T>::kFeatureDim;
    }

    // Vision input layout: [N*L, 1, S, S] with frames of sample n at rows
    // n*L .. n*L+L-1 (chronological).
    TensorT<T> encode_vision(const TensorT<T>& x_v, bool training) {
        if (x_v.rank() != 4 || x_v.dim(0) % frames != 0)
            throw std::invalid_argument("model: vision batch " + shape_str(x_v.shape()) + " is not a multiple of " +
                                        std::to_string(frames) + " frames");
        const int64_t N = x_v.dim(0) / frames;
        TensorT<T> feats = vision_enc->forward(x_v, training);  // [N*L, 64]
        std::vector<TensorT<T>> steps;
        steps.reserve(frames);
        for (int64_t t = 0; t < frames; ++t) {
            std::vector<int64_t> rows(N);
            for (int64_t n = 0; n < N; ++n) rows[n] = n * frames + t;
            steps.push_back(gather_rows(feats, std::move(rows)));
        }
        return lstm_forward(steps, *lstm, lstm_feature);
    }

    // Produces the retrieval embedding for whatever modalities are active.
    // Unused inputs may be undefined tensors.
    TensorT<T> embed(const TensorT<T>& x_w, const TensorT<T>& x_v, bool training) {
        switch (modality) {
            case ModalityMode::Wifi: return wifi_enc->forward(x_w, training);
            case ModalityMode::Vision: return encode_vision(x_v, training);
            default: {
                TensorT<T> z_w = wifi_enc->forward(x_w, training);
                TensorT<T> z_v = encode_vision(x_v, training);
                if (z_w.dim(0) != z_v.dim(0))
                    throw std::invalid_argument("model: wifi batch " + std::to_string(z_w.dim(0)) +
                                                " != vision batch " + std::to_string(z_v.dim(0)));
                return fuse(z_w, z_v, fusion);
            }
        }
    }

    TensorT<T> logits(const TensorT<T>& z) { return linear(z, head_w, head_b); }

    NamedParams<T> parameters() {
        NamedParams<T> out;
        if (wifi_enc) wifi_enc->params("wifi", out);
        if (vision_enc) vision_enc->params("vision", out);
        if (lstm) {
            out.emplace_back("lstm.wx", lstm->wx);
            out.emplace_back("lstm.wh", lstm->wh);
            out.emplace_back("lstm.b", lstm->b);
        }
        out.emplace_back("head.w", head_w);
        out.emplace_back("head.b", head_b);
        return out;
    }

    NamedParams<T> buffers() {
        NamedParams<T> out;
        if (wifi_enc) wifi_enc->buffers("wifi", out);
        if (vision_enc) vision_enc->buffers("vision", out);
        return out;
    }

    void mark_trainable() {
        for (auto& [name, p] : parameters()) p.set_requires_grad(true);
    }
};

}  // namespace gaitfi
