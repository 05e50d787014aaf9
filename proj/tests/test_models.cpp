#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gaitfi/models.hpp"

using namespace gaitfi;

namespace {

template <class T>
int64_t total_numel(NamedParams<T>& named) {
    int64_t n = 0;
    for (auto& [name, t] : named) n += t.numel();
    return n;
}

template <class T>
std::vector<float> snapshot(NamedParams<T> named) {
    std::vector<float> all;
    for (auto& [name, t] : named) {
        auto v = t.vec();
        all.insert(all.end(), v.begin(), v.end());
    }
    return all;
}

}  // namespace

TEST_CASE("mode parsing round-trips and rejects junk") {
    CHECK(parse_fusion("concat") == FusionMode::Concat);
    CHECK(parse_fusion("add") == FusionMode::Add);
    CHECK(to_string(FusionMode::Add) == "add");
    CHECK_THROWS_WITH_AS(parse_fusion("cat"), "unknown fusion mode 'cat' (expected concat|add)",
                         std::invalid_argument);
    CHECK(parse_modality("wifi") == ModalityMode::Wifi);
    CHECK(parse_modality("vision") == ModalityMode::Vision);
    CHECK(parse_modality("both") == ModalityMode::Both);
    CHECK(to_string(ModalityMode::Both) == "both");
    CHECK_THROWS_WITH_AS(parse_modality("fused"), "unknown modality 'fused' (expected wifi|vision|both)",
                         std::invalid_argument);
}

TEST_CASE("conv layer init: He-uniform weights, zero bias") {
    std::mt19937_64 rng(1);
    auto l = ConvLayer<float>::make(rng, 8, 3, 5, 7, {2, 1}, {1, 3});
    CHECK(l.w.shape() == Shape{8, 3, 5, 7});
    CHECK(l.b.vec() == std::vector<float>(8, 0.f));
    CHECK(l.stride == std::array<int64_t, 2>{2, 1});
    CHECK(l.pad == std::array<int64_t, 2>{1, 3});
    CHECK(l.param_count() == 8 * 3 * 5 * 7 + 8);
    const float bound = std::sqrt(6.f / (3 * 5 * 7));
    for (float w : l.w.vec()) {
        CHECK(w <= bound);
        CHECK(w >= -bound);
    }
}

TEST_CASE("conv+bn layer exposes canonical parameter and buffer names") {
    std::mt19937_64 rng(2);
    auto l = ConvBnLayer<float>::make(rng, 4, 2, 3, 3, {1, 1}, {1, 1});
    NamedParams<float> p, b;
    l.params("stage", p);
    l.buffers("stage", b);
    REQUIRE(p.size() == 4);
    CHECK(p[0].first == "stage.conv.w");
    CHECK(p[1].first == "stage.conv.b");
    CHECK(p[2].first == "stage.bn.gamma");
    CHECK(p[3].first == "stage.bn.beta");
    REQUIRE(b.size() == 2);
    CHECK(b[0].first == "stage.bn.running_mean");
    CHECK(b[1].first == "stage.bn.running_var");
    CHECK(p[2].second.vec() == std::vector<float>(4, 1.f));  // gamma starts at one
    CHECK(p[3].second.vec() == std::vector<float>(4, 0.f));
}

TEST_CASE("residual block with zeroed convs is relu(x) in eval mode") {
    std::mt19937_64 rng(3);
    auto block = ResidualBlock<float>::make(rng, 4, 4);
    CHECK(!block.projected);
    for (auto* t : {&block.c1.conv.w, &block.c2.conv.w}) std::fill(t->data(), t->data() + t->numel(), 0.f);

    Tensor x = Tensor::uniform(rng, {2, 4, 5, 5}, -2.f, 2.f);
    Tensor y = block.forward(x, false);
    CHECK(y.vec() == relu(x).vec());
}

TEST_CASE("residual block shapes and projection") {
    std::mt19937_64 rng(4);
    auto same = ResidualBlock<float>::make(rng, 8, 8);
    CHECK(same.forward(Tensor::uniform(rng, {1, 8, 57, 250}, -1.f, 1.f), false).shape() == Shape{1, 8, 57, 250});

    auto grow = ResidualBlock<float>::make(rng, 4, 8);
    CHECK(grow.projected);
    CHECK(grow.forward(Tensor::uniform(rng, {2, 4, 6, 6}, -1.f, 1.f), false).shape() == Shape{2, 8, 6, 6});

    // Declared parameter count matches what the block actually exposes.
    for (auto [ic, oc] : {std::pair<int64_t, int64_t>{8, 8}, {4, 8}, {64, 128}}) {
        auto b = ResidualBlock<float>::make(rng, ic, oc);
        NamedParams<float> named;
        b.params("b", named);
        CHECK(total_numel(named) == ResidualBlock<float>::param_count_for(ic, oc));
    }
}

TEST_CASE("compact encoder flatten dims at working sizes") {
    std::mt19937_64 rng(5);
    auto wifi = Lrcn<float>::make(rng, 3, 114, 500);
    CHECK(wifi.flatten_dim == 32 * 15 * 63);  // 114 -> 57 -> 29 -> 15; 500 -> 250 -> 125 -> 63
    auto vis = Lrcn<float>::make(rng, 1, 64, 64);
    CHECK(vis.flatten_dim == 32 * 8 * 8);

    NamedParams<float> named;
    wifi.params("wifi", named);
    CHECK(total_numel(named) == Lrcn<float>::param_count_for(3, 114, 500));
    named.clear();
    vis.params("vision", named);
    CHECK(total_numel(named) == Lrcn<float>::param_count_for(1, 64, 64));
}

TEST_CASE("compact encoder forward maps to 64-dim features") {
    std::mt19937_64 rng(6);
    auto enc = Lrcn<float>::make(rng, 1, 64, 64);
    Tensor x = Tensor::uniform(rng, {4, 1, 64, 64}, 0.f, 1.f);
    Tensor z = enc.forward(x, false);
    CHECK(z.shape() == Shape{4, 64});
    CHECK(z.all_finite());
    CHECK_THROWS(enc.forward(Tensor::zeros({4, 1, 32, 64}), false));
    CHECK_THROWS(enc.forward(Tensor::zeros({4, 3, 64, 64}), false));

    // Same seed, same parameters, bit for bit.
    std::mt19937_64 r1(9), r2(9);
    auto a = Lrcn<float>::make(r1, 1, 16, 16);
    auto b = Lrcn<float>::make(r2, 1, 16, 16);
    CHECK(a.fc_w.vec() == b.fc_w.vec());
    CHECK(a.conv1.conv.w.vec() == b.conv1.conv.w.vec());
}

TEST_CASE("encoder eval mode leaves batch-norm buffers untouched") {
    std::mt19937_64 rng(7);
    auto enc = Lrcn<float>::make(rng, 1, 16, 16);
    NamedParams<float> buf;
    enc.buffers("e", buf);
    auto before = snapshot(buf);

    (void)enc.forward(Tensor::uniform(rng, {2, 1, 16, 16}, 0.f, 1.f), false);
    buf.clear();
    enc.buffers("e", buf);
    CHECK(snapshot(buf) == before);

    (void)enc.forward(Tensor::uniform(rng, {2, 1, 16, 16}, 0.f, 1.f), true);
    buf.clear();
    enc.buffers("e", buf);
    CHECK(snapshot(buf) != before);  // train mode folds batch stats in
}

TEST_CASE("wifi classifier dimensions") {
    std::mt19937_64 rng(8);
    auto net = WifiLrcn<float>::make(rng, 12);
    CHECK(net.flatten_dim == 512 * 23 * 25);

    // First stage: 7x21 kernel, stride 5, padding (3,10) on 114x500 input.
    CHECK(net.conv1.conv.w.shape() == Shape{64, 3, 7, 21});
    CHECK(conv_out_dim(114, 7, 5, 3) == 23);
    CHECK(conv_out_dim(500, 21, 5, 10) == 100);
    Tensor x = Tensor::uniform(rng, {1, 3, 114, 500}, -1.f, 1.f);
    Tensor stage1 = conv2d(x, net.conv1.conv.w, net.conv1.conv.b, net.conv1.conv.stride, net.conv1.conv.pad);
    CHECK(stage1.shape() == Shape{1, 64, 23, 100});

    auto [feature, logits] = net.forward(x, false);
    CHECK(feature.shape() == Shape{1, 512});
    CHECK(logits.shape() == Shape{1, 12});
    CHECK(feature.all_finite());
    CHECK(logits.all_finite());
    CHECK_THROWS(net.forward(Tensor::zeros({1, 3, 114, 400}), false));

    NamedParams<float> named;
    net.params("w", named);
    CHECK(total_numel(named) == WifiLrcn<float>::param_count_for(12));
    // The wide classifier must out-parameter the compact encoder.
    CHECK(WifiLrcn<float>::param_count_for(12) > Lrcn<float>::param_count_for(3, 114, 500));
}

TEST_CASE("fuse concatenates or adds row-aligned embeddings") {
    Tensor zw = Tensor::from({1.f, 2.f, 3.f, 4.f}, {2, 2});
    Tensor zv = Tensor::from({10.f, 20.f}, {2, 1});
    Tensor cat = fuse(zw, zv, FusionMode::Concat);
    CHECK(cat.shape() == Shape{2, 3});
    CHECK(cat.vec() == std::vector<float>{1.f, 2.f, 10.f, 3.f, 4.f, 20.f});

    Tensor zv2 = Tensor::from({5.f, 6.f, 7.f, 8.f}, {2, 2});
    CHECK(fuse(zw, zv2, FusionMode::Add).vec() == std::vector<float>{6.f, 8.f, 10.f, 12.f});

    CHECK_THROWS(fuse(zw, Tensor::zeros({3, 2}), FusionMode::Concat));
    CHECK_THROWS(fuse(zw, zv, FusionMode::Add));  // unequal dims cannot be added
}

TEST_CASE("model construction rules") {
    std::mt19937_64 rng(10);
    CHECK_THROWS(GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 1));
    CHECK_THROWS(GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, 0));

    auto concat = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, 4, 16, 16, 20);
    CHECK(concat.embed_dim() == 128);
    auto added = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Add, 3, 4, 16, 16, 20);
    CHECK(added.embed_dim() == 64);
    auto wifi = GaitFiModel<float>::make(rng, ModalityMode::Wifi, FusionMode::Concat, 3, 4, 16, 16, 20);
    CHECK(wifi.embed_dim() == 64);
    CHECK(!wifi.vision_enc.has_value());
    CHECK(!wifi.lstm.has_value());
    auto vision = GaitFiModel<float>::make(rng, ModalityMode::Vision, FusionMode::Concat, 3, 4, 16, 16, 20);
    CHECK(vision.embed_dim() == 64);
    CHECK(!vision.wifi_enc.has_value());
    CHECK(vision.lstm.has_value());
}

TEST_CASE("parameter list order: wifi, vision, lstm, head") {
    std::mt19937_64 rng(11);
    auto m = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, 4, 16, 16, 20);
    auto named = m.parameters();
    REQUIRE(named.size() > 5);
    CHECK(named.front().first.rfind("wifi.", 0) == 0);
    size_t first_vision = 0, first_lstm = 0;
    for (size_t i = 0; i < named.size(); ++i) {
        if (!first_vision && named[i].first.rfind("vision.", 0) == 0) first_vision = i;
        if (!first_lstm && named[i].first == "lstm.wx") first_lstm = i;
    }
    CHECK(first_vision > 0);
    CHECK(first_lstm > first_vision);
    CHECK(named[named.size() - 2].first == "head.w");
    CHECK(named.back().first == "head.b");

    const int64_t lstm_n = 64 * 256 + 64 * 256 + 256;
    const int64_t head_n = 128 * 3 + 3;
    CHECK(total_numel(named) == Lrcn<float>::param_count_for(3, 16, 20) +
                                    Lrcn<float>::param_count_for(1, 16, 16) + lstm_n + head_n);

    m.mark_trainable();
    for (auto& [name, p] : m.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("embedding shapes per modality") {
    std::mt19937_64 rng(12);
    const int64_t L = 4, S = 16;
    Tensor x_w = Tensor::uniform(rng, {2, 3, 16, 20}, -1.f, 1.f);
    Tensor x_v = Tensor::uniform(rng, {2 * L, 1, S, S}, 0.f, 1.f);

    auto both = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, L, S, 16, 20);
    Tensor z = both.embed(x_w, x_v, false);
    CHECK(z.shape() == Shape{2, 128});
    CHECK(both.logits(z).shape() == Shape{2, 3});

    auto added = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Add, 3, L, S, 16, 20);
    CHECK(added.embed(x_w, x_v, false).shape() == Shape{2, 64});

    // Single-modality models ignore the other input entirely.
    auto wifi = GaitFiModel<float>::make(rng, ModalityMode::Wifi, FusionMode::Concat, 3, L, S, 16, 20);
    CHECK(wifi.embed(x_w, Tensor{}, false).shape() == Shape{2, 64});
    auto vision = GaitFiModel<float>::make(rng, ModalityMode::Vision, FusionMode::Concat, 3, L, S, 16, 20);
    CHECK(vision.embed(Tensor{}, x_v, false).shape() == Shape{2, 64});

    // Vision batches must be whole samples.
    CHECK_THROWS(vision.embed(Tensor{}, Tensor::zeros({6, 1, S, S}), false));
    // Mismatched batch sizes across modalities are rejected.
    CHECK_THROWS(both.embed(x_w, Tensor::zeros({L, 1, S, S}), false));
}

TEST_CASE("concat fusion places wifi features before vision features") {
    std::mt19937_64 rng(13);
    const int64_t L = 2, S = 16;
    auto m = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, L, S, 16, 16);
    Tensor x_w = Tensor::uniform(rng, {1, 3, 16, 16}, -1.f, 1.f);
    Tensor x_v = Tensor::uniform(rng, {L, 1, S, S}, 0.f, 1.f);

    Tensor z = m.embed(x_w, x_v, false);
    Tensor z_w = m.wifi_enc->forward(x_w, false);
    Tensor z_v = m.encode_vision(x_v, false);
    auto zc = z.vec();
    auto zw = z_w.vec();
    auto zv = z_v.vec();
    CHECK(std::vector<float>(zc.begin(), zc.begin() + 64) == zw);
    CHECK(std::vector<float>(zc.begin() + 64, zc.end()) == zv);
}

TEST_CASE("vision encoding is sensitive to frame order") {
    std::mt19937_64 rng(14);
    const int64_t L = 4, S = 16;
    auto m = GaitFiModel<float>::make(rng, ModalityMode::Vision, FusionMode::Concat, 3, L, S, 16, 16);

    Tensor x = Tensor::uniform(rng, {L, 1, S, S}, 0.f, 1.f);
    // Reverse the frames of the single sample.
    Tensor rev = Tensor::zeros({L, 1, S, S});
    const int64_t px = S * S;
    for (int64_t l = 0; l < L; ++l)
        std::copy(x.data() + l * px, x.data() + (l + 1) * px, rev.data() + (L - 1 - l) * px);

    auto za = m.embed(Tensor{}, x, false).vec();
    auto zb = m.embed(Tensor{}, rev, false).vec();
    CHECK(za != zb);
}

TEST_CASE("eval-mode embeddings are independent of batch composition") {
    std::mt19937_64 rng(15);
    const int64_t L = 3, S = 16;
    auto m = GaitFiModel<float>::make(rng, ModalityMode::Both, FusionMode::Concat, 3, L, S, 16, 20);

    Tensor x_w = Tensor::uniform(rng, {2, 3, 16, 20}, -1.f, 1.f);
    Tensor x_v = Tensor::uniform(rng, {2 * L, 1, S, S}, 0.f, 1.f);
    Tensor z_pair = m.embed(x_w, x_v, false);

    Tensor x_w0 = Tensor::zeros({1, 3, 16, 20});
    std::copy(x_w.data(), x_w.data() + x_w0.numel(), x_w0.data());
    Tensor x_v0 = Tensor::zeros({L, 1, S, S});
    std::copy(x_v.data(), x_v.data() + x_v0.numel(), x_v0.data());
    Tensor z_solo = m.embed(x_w0, x_v0, false);

    auto pair0 = std::vector<float>(z_pair.vec().begin(), z_pair.vec().begin() + 128);
    CHECK(pair0 == z_solo.vec());
}
