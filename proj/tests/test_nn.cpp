#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gaitfi/gradcheck.hpp"
#include "gaitfi/nn.hpp"
#include "gaitfi/tensor.hpp"

using namespace gaitfi;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("conv_out_dim floor formula") {
    CHECK(conv_out_dim(114, 7, 5, 3) == 23);
    CHECK(conv_out_dim(500, 21, 5, 10) == 100);
    CHECK(conv_out_dim(64, 3, 2, 1) == 32);
    CHECK(conv_out_dim(5, 3, 1, 0) == 3);
    CHECK(conv_out_dim(5, 3, 2, 1) == 3);
}

TEST_CASE("conv2d output shapes") {
    std::mt19937_64 rng(1);
    Tensor x = Tensor::uniform(rng, {1, 3, 114, 500}, -1.f, 1.f);
    Tensor w = Tensor::uniform(rng, {8, 3, 3, 3}, -0.1f, 0.1f);
    Tensor b = Tensor::zeros({8});
    Tensor y = conv2d(x, w, b, {2, 2}, {1, 1});
    CHECK(y.shape() == Shape{1, 8, 57, 250});

    // Random shapes must agree with the closed-form output size.
    std::uniform_int_distribution<int64_t> dim(4, 20), ker(1, 3), str(1, 3), pad(0, 2);
    for (int rep = 0; rep < 10; ++rep) {
        const int64_t H = dim(rng), W = dim(rng), kh = ker(rng), kw = ker(rng);
        const int64_t sh = str(rng), sw = str(rng), ph = pad(rng), pw = pad(rng);
        Tensor xi = Tensor::uniform(rng, {2, 2, H, W}, -1.f, 1.f);
        Tensor wi = Tensor::uniform(rng, {3, 2, kh, kw}, -1.f, 1.f);
        Tensor yi = conv2d(xi, wi, Tensor::zeros({3}), {sh, sw}, {ph, pw});
        CHECK(yi.shape() == Shape{2, 3, conv_out_dim(H, kh, sh, ph), conv_out_dim(W, kw, sw, pw)});
    }
}

TEST_CASE("conv2d values by hand") {
    // 1x1 kernel is a per-pixel affine map.
    Tensor x = Tensor::from({1.f, 2.f, 3.f, 4.f}, {1, 1, 2, 2});
    Tensor w = Tensor::from({3.f}, {1, 1, 1, 1});
    Tensor b = Tensor::from({1.f}, {1});
    CHECK(conv2d(x, w, b, {1, 1}, {0, 0}).vec() == std::vector<float>{4.f, 7.f, 10.f, 13.f});

    // 2x2 valid correlation on a 3x3 ramp.
    Tensor x2 = Tensor::from({1, 2, 3, 4, 5, 6, 7, 8, 9}, {1, 1, 3, 3});
    Tensor w2 = Tensor::from({1.f, 0.f, 0.f, 2.f}, {1, 1, 2, 2});
    // windows: [1,2;4,5] [2,3;5,6] / [4,5;7,8] [5,6;8,9] -> x00 + 2*x11
    CHECK(conv2d(x2, w2, Tensor::zeros({1}), {1, 1}, {0, 0}).vec() ==
          std::vector<float>{11.f, 14.f, 20.f, 23.f});

    // Zero input: every output pixel equals the channel bias.
    Tensor y0 = conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({3, 2, 3, 3}),
                       Tensor::from({1.f, -2.f, 5.f}, {3}), {1, 1}, {1, 1});
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t p = 0; p < 16; ++p)
            CHECK(y0.data()[c * 16 + p] == std::vector<float>{1.f, -2.f, 5.f}[static_cast<size_t>(c)]);
}

TEST_CASE("conv2d argument validation") {
    Tensor x = Tensor::zeros({1, 2, 4, 4});
    CHECK_THROWS(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1}), {1, 1}, {0, 0}));
    CHECK_THROWS(conv2d(x, Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1}), {1, 1}, {0, 0}));  // channel mismatch
    CHECK_THROWS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({2}), {1, 1}, {0, 0}));  // bias mismatch
    CHECK_THROWS(conv2d(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1}), {0, 1}, {0, 0}));  // stride 0
    CHECK_THROWS(conv2d(x, Tensor::zeros({1, 2, 7, 7}), Tensor::zeros({1}), {1, 1}, {0, 0}));  // kernel too big
}

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 rng(7);
    TensorT<double> x = TensorT<double>::uniform(rng, {2, 2, 5, 6}, -1.0, 1.0);
    TensorT<double> w = TensorT<double>::uniform(rng, {3, 2, 3, 3}, -0.5, 0.5);
    TensorT<double> b = TensorT<double>::uniform(rng, {3}, -0.5, 0.5);
    std::vector<std::pair<std::string, TensorT<double>>> params{{"x", x}, {"w", w}, {"b", b}};
    auto fwd = [&] {
        TensorT<double> y = conv2d(params[0].second, params[1].second, params[2].second, {2, 1}, {1, 1});
        return sum(mul(y, y));
    };
    auto rep = gradcheck<double>(fwd, params, 1e-3);
    CHECK(rep.max_err < 1e-6);
    CHECK(rep.checked == x.numel() + w.numel() + b.numel());
}

TEST_CASE("batchnorm train-mode normalization and running stats") {
    auto bn = BatchNorm2d<float>::make(1);
    Tensor x = Tensor::from({1.f, 3.f}, {1, 1, 1, 2});
    Tensor y = batchnorm2d(x, bn, true);
    // mean 2, biased variance 1 -> +/- 1/sqrt(1 + eps)
    CHECK(y.data()[0] == doctest::Approx(-1.f).epsilon(1e-4));
    CHECK(y.data()[1] == doctest::Approx(1.f).epsilon(1e-4));
    // running stats blend with momentum 0.1; the variance folded in is the
    // unbiased one (biased * m/(m-1) = 2).
    CHECK(bn.running_mean.item() == doctest::Approx(0.2f).epsilon(1e-6));
    CHECK(bn.running_var.item() == doctest::Approx(0.9f * 1.f + 0.1f * 2.f).epsilon(1e-6));
}

TEST_CASE("batchnorm constant input maps to beta") {
    auto bn = BatchNorm2d<float>::make(2);
    bn.beta = Tensor::from({0.5f, -1.f}, {2});
    Tensor x = Tensor::full({2, 2, 3, 3}, 7.f);
    Tensor y = batchnorm2d(x, bn, true);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t p = 0; p < 9; ++p)
                CHECK(y.data()[(n * 2 + c) * 9 + p] == bn.beta.data()[c]);
}

TEST_CASE("batchnorm eval mode uses frozen stats and never mutates them") {
    auto bn = BatchNorm2d<float>::make(1);
    bn.running_mean = Tensor::from({2.f}, {1});
    bn.running_var = Tensor::from({4.f}, {1});
    Tensor x = Tensor::from({6.f}, {1, 1, 1, 1});
    Tensor y = batchnorm2d(x, bn, false);
    CHECK(y.item() == doctest::Approx((6.f - 2.f) / std::sqrt(4.f + 1e-5f)).epsilon(1e-6));

    auto rm = bn.running_mean.vec(), rv = bn.running_var.vec();
    (void)batchnorm2d(Tensor::from({-3.f}, {1, 1, 1, 1}), bn, false);
    CHECK(bn.running_mean.vec() == rm);
    CHECK(bn.running_var.vec() == rv);

    // Fresh layer in eval mode is near-identity (eps only).
    auto id = BatchNorm2d<float>::make(1);
    Tensor z = batchnorm2d(Tensor::from({1.5f}, {1, 1, 1, 1}), id, false);
    CHECK(z.item() == doctest::Approx(1.5f).epsilon(1e-4));
}

TEST_CASE("batchnorm validation") {
    auto bn = BatchNorm2d<float>::make(2);
    CHECK_THROWS(batchnorm2d(Tensor::zeros({1, 2, 1, 1}), bn, true));   // N*H*W == 1
    CHECK_THROWS(batchnorm2d(Tensor::zeros({1, 3, 2, 2}), bn, true));   // channel mismatch
    CHECK_THROWS(batchnorm2d(Tensor::zeros({2, 2, 2}), bn, true));      // rank
    CHECK_NOTHROW(batchnorm2d(Tensor::zeros({1, 2, 1, 1}), bn, false));  // eval mode allows m == 1
}

TEST_CASE("batchnorm gradients match finite differences") {
    std::mt19937_64 rng(17);
    std::vector<std::pair<std::string, TensorT<double>>> params{
        {"x", TensorT<double>::uniform(rng, {2, 2, 3, 3}, -1.0, 1.0)},
        {"gamma", TensorT<double>::uniform(rng, {2}, 0.5, 1.5)},
        {"beta", TensorT<double>::uniform(rng, {2}, -0.5, 0.5)},
    };
    for (bool training : {true, false}) {
        auto fwd = [&] {
            auto bn = BatchNorm2d<double>::make(2);
            bn.gamma = params[1].second;
            bn.beta = params[2].second;
            bn.running_mean = TensorT<double>::from({0.3, -0.2}, {2});
            bn.running_var = TensorT<double>::from({1.5, 0.8}, {2});
            TensorT<double> y = batchnorm2d(params[0].second, bn, training);
            return sum(mul(y, y));
        };
        auto rep = gradcheck<double>(fwd, params, 1e-4);
        CHECK(rep.max_err < 1e-6);
    }
}

TEST_CASE("maxpool values, tie handling, and gradients") {
    Tensor x = Tensor::from({1.f, 5.f, 2.f, 4.f}, {1, 1, 2, 2});
    CHECK(maxpool2d(x, {1, 2}, {1, 2}).vec() == std::vector<float>{5.f, 4.f});
    CHECK(maxpool2d(x, {2, 2}, {2, 2}).vec() == std::vector<float>{5.f});
    CHECK(maxpool2d(x, {1, 2}, {1, 2}).shape() == Shape{1, 1, 2, 1});

    // Ties route the full gradient to the first position scanned.
    Tensor t = Tensor::from({3.f, 3.f}, {1, 1, 1, 2}).set_requires_grad(true);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    tape.backward(sum(maxpool2d(t, {1, 2}, {1, 2})));
    CHECK(t.grad().vec() == std::vector<float>{1.f, 0.f});

    CHECK_THROWS(maxpool2d(x, {3, 1}, {1, 1}));  // kernel taller than input
    CHECK_THROWS(maxpool2d(x, {1, 1}, {0, 1}));
    CHECK_THROWS(maxpool2d(Tensor::zeros({2, 2}), {1, 1}, {1, 1}));
}

TEST_CASE("maxpool gradients match finite differences") {
    std::mt19937_64 rng(23);
    std::vector<std::pair<std::string, TensorT<double>>> params{
        {"x", TensorT<double>::uniform(rng, {2, 3, 5, 6}, -1.0, 1.0)}};
    auto fwd = [&] {
        TensorT<double> y = maxpool2d(params[0].second, {2, 2}, {2, 2});
        return sum(mul(y, y));
    };
    // h must stay below the smallest gap between competing pool inputs;
    // uniform doubles make exact ties vanishingly unlikely at 1e-6.
    auto rep = gradcheck<double>(fwd, params, 1e-6);
    CHECK(rep.max_err < 1e-5);
}

TEST_CASE("linear layer values and gradients") {
    Tensor x = Tensor::from({1.f, 2.f}, {1, 2});
    Tensor w = Tensor::from({1.f, 0.f, 2.f, 0.f, 1.f, 3.f}, {2, 3});
    Tensor b = Tensor::from({10.f, 20.f, 30.f}, {3});
    CHECK(linear(x, w, b).vec() == std::vector<float>{11.f, 22.f, 38.f});
    CHECK_THROWS(linear(x, Tensor::zeros({3, 3}), Tensor::zeros({3})));
    CHECK_THROWS(linear(x, w, Tensor::zeros({2})));

    std::mt19937_64 rng(29);
    std::vector<std::pair<std::string, TensorT<double>>> params{
        {"x", TensorT<double>::uniform(rng, {3, 4}, -1.0, 1.0)},
        {"w", TensorT<double>::uniform(rng, {4, 2}, -1.0, 1.0)},
        {"b", TensorT<double>::uniform(rng, {2}, -1.0, 1.0)},
    };
    auto fwd = [&] {
        return sum(mul(linear(params[0].second, params[1].second, params[2].second),
                       linear(params[0].second, params[1].second, params[2].second)));
    };
    auto rep = gradcheck<double>(fwd, params, 1e-3);
    CHECK(rep.max_err < 1e-7);
}

TEST_CASE("lstm single step against the gate equations") {
    // F=1, H=1, one step: i=sig(.5), f=sig(0), g=tanh(1), o=sig(0),
    // c=i*g, h=o*tanh(c). Weights chosen so each gate sees a distinct input.
    LstmParams<float> p;
    p.hidden = 1;
    p.wx = Tensor::from({1.f, 0.f, 2.f, 0.f}, {1, 4});
    p.wh = Tensor::zeros({1, 4});
    p.b = Tensor::zeros({4});
    std::vector<Tensor> seq{Tensor::from({0.5f}, {1, 1})};
    const double i = sigmoid_ref(0.5), f = sigmoid_ref(0.0), g = std::tanh(1.0), o = sigmoid_ref(0.0);
    (void)f;
    const double want = o * std::tanh(i * g);
    CHECK(lstm_forward(seq, p).item() == doctest::Approx(static_cast<float>(want)).epsilon(1e-6));
}

TEST_CASE("lstm zero parameters give zero features") {
    LstmParams<float> p;
    p.hidden = 3;
    p.wx = Tensor::zeros({2, 12});
    p.wh = Tensor::zeros({3, 12});
    p.b = Tensor::zeros({12});
    std::vector<Tensor> seq(4, Tensor::ones({2, 2}));
    CHECK(lstm_forward(seq, p).vec() == std::vector<float>(6, 0.f));
    CHECK(lstm_forward(seq, p, LstmFeature::TemporalMean).vec() == std::vector<float>(6, 0.f));
}

TEST_CASE("lstm temporal mean averages the per-step hidden states") {
    std::mt19937_64 rng(31);
    LstmParams<float> p = LstmParams<float>::make(rng, 2, 3);
    // make() opens the forget gate: bias slice [H, 2H) is one.
    CHECK(p.b.data()[3] == 1.f);
    CHECK(p.b.data()[5] == 1.f);
    CHECK(p.b.data()[0] == 0.f);

    Tensor s1 = Tensor::uniform(rng, {2, 2}, -1.f, 1.f);
    Tensor s2 = Tensor::uniform(rng, {2, 2}, -1.f, 1.f);
    Tensor h1 = lstm_forward({s1}, p);                      // hidden after step 1
    Tensor h2 = lstm_forward({s1, s2}, p);                  // hidden after step 2
    Tensor hm = lstm_forward({s1, s2}, p, LstmFeature::TemporalMean);
    for (int64_t j = 0; j < 6; ++j)
        CHECK(hm.data()[j] == doctest::Approx((h1.data()[j] + h2.data()[j]) / 2.f).epsilon(1e-5));
}

TEST_CASE("lstm input validation") {
    LstmParams<float> p;
    p.hidden = 2;
    p.wx = Tensor::zeros({3, 8});
    p.wh = Tensor::zeros({2, 8});
    p.b = Tensor::zeros({8});
    CHECK_THROWS(lstm_forward(std::vector<Tensor>{}, p));
    CHECK_THROWS(lstm_forward({Tensor::zeros({1, 4})}, p));                        // F mismatch
    CHECK_THROWS(lstm_forward({Tensor::zeros({1, 3}), Tensor::zeros({2, 3})}, p));  // N changes mid-sequence
}

TEST_CASE("lstm gradients match finite differences") {
    std::mt19937_64 rng(37);
    LstmParams<double> base = LstmParams<double>::make(rng, 2, 4);
    std::vector<std::pair<std::string, TensorT<double>>> params{
        {"wx", base.wx},
        {"wh", base.wh},
        {"b", base.b},
        {"s0", TensorT<double>::uniform(rng, {3, 2}, -1.0, 1.0)},
        {"s1", TensorT<double>::uniform(rng, {3, 2}, -1.0, 1.0)},
        {"s2", TensorT<double>::uniform(rng, {3, 2}, -1.0, 1.0)},
    };
    for (auto feature : {LstmFeature::LastHidden, LstmFeature::TemporalMean}) {
        auto fwd = [&] {
            LstmParams<double> p;
            p.hidden = 4;
            p.wx = params[0].second;
            p.wh = params[1].second;
            p.b = params[2].second;
            TensorT<double> h =
                lstm_forward({params[3].second, params[4].second, params[5].second}, p, feature);
            return sum(mul(h, h));
        };
        auto rep = gradcheck<double>(fwd, params, 1e-3);
        CHECK(rep.max_err < 1e-6);
    }
}

TEST_CASE("softmax values and stability") {
    CHECK(softmax(Tensor::from({0.f, 0.f}, {1, 2})).vec() == std::vector<float>{0.5f, 0.5f});

    Tensor big = softmax(Tensor::from({1000.f, 0.f}, {1, 2}));
    CHECK(big.all_finite());
    CHECK(big.data()[0] == doctest::Approx(1.f));
    CHECK(big.data()[1] == doctest::Approx(0.f));

    std::mt19937_64 rng(41);
    Tensor z = Tensor::uniform(rng, {5, 7}, -10.f, 10.f);
    Tensor s = softmax(z);
    for (int64_t n = 0; n < 5; ++n) {
        double row = 0.0;
        for (int64_t k = 0; k < 7; ++k) {
            row += s.data()[n * 7 + k];
            CHECK(s.data()[n * 7 + k] >= 0.f);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }

    // Shift invariance: softmax(z + c) == softmax(z).
    Tensor zs = add(z, Tensor::full(z.shape(), 3.25f));
    Tensor ss = softmax(zs);
    for (int64_t i = 0; i < s.numel(); ++i) CHECK(ss.data()[i] == doctest::Approx(s.data()[i]).epsilon(1e-5));

    CHECK_THROWS(softmax(Tensor::zeros({3})));
}

TEST_CASE("cross entropy of softmax has gradient (s - y) / N") {
    std::mt19937_64 rng(43);
    TensorT<double> z = TensorT<double>::uniform(rng, {4, 5}, -2.0, 2.0);
    z.set_requires_grad(true);
    TensorT<double> y = one_hot<double>({0, 3, 2, 4}, 5);

    Tape<double> tape;
    TapeScope<double> scope(tape);
    TensorT<double> s = softmax(z);
    tape.backward(cross_entropy(s, y));

    auto g = z.grad().vec();
    for (int64_t i = 0; i < z.numel(); ++i)
        CHECK(g[static_cast<size_t>(i)] == doctest::Approx((s.data()[i] - y.data()[i]) / 4.0).epsilon(1e-9));
}

TEST_CASE("one_hot and cross entropy edge cases") {
    Tensor y = one_hot<float>({1, 0}, 3);
    CHECK(y.vec() == std::vector<float>{0.f, 1.f, 0.f, 1.f, 0.f, 0.f});
    CHECK_THROWS(one_hot<float>({3}, 3));
    CHECK_THROWS(one_hot<float>({-1}, 3));

    // Zero probability on the true class is clamped, not -inf.
    Tensor p = Tensor::from({0.f, 1.f}, {1, 2});
    Tensor t = Tensor::from({1.f, 0.f}, {1, 2});
    Tensor loss = cross_entropy(p, t);
    CHECK(loss.all_finite());
    CHECK(loss.item() == doctest::Approx(-std::log(1e-12)).epsilon(1e-6));

    CHECK_THROWS(cross_entropy(Tensor::zeros({2, 3}), Tensor::zeros({2, 2})));
}

TEST_CASE("ensure_finite flags bad values") {
    CHECK_NOTHROW(ensure_finite(Tensor::ones({3}), "ok"));
    Tensor bad = Tensor::ones({3});
    bad.data()[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(ensure_finite(bad, "stage"), "non-finite values in stage", std::runtime_error);
}
