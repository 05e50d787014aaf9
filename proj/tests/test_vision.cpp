#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "gaitfi/vision.hpp"

using namespace gaitfi;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / "gaitfi_vision_tests";
    fs::create_directories(d);
    return d;
}

BinaryImage solid_box(int64_t h, int64_t w, int64_t r0, int64_t c0, int64_t bh, int64_t bw) {
    BinaryImage m = BinaryImage::zeros(h, w);
    for (int64_t r = r0; r < r0 + bh; ++r)
        for (int64_t c = c0; c < c0 + bw; ++c) m.at(r, c) = 1;
    return m;
}

}  // namespace

TEST_CASE("gmm model construction") {
    GmmModel m = GmmModel::make(4, 5);
    CHECK(m.components == 3);
    CHECK(m.weight.size() == 4 * 5 * 3);
    CHECK(!m.seeded);
    CHECK_THROWS(GmmModel::make(0, 5));
    CHECK_THROWS(GmmModel::make(4, 5, 0));
    CHECK_THROWS_WITH_AS(GmmModel::make(4, 5, 9), "gmm: at most 8 components supported", std::invalid_argument);
}

TEST_CASE("gmm first frame seeds the model and classifies all-background") {
    GmmModel m = GmmModel::make(2, 2);
    GrayImage f = GrayImage::filled(2, 2, 77);
    BinaryImage mask = gmm_update_and_classify(m, f);
    CHECK(mask.foreground_count() == 0);
    CHECK(m.seeded);
    for (int64_t p = 0; p < 4; ++p) {
        CHECK(m.weight[p * 3] == 1.0f);
        CHECK(m.mean[p * 3] == 77.0f);
        CHECK(m.var[p * 3] == m.var_init);
    }
    CHECK_THROWS(gmm_update_and_classify(m, GrayImage::filled(3, 2, 0)));
}

TEST_CASE("gmm flags a bright intruder over a settled background") {
    const int64_t H = 32, W = 40;
    GmmModel m = GmmModel::make(H, W);
    GrayImage bg = GrayImage::filled(H, W, 100);
    for (int i = 0; i < 100; ++i) {
        BinaryImage mask = gmm_update_and_classify(m, bg);
        CHECK(mask.foreground_count() == 0);  // static scene never alarms
    }

    GrayImage intruder = bg;
    for (int64_t r = 5; r < 15; ++r)
        for (int64_t c = 10; c < 20; ++c) intruder.at(r, c) = 200;
    BinaryImage mask = gmm_update_and_classify(m, intruder);
    // |200 - 100| is far outside 2.5 sigma of any settled component, so the
    // mask is exactly the intruder box.
    CHECK(mask.foreground_count() == 100);
    for (int64_t r = 0; r < H; ++r)
        for (int64_t c = 0; c < W; ++c)
            CHECK(mask.at(r, c) == ((r >= 5 && r < 15 && c >= 10 && c < 20) ? 1 : 0));

    // Background reappears: the original component still matches.
    CHECK(gmm_update_and_classify(m, bg).foreground_count() == 0);
}

TEST_CASE("gmm keeps weights normalized and variances floored") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> noise(-20, 20);
    GmmModel m = GmmModel::make(6, 7);
    for (int i = 0; i < 200; ++i) {
        GrayImage f = GrayImage::filled(6, 7, 0);
        for (auto& p : f.pix) p = static_cast<uint8_t>(128 + noise(rng));
        (void)gmm_update_and_classify(m, f);
    }
    for (int64_t p = 0; p < 42; ++p) {
        float total = 0.f;
        for (int64_t k = 0; k < 3; ++k) {
            total += m.weight[p * 3 + k];
            CHECK(m.var[p * 3 + k] >= m.var_floor - 1e-6f);
        }
        CHECK(total == doctest::Approx(1.f).epsilon(1e-5));
    }
}

TEST_CASE("morphological opening removes speckles and keeps solid regions") {
    BinaryImage speck = BinaryImage::zeros(5, 5);
    speck.at(2, 2) = 1;
    CHECK(morph_open3x3(speck).foreground_count() == 0);

    BinaryImage solid = solid_box(8, 8, 1, 1, 5, 5);
    BinaryImage opened = morph_open3x3(solid);
    CHECK(opened.pix == solid.pix);  // 5x5 block survives opening intact

    // Opening twice changes nothing.
    BinaryImage mixed = solid_box(10, 12, 2, 2, 4, 5);
    mixed.at(0, 11) = 1;
    mixed.at(9, 0) = 1;
    BinaryImage once = morph_open3x3(mixed);
    CHECK(morph_open3x3(once).pix == once.pix);
    CHECK(once.at(0, 11) == 0);
    CHECK(once.at(9, 0) == 0);
}

TEST_CASE("silhouette extraction geometry for a 2:1 box") {
    // 20 tall x 10 wide box scales to the full 64-pixel height and half that
    // width. Interior rows sample fully covered source rows, so their width
    // is exactly 32; the top and bottom rows carry a partial vertical weight
    // (0.65625) that pushes the half-covered edge columns below the 0.5
    // binarization threshold, costing one column.
    BinaryImage mask = solid_box(40, 60, 3, 4, 20, 10);
    auto sil = extract_silhouette(mask, 64);
    REQUIRE(sil.has_value());
    CHECK(sil->h == 64);
    CHECK(sil->w == 64);
    for (int64_t r = 0; r < 64; ++r) {
        int64_t first = -1, last = -1;
        for (int64_t c = 0; c < 64; ++c)
            if (sil->at(r, c)) {
                if (first < 0) first = c;
                last = c;
            }
        CHECK(last - first + 1 == ((r == 0 || r == 63) ? 31 : 32));
    }
    CHECK(sil->foreground_count() == 62 * 32 + 2 * 31);
}

TEST_CASE("silhouette extraction is exactly translation invariant") {
    BinaryImage a = solid_box(40, 60, 3, 4, 20, 10);
    BinaryImage b = solid_box(40, 60, 9, 37, 20, 10);
    auto sa = extract_silhouette(a, 64);
    auto sb = extract_silhouette(b, 64);
    REQUIRE(sa.has_value());
    REQUIRE(sb.has_value());
    CHECK(sa->pix == sb->pix);

    // Also at a non-default size.
    auto ta = extract_silhouette(a, 31);
    auto tb = extract_silhouette(b, 31);
    REQUIRE(ta.has_value());
    CHECK(ta->pix == tb->pix);
}

TEST_CASE("silhouette extraction rejects empty or sparse masks") {
    CHECK(!extract_silhouette(BinaryImage::zeros(64, 64), 64).has_value());

    // Threshold is ceil(0.005 * 64 * 64) = 21 foreground pixels.
    BinaryImage sparse = solid_box(64, 64, 10, 10, 1, 20);
    CHECK(!extract_silhouette(sparse, 64).has_value());
    BinaryImage enough = solid_box(64, 64, 10, 10, 1, 21);
    CHECK(extract_silhouette(enough, 64).has_value());

    // With the threshold disabled a single pixel still yields a silhouette,
    // but a truly empty mask never does.
    BinaryImage one = BinaryImage::zeros(16, 16);
    one.at(8, 8) = 1;
    CHECK(extract_silhouette(one, 8, 0.0).has_value());
    CHECK(!extract_silhouette(BinaryImage::zeros(16, 16), 8, 0.0).has_value());

    CHECK_THROWS(extract_silhouette(one, 0));
}

TEST_CASE("wider-than-tall masks are cropped to the square") {
    BinaryImage mask = solid_box(30, 80, 10, 5, 10, 40);
    auto sil = extract_silhouette(mask, 64);
    REQUIRE(sil.has_value());
    CHECK(sil->h == 64);
    CHECK(sil->w == 64);
    CHECK(sil->at(32, 32) == 1);   // center stays foreground
    CHECK(sil->foreground_count() == 64 * 64);  // box overflows horizontally
}

TEST_CASE("assemble_sequence pads with the last frame and truncates extras") {
    auto tagged = [](int64_t tag) {
        BinaryImage im = BinaryImage::zeros(4, 4);
        im.at(tag / 4, tag % 4) = 1;
        return im;
    };
    std::vector<BinaryImage> many;
    for (int64_t i = 0; i < 12; ++i) many.push_back(tagged(i));

    SilhouetteSequence truncated = assemble_sequence(many, 8);
    CHECK(truncated.length == 8);
    CHECK(truncated.size == 4);
    CHECK(truncated.source_count == 12);
    for (int64_t l = 0; l < 8; ++l) CHECK(truncated.at(l, l / 4, l % 4) == 1);

    SilhouetteSequence padded = assemble_sequence({tagged(0), tagged(5)}, 5);
    CHECK(padded.source_count == 2);
    CHECK(padded.at(0, 0, 0) == 1);
    for (int64_t l = 1; l < 5; ++l) CHECK(padded.at(l, 1, 1) == 1);  // tag 5 repeated

    SilhouetteSequence lone = assemble_sequence({tagged(3)}, 4);
    for (int64_t l = 0; l < 4; ++l) CHECK(lone.at(l, 0, 3) == 1);

    CHECK_THROWS_WITH_AS(assemble_sequence({}, 4), "assemble_sequence: no person in sample", std::runtime_error);
    CHECK_THROWS(assemble_sequence({tagged(0)}, 0));
    CHECK_THROWS(assemble_sequence({tagged(0), BinaryImage::zeros(5, 5)}, 4));
}

TEST_CASE("silhouettes_from_frames runs the full chain on a moving target") {
    const int64_t H = 48, W = 64;
    std::vector<GrayImage> video;
    // Settle the background, then walk a bright block across the scene.
    for (int i = 0; i < 30; ++i) video.push_back(GrayImage::filled(H, W, 90));
    for (int i = 0; i < 20; ++i) {
        GrayImage f = GrayImage::filled(H, W, 90);
        const int64_t c0 = 4 + 2 * i;
        for (int64_t r = 10; r < 34; ++r)
            for (int64_t c = c0; c < c0 + 8; ++c) f.at(r, c) = 220;
        video.push_back(f);
    }
    SilhouetteSequence seq = silhouettes_from_frames(video, 16, 32);
    CHECK(seq.length == 16);
    CHECK(seq.size == 32);
    CHECK(seq.source_count >= 15);  // nearly every intruder frame yields a silhouette
    for (int64_t l = 0; l < seq.length; ++l) {
        int64_t fg = 0;
        for (int64_t r = 0; r < 32; ++r)
            for (int64_t c = 0; c < 32; ++c) fg += seq.at(l, r, c);
        CHECK(fg > 0);
    }

    CHECK_THROWS_WITH_AS(silhouettes_from_frames({}, 16, 32), "silhouettes_from_frames: empty frame list",
                         std::invalid_argument);
    // A fully static video has no person to segment.
    std::vector<GrayImage> still(40, GrayImage::filled(16, 16, 100));
    CHECK_THROWS_AS(silhouettes_from_frames(still, 8, 16), std::runtime_error);
}

TEST_CASE("corrupt_silhouettes drops foreground deterministically") {
    auto make_seq = [] {
        std::vector<BinaryImage> sils(3, solid_box(16, 16, 2, 2, 12, 12));
        return assemble_sequence(sils, 20);
    };

    SilhouetteSequence zero = make_seq();
    corrupt_silhouettes(zero, 0.0, 42);
    CHECK(zero.frames == make_seq().frames);

    SilhouetteSequence all = make_seq();
    corrupt_silhouettes(all, 1.0, 42);
    CHECK(std::count(all.frames.begin(), all.frames.end(), 1) == 0);

    SilhouetteSequence a = make_seq(), b = make_seq(), c = make_seq();
    corrupt_silhouettes(a, 0.5, 7);
    corrupt_silhouettes(b, 0.5, 7);
    corrupt_silhouettes(c, 0.5, 8);
    CHECK(a.frames == b.frames);
    CHECK(a.frames != c.frames);

    // Dropped fraction concentrates around 0.5 over 2880 foreground pixels.
    const double total = static_cast<double>(make_seq().frames.size());
    (void)total;
    const int64_t before = 20 * 12 * 12;
    const int64_t after = std::count(a.frames.begin(), a.frames.end(), 1);
    CHECK(after > before * 0.42);
    CHECK(after < before * 0.58);

    CHECK_THROWS_WITH_AS(corrupt_silhouettes(a, 1.5, 1), "corrupt_silhouettes: drop probability outside [0,1]",
                         std::invalid_argument);
    CHECK_THROWS(corrupt_silhouettes(a, -0.1, 1));
}

TEST_CASE("GFS1 files round-trip bitwise") {
    std::mt19937_64 rng(17);
    std::bernoulli_distribution bit(0.4);
    for (int64_t S : {7, 8, 64}) {  // odd size exercises per-frame bit padding
        SilhouetteSequence seq;
        seq.length = 5;
        seq.size = S;
        seq.source_count = 5;
        seq.frames.resize(static_cast<size_t>(5 * S * S));
        for (auto& p : seq.frames) p = bit(rng) ? 1 : 0;

        const fs::path path = temp_dir() / ("roundtrip_" + std::to_string(S) + ".gfs");
        save_silhouettes(seq, path.string());
        SilhouetteSequence got = load_silhouettes(path.string());
        CHECK(got.length == 5);
        CHECK(got.size == S);
        CHECK(got.frames == seq.frames);
    }
}

TEST_CASE("GFS1 loader rejects malformed files") {
    const fs::path dir = temp_dir();

    const fs::path bad = dir / "bad_magic.gfs";
    std::ofstream(bad, std::ios::binary) << "WHAT00000000";
    CHECK_THROWS_WITH_AS(load_silhouettes(bad.string()), ("bad magic (expected GFS1): " + bad.string()).c_str(),
                         std::runtime_error);

    const fs::path overflow = dir / "overflow.gfs";
    {
        std::ofstream f(overflow, std::ios::binary);
        f.write("GFS1", 4);
        const uint32_t hdr[2] = {1, 65536};
        f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    }
    CHECK_THROWS_WITH_AS(load_silhouettes(overflow.string()),
                         ("GFS1 extent overflow: " + overflow.string()).c_str(), std::runtime_error);

    const fs::path zero = dir / "zero.gfs";
    {
        std::ofstream f(zero, std::ios::binary);
        f.write("GFS1", 4);
        const uint32_t hdr[2] = {0, 64};
        f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    }
    CHECK_THROWS(load_silhouettes(zero.string()));

    const fs::path truncated = dir / "truncated.gfs";
    {
        SilhouetteSequence seq;
        seq.length = 4;
        seq.size = 16;
        seq.frames.assign(4 * 16 * 16, 1);
        save_silhouettes(seq, truncated.string());
        fs::resize_file(truncated, fs::file_size(truncated) - 10);
    }
    CHECK_THROWS(load_silhouettes(truncated.string()));

    const fs::path trailing = dir / "trailing.gfs";
    {
        SilhouetteSequence seq;
        seq.length = 1;
        seq.size = 8;
        seq.frames.assign(64, 0);
        save_silhouettes(seq, trailing.string());
        std::ofstream(trailing, std::ios::binary | std::ios::app) << "zz";
    }
    CHECK_THROWS(load_silhouettes(trailing.string()));
}

TEST_CASE("PGM round trip and parser") {
    const fs::path dir = temp_dir();
    GrayImage im = GrayImage::filled(3, 5, 0);
    for (size_t i = 0; i < im.pix.size(); ++i) im.pix[i] = static_cast<uint8_t>(i * 17);
    const fs::path path = dir / "img.pgm";
    save_pgm(im, path.string());
    GrayImage back = load_pgm(path.string());
    CHECK(back.h == 3);
    CHECK(back.w == 5);
    CHECK(back.pix == im.pix);

    // Comments between header tokens are legal.
    const fs::path commented = dir / "commented.pgm";
    {
        std::ofstream f(commented, std::ios::binary);
        f << "P5\n# produced by hand\n2 # width\n2\n255\n";
        const uint8_t px[4] = {1, 2, 3, 4};
        f.write(reinterpret_cast<const char*>(px), 4);
    }
    GrayImage c = load_pgm(commented.string());
    CHECK(c.w == 2);
    CHECK(c.h == 2);
    CHECK(c.pix == std::vector<uint8_t>{1, 2, 3, 4});

    const fs::path ascii = dir / "ascii.pgm";
    std::ofstream(ascii, std::ios::binary) << "P2\n2 2\n255\n0 0 0 0\n";
    CHECK_THROWS(load_pgm(ascii.string()));

    const fs::path headerless = dir / "headerless.pgm";
    std::ofstream(headerless, std::ios::binary) << "P5\n2";
    CHECK_THROWS_WITH_AS(load_pgm(headerless.string()), ("truncated PGM header: " + headerless.string()).c_str(),
                         std::runtime_error);

    const fs::path wide = dir / "wide.pgm";
    std::ofstream(wide, std::ios::binary) << "P5\n2 2\n65535\n";
    CHECK_THROWS(load_pgm(wide.string()));

    const fs::path short_px = dir / "short.pgm";
    std::ofstream(short_px, std::ios::binary) << "P5\n4 4\n255\nxx";
    CHECK_THROWS(load_pgm(short_px.string()));
}

TEST_CASE("list_pgm_frames returns sorted pgm paths only") {
    const fs::path dir = temp_dir() / "frames";
    fs::create_directories(dir / "nested");
    for (const char* name : {"b.pgm", "a.pgm", "c.txt", "0010.pgm"})
        std::ofstream(dir / name) << "x";
    std::ofstream(dir / "nested" / "d.pgm") << "x";

    auto got = list_pgm_frames(dir.string());
    REQUIRE(got.size() == 3);
    CHECK(fs::path(got[0]).filename() == "0010.pgm");
    CHECK(fs::path(got[1]).filename() == "a.pgm");
    CHECK(fs::path(got[2]).filename() == "b.pgm");
    CHECK_THROWS(list_pgm_frames((dir / "missing").string()));
}
