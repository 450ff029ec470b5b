#include <gtest/gtest.h>

#include <opencv2/videoio.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "vidkd/dataset/batches.hpp"
#include "vidkd/dataset/scan.hpp"

using namespace vidkd;

TEST(UniformSampling, MatchesFloatingPointFormula) {
    for (int n = 1; n <= 40; ++n) {
        for (int k = 1; k <= 45; ++k) {
            const auto idx = sample_uniform(n, k);
            const int kk = std::min(n, k);
            ASSERT_EQ(static_cast<int>(idx.size()), kk);
            for (int i = 0; i < kk; ++i) {
                const int expected = static_cast<int>(std::floor((i + 0.5) * n / kk));
                EXPECT_EQ(idx[static_cast<std::size_t>(i)], expected) << "n=" << n << " k=" << k << " i=" << i;
            }
        }
    }
}

TEST(UniformSampling, Examples) {
    EXPECT_EQ(sample_uniform(25, 1), (std::vector<int>{12}));
    EXPECT_EQ(sample_uniform(25, 5), (std::vector<int>{2, 7, 12, 17, 22}));
    EXPECT_EQ(sample_uniform(3, 8), (std::vector<int>{0, 1, 2}));
}

TEST(UniformSampling, StrictlyIncreasingAndInRange) {
    for (int n = 1; n <= 60; ++n) {
        for (int k = 1; k <= n; ++k) {
            const auto idx = sample_uniform(n, k);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                EXPECT_GE(idx[i], 0);
                EXPECT_LT(idx[i], n);
                if (i > 0) {
                    EXPECT_GT(idx[i], idx[i - 1]);
                }
            }
        }
    }
}

TEST(UniformSampling, Errors) {
    EXPECT_THROW(sample_uniform(10, 0), ConfigError);
    EXPECT_THROW(sample_uniform(0, 3), ConfigError);
}

namespace {

const char* kTwoRecordManifest =
    R"({"format":"vidkd-manifest","version":"1","class_names":["Dribble","Kick"]})"
    "\n"
    R"({"clip_id":"a","path":"clips/a","label":"Kick","split":"train","frame_count":25})"
    "\n"
    R"({"clip_id":"b","path":"clips/b","label":"Dribble","split":"val","frame_count":30})"
    "\n";

ClipManifest parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    s.replace(s.find(from), from.size(), to);
    return s;
}

}  // namespace

TEST(Manifest, ParsesRecords) {
    const auto m = parse_text(kTwoRecordManifest);
    ASSERT_EQ(m.records.size(), 2u);
    EXPECT_EQ(m.num_classes(), 2u);
    EXPECT_EQ(m.records[0].label_index, 1);
    EXPECT_EQ(m.records[1].split, Split::val);
    EXPECT_EQ(m.records[1].frame_count, 30);
    EXPECT_EQ(m.count(Split::train), 1u);
}

TEST(Manifest, RoundTripIsIdentical) {
    const auto m = parse_text(kTwoRecordManifest);
    std::ostringstream out;
    write_manifest(out, m);
    EXPECT_EQ(out.str(), kTwoRecordManifest);
    EXPECT_EQ(parse_text(out.str()), m);
}

TEST(Manifest, RejectsBadInput) {
    const std::string base = kTwoRecordManifest;
    EXPECT_THROW(parse_text(replace(base, R"("clip_id":"b")", R"("clip_id":"a")")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("label":"Kick")", R"("label":"Header")")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("frame_count":25)", R"("frame_count":0)")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("split":"val")", R"("split":"test")")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("frame_count":25)", R"("frame_count":"25")")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("frame_count":25})", R"("frame_count":25,"extra":1})")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("version":"1")", R"("version":"9")")), FormatError);
    EXPECT_THROW(parse_text(replace(base, R"("path":"clips/a",)", "")), FormatError);
    EXPECT_THROW(parse_text(""), FormatError);
    EXPECT_THROW(parse_text(base + "{not json\n"), FormatError);
}

TEST(Manifest, ErrorNamesLine) {
    const std::string bad = replace(kTwoRecordManifest, R"("label":"Dribble")", R"("label":"Header")");
    try {
        parse_text(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Manifest, MissingFileIsIoError) {
    EXPECT_THROW(load_manifest("/nonexistent/manifest.jsonl"), IoError);
}

TEST(Manifest, ResolvesRelativeToRoot) {
    std::istringstream in(kTwoRecordManifest);
    const auto m = parse_manifest(in, "/data/set");
    EXPECT_EQ(m.resolve(m.records[0]), fs::path("/data/set/clips/a"));
}

TEST(StratifiedSplit, TenClipsGiveEightAndTwo) {
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"a", "b"});
    for (int i = 0; i < 10; ++i) {
        m.records.push_back({"c" + std::to_string(i), "p", i % 2, Split::train, 5});
    }
    assign_stratified_splits(m, 0.8, 3);
    EXPECT_EQ(m.count(Split::train), 8u);
    EXPECT_EQ(m.count(Split::val), 2u);
    std::set<int> val_labels;
    for (auto i : m.indices(Split::val)) {
        val_labels.insert(m.records[i].label_index);
    }
    EXPECT_EQ(val_labels, (std::set<int>{0, 1}));
}

TEST(StratifiedSplit, SeededAndKeepsBothSidesPerClass) {
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"a", "b", "c"});
    for (int i = 0; i < 21; ++i) {
        m.records.push_back({"c" + std::to_string(i), "p", i % 3, Split::train, 5});
    }
    auto a = m, b = m;
    assign_stratified_splits(a, 0.9, 1);
    assign_stratified_splits(b, 0.9, 1);
    EXPECT_EQ(a, b);
    for (int label = 0; label < 3; ++label) {
        int train = 0, val = 0;
        for (const auto& r : a.records) {
            if (r.label_index == label) {
                (r.split == Split::train ? train : val)++;
            }
        }
        EXPECT_GE(train, 1);
        EXPECT_GE(val, 1);
    }
    EXPECT_THROW(assign_stratified_splits(a, 1.0, 1), ConfigError);
}

TEST(Fixture, LayoutAndCounts) {
    const auto& m = test::fixture();
    EXPECT_EQ(m.records.size(), 8u);
    EXPECT_EQ(m.num_classes(), 4u);
    EXPECT_EQ(m.count(Split::train), 4u);
    EXPECT_EQ(m.count(Split::val), 4u);
    for (const auto& r : m.records) {
        EXPECT_EQ(r.frame_count, 25);
        EXPECT_EQ(count_frames(m.resolve(r)), 25);
    }
    const auto reloaded = load_manifest(fs::path(VIDKD_TEST_TMP) / "fixture" / "manifest.jsonl");
    EXPECT_EQ(reloaded, m);
}

TEST(Fixture, Deterministic) {
    const auto a = make_synthetic_fixture(test::scratch("fixture_a"), {});
    const auto b = make_synthetic_fixture(test::scratch("fixture_b"), {});
    EXPECT_EQ(a, b);
    const auto ia = read_image(a.resolve(a.records[3]) / "frame_0007.png");
    const auto ib = read_image(b.resolve(b.records[3]) / "frame_0007.png");
    EXPECT_EQ(ia.pixels, ib.pixels);
}

TEST(Batches, SizesAndCoverage) {
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"a"});
    for (int i = 0; i < 10; ++i) {
        m.records.push_back({"c" + std::to_string(i), "p", 0, Split::train, 5});
    }
    const auto plan = plan_batches(m, Split::train, 4, 17);
    ASSERT_EQ(plan.size(), 3u);
    EXPECT_EQ(plan[0].size(), 4u);
    EXPECT_EQ(plan[1].size(), 4u);
    EXPECT_EQ(plan[2].size(), 2u);
    std::multiset<std::size_t> seen;
    for (const auto& b : plan) {
        seen.insert(b.begin(), b.end());
    }
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 10u);
    EXPECT_EQ(plan, plan_batches(m, Split::train, 4, 17));
    EXPECT_NE(plan, plan_batches(m, Split::train, 4, 18));
    EXPECT_THROW(plan_batches(m, Split::val, 4, 1), ConfigError);
    EXPECT_THROW(plan_batches(m, Split::train, 0, 1), ConfigError);
}

TEST(Batches, ValidationKeepsManifestOrder) {
    const auto& m = test::fixture();
    const auto plan = plan_batches(m, Split::val, 3, 99);
    std::vector<std::size_t> flat;
    for (const auto& b : plan) {
        flat.insert(flat.end(), b.begin(), b.end());
    }
    EXPECT_EQ(flat, m.indices(Split::val));
}

TEST(Batches, PackedShapesAndOffsets) {
    SamplingConfig s;
    s.num_frames = 5;
    s.crop_size = 16;
    ClipDataset data(test::fixture(), s);
    const auto batch = data.batch({0, 2, 5});
    EXPECT_EQ(batch.frames.shape(), (Shape{15, 3, 16, 16}));
    EXPECT_EQ(batch.offsets, (std::vector<std::size_t>{0, 5, 10, 15}));
    EXPECT_EQ(batch.clip_count(), 3u);
    EXPECT_EQ(batch.labels[2], data.manifest().records[5].label_index);
    EXPECT_EQ(batch.clip_ids[1], data.manifest().records[2].clip_id);
}

TEST(Preprocess, ConstantImageStaysConstant) {
    const auto dir = test::scratch("const_clip");
    fs::create_directories(dir / "clip");
    for (int f = 0; f < 4; ++f) {
        Image img(40, 60, 0.5f);
        write_image(dir / "clip" / (frame_stem(f) + ".png"), img);
    }
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"x"});
    m.root = dir;
    m.records.push_back({"clip", "clip", 0, Split::train, 4});
    SamplingConfig s;
    s.num_frames = 2;
    s.crop_size = 24;
    const auto seq = preprocess_clip(m, m.records[0], s);
    EXPECT_EQ(seq.source_indices, (std::vector<int>{1, 3}));
    ASSERT_EQ(seq.frames.size(), 2u);
    const float stored = std::round(0.5f * 255.0f) / 255.0f;
    for (const auto& img : seq.frames) {
        EXPECT_EQ(img.height, 24);
        EXPECT_EQ(img.width, 24);
        for (float v : img.pixels) {
            EXPECT_NEAR(v, stored, 1e-6f);
        }
    }
}

TEST(Preprocess, CenterCropIsDeterministicAndRandomCropVaries) {
    const auto& m = test::fixture();
    SamplingConfig s;
    s.num_frames = 3;
    s.crop_size = 20;
    const auto a = preprocess_clip(m, m.records[1], s, 1);
    const auto b = preprocess_clip(m, m.records[1], s, 2);
    EXPECT_EQ(a.frames[0].pixels, b.frames[0].pixels);
    s.crop_strategy = CropStrategy::random_scale_center;
    s.min_crop_scale = 0.5;
    const auto c = preprocess_clip(m, m.records[1], s, 1);
    const auto d = preprocess_clip(m, m.records[1], s, 1);
    const auto e = preprocess_clip(m, m.records[1], s, 2);
    EXPECT_EQ(c.frames[0].pixels, d.frames[0].pixels);
    EXPECT_NE(c.frames[0].pixels, e.frames[0].pixels);
}

TEST(Preprocess, CenterCropBox) {
    const auto box = center_crop_box(40, 60);
    EXPECT_EQ(box.side, 40);
    EXPECT_EQ(box.y, 0);
    EXPECT_EQ(box.x, 10);
    const auto half = center_crop_box(40, 60, 0.5);
    EXPECT_EQ(half.side, 20);
    EXPECT_EQ(half.y, 10);
    EXPECT_EQ(half.x, 20);
}

TEST(Preprocess, MissingFrameNamesClipAndIndex) {
    const auto dir = test::scratch("short_clip");
    fs::create_directories(dir / "clip");
    write_image(dir / "clip" / (frame_stem(0) + ".png"), Image(8, 8, 0.1f));
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"x"});
    m.root = dir;
    m.records.push_back({"short", "clip", 0, Split::train, 10});
    SamplingConfig s;
    s.num_frames = 2;
    s.crop_size = 8;
    try {
        preprocess_clip(m, m.records[0], s);
        FAIL();
    } catch (const FormatError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("short"), std::string::npos) << what;
        EXPECT_NE(what.find("frame 2"), std::string::npos) << what;
    }
}

TEST(Preprocess, MissingClipIsIoError) {
    ClipManifest m;
    m.vocabulary = ClassVocabulary({"x"});
    m.root = test::scratch("missing_clip");
    m.records.push_back({"gone", "gone.avi", 0, Split::train, 10});
    SamplingConfig s;
    s.crop_size = 8;
    EXPECT_THROW(preprocess_clip(m, m.records[0], s), IoError);
}

TEST(Scan, FrameDirectoriesAndVideos) {
    const auto dir = test::scratch("scan");
    fs::create_directories(dir / "src" / "Kick" / "k1");
    fs::create_directories(dir / "src" / "Dribble" / "d1");
    for (int f = 0; f < 3; ++f) {
        write_image(dir / "src" / "Kick" / "k1" / (frame_stem(f) + ".png"), Image(8, 8, 0.2f));
        write_image(dir / "src" / "Dribble" / "d1" / (frame_stem(f) + ".png"), Image(8, 8, 0.7f));
    }
    bool have_video = false;
    {
        cv::VideoWriter w((dir / "src" / "Kick" / "k2.avi").string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), 10.0,
                          cv::Size(16, 16));
        if (w.isOpened()) {
            have_video = true;
            for (int f = 0; f < 6; ++f) {
                w.write(cv::Mat(16, 16, CV_8UC3, cv::Scalar(20 * f, 60, 90)));
            }
        }
    }
    if (!have_video) {
        fs::remove(dir / "src" / "Kick" / "k2.avi");
    }
    const auto m = scan_clip_directory(dir / "src", dir);
    EXPECT_EQ(m.vocabulary.names(), (std::vector<std::string>{"Dribble", "Kick"}));
    ASSERT_EQ(m.records.size(), have_video ? 3u : 2u);
    EXPECT_EQ(m.records[0].clip_id, "Dribble/d1");
    EXPECT_EQ(m.records[0].path, "src/Dribble/d1");
    EXPECT_EQ(m.records[1].frame_count, 3);
    if (have_video) {
        EXPECT_EQ(m.records[2].clip_id, "Kick/k2");
        EXPECT_EQ(m.records[2].frame_count, 6);
        SamplingConfig s;
        s.num_frames = 3;
        s.crop_size = 8;
        const auto seq = preprocess_clip(m, m.records[2], s);
        EXPECT_EQ(seq.source_indices, (std::vector<int>{1, 3, 5}));
        EXPECT_EQ(seq.frames.size(), 3u);
    }
    EXPECT_THROW(scan_clip_directory(dir / "nope", dir), IoError);
}
