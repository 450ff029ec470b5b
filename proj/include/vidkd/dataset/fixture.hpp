#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vidkd/dataset/frames.hpp"
#include "vidkd/dataset/manifest.hpp"
#include "vidkd/random.hpp"

namespace vidkd {

struct FixtureOptions {
    int num_classes = 4;
    int clips_per_class = 2;
    int frame_count = 25;
    int image_size = 32;
    std::uint64_t seed = 7;
    double train_fraction = 0.8;
    double pixel_noise = 0.08;
    double clip_jitter = 0.03;
};

inline std::vector<std::string> fixture_class_names(int num_classes) {
    static const std::array<const char*, 4> kSoccer = {"Dribble", "Kick", "Run", "Walk"};
    std::vector<std::string> names;
    for (int c = 0; c < num_classes; ++c) {
        if (num_classes <= static_cast<int>(kSoccer.size())) {
            names.emplace_back(kSoccer[static_cast<std::size_t>(c)]);
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "class_%02d", c);
            names.emplace_back(buf);
        }
    }
    return names;
}

/// Evenly spaced hues give each class a distinct mean color.
inline std::array<double, 3> fixture_class_color(int label, int num_classes) {
    const double h = 6.0 * label / num_classes;
    const double s = 0.65;
    const double v = 0.75;
    const int sector = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

/// Writes a class-separable synthetic dataset under `out_dir` (clips/<id>/frame_NNNN.png plus
/// manifest.jsonl) and returns the manifest.
inline ClipManifest make_synthetic_fixture(const fs::path& out_dir, const FixtureOptions& opt) {
    if (opt.num_classes < 1 || opt.clips_per_class < 1 || opt.frame_count < 1 || opt.image_size < 1) {
        throw ConfigError("fixture arguments must all be positive");
    }
    std::error_code ec;
    fs::create_directories(out_dir / "clips", ec);
    if (ec) {
        throw IoError("cannot create fixture directory '" + out_dir.string() + "': " + ec.message());
    }
    ClipManifest m;
    m.vocabulary = ClassVocabulary(fixture_class_names(opt.num_classes));
    m.root = out_dir;
    for (int label = 0; label < opt.num_classes; ++label) {
        const auto base = fixture_class_color(label, opt.num_classes);
        for (int k = 0; k < opt.clips_per_class; ++k) {
            char id[64];
            std::snprintf(id, sizeof(id), "%s_%03d", m.vocabulary.name(static_cast<std::size_t>(label)).c_str(), k);
            Rng rng(derive_seed(opt.seed, "fixture", label, k));
            std::normal_distribution<double> jitter(0.0, opt.clip_jitter);
            std::normal_distribution<double> noise(0.0, opt.pixel_noise);
            std::array<double, 3> mean{};
            for (int c = 0; c < 3; ++c) {
                mean[static_cast<std::size_t>(c)] = base[static_cast<std::size_t>(c)] + jitter(rng);
            }
            const fs::path clip_dir = out_dir / "clips" / id;
            fs::create_directories(clip_dir, ec);
            if (ec) {
                throw IoError("cannot create '" + clip_dir.string() + "': " + ec.message());
            }
            for (int f = 0; f < opt.frame_count; ++f) {
                Image img(opt.image_size, opt.image_size);
                for (int y = 0; y < opt.image_size; ++y) {
                    for (int x = 0; x < opt.image_size; ++x) {
                        for (int c = 0; c < 3; ++c) {
                            const double v = mean[static_cast<std::size_t>(c)] + noise(rng);
                            img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                        }
                    }
                }
                write_image(clip_dir / (frame_stem(f) + ".png"), img);
            }
            ClipRecord r;
            r.clip_id = id;
            r.path = (fs::path("clips") / id).generic_string();
            r.label_index = label;
            r.frame_count = opt.frame_count;
            m.records.push_back(std::move(r));
        }
    }
    assign_stratified_splits(m, opt.train_fraction, opt.seed);
    write_manifest(out_dir / "manifest.jsonl", m);
    return m;
}

}  // namespace vidkd
