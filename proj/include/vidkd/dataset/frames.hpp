#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vidkd/dataset/manifest.hpp"
#include "vidkd/dataset/sampling.hpp"
#include "vidkd/error.hpp"
#include "vidkd/random.hpp"

namespace vidkd {

/// H x W x 3 RGB image with channel values in [0, 1], stored interleaved (HWC).
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool operator==(const Image&) const = default;
};

/// Preprocessed frames of one clip, in temporal order.
struct FrameSequence {
    std::string clip_id;
    std::vector<Image> frames;
    std::vector<int> source_indices;

    bool operator==(const FrameSequence&) const = default;
};

inline constexpr std::array<const char*, 8> kFrameExtensions = {".png", ".jpg", ".jpeg", ".bmp",
                                                                ".ppm", ".pfm", ".tif", ".tiff"};

inline std::string frame_stem(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", index);
    return buf;
}

inline std::optional<fs::path> find_frame_file(const fs::path& dir, int index) {
    const auto stem = frame_stem(index);
    for (const char* ext : kFrameExtensions) {
        auto p = dir / (stem + ext);
        if (fs::exists(p)) {
            return p;
        }
    }
    return std::nullopt;
}

inline Image image_from_mat(const cv::Mat& mat) {
    if (mat.empty()) {
        throw FormatError("empty image");
    }
    double scale = 1.0;
    switch (mat.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        case CV_32F: scale = 1.0; break;
        default: throw FormatError("unsupported image depth");
    }
    cv::Mat f;
    mat.convertTo(f, CV_32F, scale);
    const int ch = f.channels();
    if (ch != 1 && ch != 3 && ch != 4) {
        throw FormatError("unsupported channel count " + std::to_string(ch));
    }
    Image img(f.rows, f.cols);
    for (int y = 0; y < f.rows; ++y) {
        const float* row = f.ptr<float>(y);
        for (int x = 0; x < f.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                // OpenCV stores BGR(A).
                const float v = ch == 1 ? row[x] : row[x * ch + (2 - c)];
                img.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return img;
}

inline cv::Mat mat_from_image(const Image& img, int depth = CV_8U) {
    cv::Mat f(img.height, img.width, CV_32FC3);
    for (int y = 0; y < img.height; ++y) {
        auto* row = f.ptr<float>(y);
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                row[x * 3 + (2 - c)] = img.at(y, x, c);
            }
        }
    }
    if (depth == CV_32F) {
        return f;
    }
    cv::Mat out;
    f.convertTo(out, depth, depth == CV_16U ? 65535.0 : 255.0);
    return out;
}

inline Image read_image(const fs::path& path) {
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw FormatError("cannot decode image '" + path.string() + "'");
    }
    return image_from_mat(mat);
}

/// Writes PNG (8-bit), or float data when the extension is .pfm.
inline void write_image(const fs::path& path, const Image& img) {
    const bool is_float = path.extension() == ".pfm";
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), mat_from_image(img, is_float ? CV_32F : CV_8U));
    } catch (const cv::Exception&) {
        ok = false;
    }
    if (!ok) {
        throw IoError("cannot write image '" + path.string() + "'");
    }
}

/// Number of readable frames in a clip (frame directory or video file).
inline int count_frames(const fs::path& clip_path) {
    if (fs::is_directory(clip_path)) {
        int n = 0;
        while (find_frame_file(clip_path, n)) {
            ++n;
        }
        return n;
    }
    cv::VideoCapture cap(clip_path.string());
    if (!cap.isOpened()) {
        throw IoError("cannot open video '" + clip_path.string() + "'");
    }
    int n = 0;
    cv::Mat frame;
    while (cap.read(frame)) {
        ++n;
    }
    return n;
}

/// Decodes the frames at `indices` (strictly increasing) from a frame directory or a video file.
inline std::vector<Image> read_clip_frames(const fs::path& clip_path, const std::vector<int>& indices,
                                           const std::string& clip_id) {
    std::vector<Image> out;
    out.reserve(indices.size());
    auto fail = [&](int index, const std::string& why) -> FormatError {
        return FormatError("clip '" + clip_id + "' frame " + std::to_string(index) + ": " + why);
    };
    if (fs::is_directory(clip_path)) {
        for (int index : indices) {
            const auto file = find_frame_file(clip_path, index);
            if (!file) {
                throw fail(index, "missing " + frame_stem(index) + " in '" + clip_path.string() + "'");
            }
            const cv::Mat mat = cv::imread(file->string(), cv::IMREAD_UNCHANGED);
            if (mat.empty()) {
                throw fail(index, "unreadable image '" + file->string() + "'");
            }
            out.push_back(image_from_mat(mat));
        }
        return out;
    }
    if (!fs::exists(clip_path)) {
        throw IoError("clip '" + clip_id + "': path '" + clip_path.string() + "' does not exist");
    }
    cv::VideoCapture cap(clip_path.string());
    if (!cap.isOpened()) {
        throw fail(indices.empty() ? 0 : indices.front(), "cannot open video '" + clip_path.string() + "'");
    }
    int position = 0;
    cv::Mat frame;
    for (int index : indices) {
        while (position <= index) {
            if (!cap.read(frame)) {
                throw fail(index, "video ended or frame corrupt");
            }
            ++position;
        }
        out.push_back(image_from_mat(frame));
    }
    return out;
}

/// Square crop box inside an image, in source pixel coordinates.
struct CropBox {
    int y = 0;
    int x = 0;
    int side = 0;
};

inline CropBox center_crop_box(int height, int width, double scale = 1.0) {
    const int short_side = std::min(height, width);
    const int side = std::max(1, static_cast<int>(std::lround(short_side * scale)));
    return {(height - side) / 2, (width - side) / 2, side};
}

/// Bilinear resample of a square region to out_size x out_size using half-pixel centers.
/// Interpolation is written in lerp form so constant regions stay exactly constant.
inline Image crop_resize(const Image& src, const CropBox& box, int out_size) {
    Image out(out_size, out_size);
    const double scale = static_cast<double>(box.side) / out_size;
    for (int oy = 0; oy < out_size; ++oy) {
        const double sy = std::clamp((oy + 0.5) * scale - 0.5, 0.0, static_cast<double>(box.side - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, box.side - 1);
        const auto fy = static_cast<float>(sy - y0);
        for (int ox = 0; ox < out_size; ++ox) {
            const double sx = std::clamp((ox + 0.5) * scale - 0.5, 0.0, static_cast<double>(box.side - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, box.side - 1);
            const auto fx = static_cast<float>(sx - x0);
            for (int c = 0; c < 3; ++c) {
                const float a = src.at(box.y + y0, box.x + x0, c);
                const float b = src.at(box.y + y0, box.x + x1, c);
                const float d = src.at(box.y + y1, box.x + x0, c);
                const float e = src.at(box.y + y1, box.x + x1, c);
                const float top = a + fx * (b - a);
                const float bottom = d + fx * (e - d);
                out.at(oy, ox, c) = top + fy * (bottom - top);
            }
        }
    }
    return out;
}

/// Samples, decodes and crops one clip. `crop_seed` drives random-scale-center and is ignored for
/// center cropping, which is a pure function of the clip bytes and the config.
inline FrameSequence preprocess_clip(const ClipManifest& manifest, const ClipRecord& record,
                                     const SamplingConfig& config, std::uint64_t crop_seed = 0) {
    config.validate();
    FrameSequence seq;
    seq.clip_id = record.clip_id;
    seq.source_indices = sample_uniform(record, config);
    auto raw = read_clip_frames(manifest.resolve(record), seq.source_indices, record.clip_id);
    const int h = raw.front().height;
    const int w = raw.front().width;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i].height != h || raw[i].width != w) {
            throw FormatError("clip '" + record.clip_id + "' frame " + std::to_string(seq.source_indices[i]) +
                              ": size differs from the first sampled frame");
        }
    }
    double scale = 1.0;
    if (config.crop_strategy == CropStrategy::random_scale_center) {
        Rng rng(crop_seed);
        scale = std::uniform_real_distribution<double>(config.min_crop_scale, 1.0)(rng);
    }
    // One crop box per clip keeps the frames spatially aligned.
    const CropBox box = center_crop_box(h, w, scale);
    seq.frames.reserve(raw.size());
    for (const auto& img : raw) {
        seq.frames.push_back(crop_resize(img, box, config.crop_size));
    }
    return seq;
}

}  // namespace vidkd
