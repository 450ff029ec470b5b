#pragma once

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "vidkd/dataset/frames.hpp"
#include "vidkd/dataset/manifest.hpp"

namespace vidkd {

inline bool is_video_file(const fs::path& p) {
    static const std::set<std::string> exts{".mp4", ".avi", ".mkv", ".mov", ".webm", ".mpg", ".mpeg"};
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return exts.count(ext) > 0;
}

/// Builds a manifest from `src/<class>/<clip>` where each clip is a frame directory or a video file.
/// Classes and clips are taken in sorted order; paths are written relative to `manifest_dir`.
/// Every record starts in the train split.
inline ClipManifest scan_clip_directory(const fs::path& src, const fs::path& manifest_dir) {
    std::error_code ec;
    if (!fs::is_directory(src, ec)) {
        throw IoError("source '" + src.string() + "' is not a directory");
    }
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(src)) {
        if (e.is_directory()) {
            class_dirs.push_back(e.path());
        }
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
        throw FormatError("source '" + src.string() + "' holds no class directories");
    }
    std::vector<std::string> names;
    for (const auto& d : class_dirs) {
        names.push_back(d.filename().string());
    }
    ClipManifest m;
    m.vocabulary = ClassVocabulary(names);
    m.root = manifest_dir;
    const fs::path root_abs = fs::absolute(manifest_dir).lexically_normal();
    for (std::size_t label = 0; label < class_dirs.size(); ++label) {
        std::vector<fs::path> clips;
        for (const auto& e : fs::directory_iterator(class_dirs[label])) {
            if (e.is_directory() || (e.is_regular_file() && is_video_file(e.path()))) {
                clips.push_back(e.path());
            }
        }
        std::sort(clips.begin(), clips.end());
        for (const auto& clip : clips) {
            ClipRecord r;
            r.clip_id = names[label] + "/" + clip.stem().string();
            r.path = fs::absolute(clip).lexically_normal().lexically_relative(root_abs).generic_string();
            r.label_index = static_cast<int>(label);
            r.frame_count = count_frames(clip);
            if (r.frame_count < 1) {
                throw FormatError("clip '" + r.clip_id + "' has no readable frames");
            }
            m.records.push_back(std::move(r));
        }
    }
    validate(m);
    return m;
}

}  // namespace vidkd
