#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vidkd/dataset/batches.hpp"
#include "vidkd/evaluation/metrics.hpp"
#include "vidkd/json_util.hpp"
#include "vidkd/models/model.hpp"

namespace vidkd {

struct EvalOptions {
    std::size_t batch_size = 64;
};

struct EvalReport {
    double frame_top1 = 0.0;
    double video_top1 = 0.0;
    std::size_t clip_count = 0;
    std::size_t frame_count = 0;
    std::vector<std::string> class_names;
    std::vector<std::optional<double>> per_class;  // video-level accuracy; empty classes have no value
    std::vector<std::vector<int>> confusion;       // rows: true class, columns: predicted class
    std::vector<VideoVerdict> verdicts;
};

/// Scores a model on one split. Frame models contribute one prediction per frame and are judged by
/// the at-least-half rule; clip models contribute one prediction per clip. Models with more outputs
/// than classes (a raw backbone, an early-distilled student) use the naive mapping class c -> output c.
inline EvalReport evaluate_model(Model& model, ClipDataset& data, Split split = Split::val,
                                 const EvalOptions& options = {}) {
    const std::size_t m = data.num_classes();
    if (model.output_dim() < m) {
        throw ShapeError("model emits " + std::to_string(model.output_dim()) + " outputs for " + std::to_string(m) +
                         " classes");
    }
    std::vector<FramePrediction> predictions;
    std::vector<int> clip_labels;
    std::vector<int> clip_plurality;
    for (const auto& indices : plan_batches(data.manifest(), split, options.batch_size, 0)) {
        const ClipBatch batch = data.batch(indices);
        const Tensor units = model.predict_units(batch);
        const std::size_t width = units.dim(1);
        const bool per_frame = model.granularity() == OutputGranularity::frame;
        for (std::size_t b = 0; b < batch.clip_count(); ++b) {
            const std::size_t begin = per_frame ? batch.offsets[b] : b;
            const std::size_t end = per_frame ? batch.offsets[b + 1] : b + 1;
            std::vector<int> votes(m, 0);
            for (std::size_t u = begin; u < end; ++u) {
                const int pred = argmax_row(units.data() + u * width, m);
                ++votes[static_cast<std::size_t>(pred)];
                predictions.push_back(
                    {batch.clip_ids[b], static_cast<int>(u - begin), pred, batch.labels[b]});
            }
            clip_labels.push_back(batch.labels[b]);
            clip_plurality.push_back(static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
        }
    }
    EvalReport r;
    r.class_names = data.manifest().vocabulary.names();
    r.clip_count = clip_labels.size();
    r.frame_count = predictions.size();
    std::size_t frame_hits = 0;
    for (const auto& p : predictions) {
        frame_hits += p.predicted == p.true_label ? 1 : 0;
    }
    r.frame_top1 = static_cast<double>(frame_hits) / static_cast<double>(predictions.size());
    auto video = video_level_accuracy(predictions);
    r.video_top1 = video.accuracy;
    r.verdicts = std::move(video.verdicts);
    r.confusion.assign(m, std::vector<int>(m, 0));
    std::vector<int> class_total(m, 0);
    std::vector<int> class_correct(m, 0);
    for (std::size_t i = 0; i < clip_labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(clip_labels[i]);
        ++r.confusion[y][static_cast<std::size_t>(clip_plurality[i])];
        ++class_total[y];
        class_correct[y] += r.verdicts[i].correct ? 1 : 0;
    }
    for (std::size_t c = 0; c < m; ++c) {
        if (class_total[c] == 0) {
            r.per_class.emplace_back(std::nullopt);
        } else {
            r.per_class.emplace_back(static_cast<double>(class_correct[c]) / class_total[c]);
        }
    }
    return r;
}

inline OrderedJson to_json(const EvalReport& r) {
    OrderedJson j;
    j["frame_top1"] = r.frame_top1;
    j["video_top1"] = r.video_top1;
    j["clips"] = r.clip_count;
    j["frames"] = r.frame_count;
    OrderedJson per_class = OrderedJson::object();
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
        per_class[r.class_names[c]] = r.per_class[c] ? OrderedJson(*r.per_class[c]) : OrderedJson(nullptr);
    }
    j["per_class_video_top1"] = per_class;
    j["class_names"] = r.class_names;
    j["confusion"] = r.confusion;
    return j;
}

}  // namespace vidkd
