#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/archive.hpp"
#include "vidkd/models/factory.hpp"
#include "vidkd/nn/optim.hpp"
#include "vidkd/training/history.hpp"

namespace vidkd {

inline constexpr const char* kCheckpointFormat = "vidkd-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct BestEpoch {
    int epoch = 0;  // 0: none yet
    double val_accuracy = 0.0;
    double val_loss = 0.0;

    bool operator==(const BestEpoch&) const = default;
};

/// Everything needed to evaluate a model or resume its training run.
struct TrainingCheckpoint {
    std::string role;  // "teacher" or "student"
    Json model_spec;
    std::vector<std::pair<std::string, Tensor>> model_state;
    nn::OptimizerState optimizer;
    Json config = Json::object();
    int epoch = 0;  // completed epochs
    std::uint64_t seed = 0;
    RunHistory history;
    BestEpoch best;
};

inline TrainingCheckpoint snapshot(Model& model, std::string role) {
    TrainingCheckpoint c;
    c.role = std::move(role);
    c.model_spec = model.spec();
    c.model_state = export_state(model);
    return c;
}

inline Archive to_archive(const TrainingCheckpoint& c) {
    Archive a;
    Json model_names = Json::array();
    Json optim_names = Json::array();
    for (const auto& [name, t] : c.model_state) {
        model_names.push_back({{"name", name}, {"shape", t.shape()}});
        a.tensors.emplace_back("model/" + name, t);
    }
    for (const auto& [name, t] : c.optimizer.tensors) {
        optim_names.push_back(name);
        a.tensors.emplace_back("optim/" + name, t);
    }
    a.meta = {{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"role", c.role},
              {"model_spec", c.model_spec},
              {"parameters", model_names},
              {"optimizer", {{"meta", c.optimizer.meta}, {"tensors", optim_names}}},
              {"config", c.config},
              {"epoch", c.epoch},
              {"seed", c.seed},
              {"history", to_json(c.history)},
              {"best", {{"epoch", c.best.epoch}, {"val_accuracy", c.best.val_accuracy}, {"val_loss", c.best.val_loss}}}};
    return a;
}

inline TrainingCheckpoint from_archive(const Archive& a) {
    if (a.meta.value("format", "") != kCheckpointFormat) {
        throw FormatError("archive is not a checkpoint");
    }
    if (a.meta.value("version", -1) != kCheckpointVersion) {
        throw FormatError("checkpoint version " + a.meta.value("version", Json(-1)).dump() + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    TrainingCheckpoint c;
    try {
        c.role = a.meta.at("role").get<std::string>();
        c.model_spec = a.meta.at("model_spec");
        c.config = a.meta.at("config");
        c.epoch = a.meta.at("epoch").get<int>();
        c.seed = a.meta.at("seed").get<std::uint64_t>();
        c.history = history_from_json(a.meta.at("history"));
        const auto& best = a.meta.at("best");
        c.best = {best.at("epoch").get<int>(), best.at("val_accuracy").get<double>(), best.at("val_loss").get<double>()};
        c.optimizer.meta = a.meta.at("optimizer").at("meta");
        for (const auto& entry : a.meta.at("parameters")) {
            const auto name = entry.at("name").get<std::string>();
            const Tensor* t = a.find("model/" + name);
            if (t == nullptr) {
                throw FormatError("checkpoint is missing tensor '" + name + "'");
            }
            if (t->shape() != entry.at("shape").get<Shape>()) {
                throw ShapeError("checkpoint tensor '" + name + "' disagrees with its declared shape");
            }
            c.model_state.emplace_back(name, *t);
        }
        for (const auto& entry : a.meta.at("optimizer").at("tensors")) {
            const auto name = entry.get<std::string>();
            const Tensor* t = a.find("optim/" + name);
            if (t == nullptr) {
                throw FormatError("checkpoint is missing optimizer tensor '" + name + "'");
            }
            c.optimizer.tensors.emplace_back(name, *t);
        }
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
    }
    return c;
}

inline void save_checkpoint(const TrainingCheckpoint& c, const std::filesystem::path& path) {
    write_archive(path, to_archive(c));
}

inline TrainingCheckpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return from_archive(read_archive(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Rebuilds the architecture from the stored model description and loads its weights; every
/// shape is checked before any weight is accepted.
inline std::unique_ptr<Model> restore_model(const TrainingCheckpoint& c) {
    auto model = build_model(c.model_spec);
    import_state(*model, c.model_state);
    return model;
}

}  // namespace vidkd
