#pragma once

#include <cstdint>
#include <string>

#include "vidkd/json_util.hpp"
#include "vidkd/losses.hpp"
#include "vidkd/training/schedule.hpp"

namespace vidkd {

/// Teacher fine-tuning recipe; defaults follow the reference run (100 epochs, batch 64,
/// Adam at 1e-4 with cosine annealing).
struct TeacherTrainConfig {
    int epochs = 100;
    std::size_t batch_size = 64;
    std::string optimizer = "adaptive-moment";
    double learning_rate = 1e-4;
    double min_learning_rate = 0.0;
    Schedule schedule = Schedule::cosine_annealing;
    std::uint64_t seed = 11;
    double grad_clip_norm = 0.0;  // 0 disables clipping

    void validate() const {
        if (epochs < 1) {
            throw ConfigError("teacher.train.epochs must be >= 1");
        }
        if (batch_size == 0) {
            throw ConfigError("teacher.train.batch_size must be positive");
        }
        if (optimizer != "adaptive-moment") {
            throw ConfigError("teacher.train.optimizer must be 'adaptive-moment'");
        }
        if (!(learning_rate > 0.0)) {
            throw ConfigError("teacher.train.learning_rate must be positive");
        }
        if (!(min_learning_rate >= 0.0 && min_learning_rate <= learning_rate)) {
            throw ConfigError("teacher.train.min_learning_rate must lie in [0, learning_rate]");
        }
        if (grad_clip_norm < 0.0) {
            throw ConfigError("teacher.train.grad_clip_norm must be >= 0");
        }
    }

    bool operator==(const TeacherTrainConfig&) const = default;
};

enum class DistillStage { late, early };

inline const char* to_string(DistillStage s) { return s == DistillStage::late ? "late" : "early"; }

inline DistillStage parse_stage(const std::string& text) {
    if (text == "late") {
        return DistillStage::late;
    }
    if (text == "early") {
        return DistillStage::early;
    }
    throw ConfigError("unknown distillation stage '" + text + "'");
}

/// Student distillation recipe; defaults follow the reference run (200 epochs, batch 128,
/// SGD at a constant 1e-4 with momentum 0.9 and weight decay 5e-4, alpha 0.90, tau 6).
struct StudentTrainConfig {
    int epochs = 200;
    std::size_t batch_size = 128;
    std::string optimizer = "momentum-sgd";
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    Schedule schedule = Schedule::constant;
    double min_learning_rate = 0.0;
    DistillParams distill;
    DistillStage stage = DistillStage::late;
    std::uint64_t seed = 11;
    double grad_clip_norm = 0.0;
    bool cache_teacher_logits = false;

    void validate() const {
        if (epochs < 1) {
            throw ConfigError("student.train.epochs must be >= 1");
        }
        if (batch_size == 0) {
            throw ConfigError("student.train.batch_size must be positive");
        }
        if (optimizer != "momentum-sgd") {
            throw ConfigError("student.train.optimizer must be 'momentum-sgd'");
        }
        if (!(learning_rate > 0.0)) {
            throw ConfigError("student.train.learning_rate must be positive");
        }
        if (!(momentum >= 0.0 && momentum < 1.0)) {
            throw ConfigError("student.train.momentum must lie in [0, 1)");
        }
        if (!(weight_decay >= 0.0)) {
            throw ConfigError("student.train.weight_decay must be >= 0");
        }
        if (!(min_learning_rate >= 0.0 && min_learning_rate <= learning_rate)) {
            throw ConfigError("student.train.min_learning_rate must lie in [0, learning_rate]");
        }
        if (grad_clip_norm < 0.0) {
            throw ConfigError("student.train.grad_clip_norm must be >= 0");
        }
        distill.validate();
    }

    bool operator==(const StudentTrainConfig&) const = default;
};

inline Json to_json(const TeacherTrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"optimizer", c.optimizer},
            {"learning_rate", c.learning_rate},
            {"min_learning_rate", c.min_learning_rate},
            {"schedule", to_string(c.schedule)},
            {"seed", c.seed},
            {"grad_clip_norm", c.grad_clip_norm}};
}

inline TeacherTrainConfig teacher_train_config_from_json(const Json& j, const std::string& where = "teacher.train") {
    ObjectReader r(j, where);
    TeacherTrainConfig c;
    c.epochs = r.get<int>("epochs", c.epochs);
    c.batch_size = r.get<std::size_t>("batch_size", c.batch_size);
    c.optimizer = r.get<std::string>("optimizer", c.optimizer);
    c.learning_rate = r.get<double>("learning_rate", c.learning_rate);
    c.min_learning_rate = r.get<double>("min_learning_rate", c.min_learning_rate);
    c.schedule = parse_schedule(r.get<std::string>("schedule", to_string(c.schedule)));
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    c.grad_clip_norm = r.get<double>("grad_clip_norm", c.grad_clip_norm);
    r.finish();
    c.validate();
    return c;
}

inline Json to_json(const DistillParams& p) {
    return {{"alpha", p.alpha},
            {"tau", p.tau},
            {"kl_direction", to_string(p.direction)},
            {"tau_squared_scaling", p.tau_squared_scaling}};
}

inline DistillParams distill_params_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    DistillParams p;
    p.alpha = r.get<double>("alpha", p.alpha);
    p.tau = r.get<double>("tau", p.tau);
    p.direction = parse_kl_direction(r.get<std::string>("kl_direction", to_string(p.direction)));
    p.tau_squared_scaling = r.get<bool>("tau_squared_scaling", p.tau_squared_scaling);
    r.finish();
    p.validate();
    return p;
}

inline Json to_json(const StudentTrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"optimizer", c.optimizer},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"schedule", to_string(c.schedule)},
            {"min_learning_rate", c.min_learning_rate},
            {"distill", to_json(c.distill)},
            {"stage", to_string(c.stage)},
            {"seed", c.seed},
            {"grad_clip_norm", c.grad_clip_norm},
            {"cache_teacher_logits", c.cache_teacher_logits}};
}

inline StudentTrainConfig student_train_config_from_json(const Json& j, const std::string& where = "student.train") {
    ObjectReader r(j, where);
    StudentTrainConfig c;
    c.epochs = r.get<int>("epochs", c.epochs);
    c.batch_size = r.get<std::size_t>("batch_size", c.batch_size);
    c.optimizer = r.get<std::string>("optimizer", c.optimizer);
    c.learning_rate = r.get<double>("learning_rate", c.learning_rate);
    c.momentum = r.get<double>("momentum", c.momentum);
    c.weight_decay = r.get<double>("weight_decay", c.weight_decay);
    c.schedule = parse_schedule(r.get<std::string>("schedule", to_string(c.schedule)));
    c.min_learning_rate = r.get<double>("min_learning_rate", c.min_learning_rate);
    c.distill = distill_params_from_json(r.child("distill"), r.path("distill"));
    c.stage = parse_stage(r.get<std::string>("stage", to_string(c.stage)));
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    c.grad_clip_norm = r.get<double>("grad_clip_norm", c.grad_clip_norm);
    c.cache_teacher_logits = r.get<bool>("cache_teacher_logits", c.cache_teacher_logits);
    r.finish();
    c.validate();
    return c;
}

}  // namespace vidkd
