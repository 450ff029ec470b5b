#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidkd/dataset/batches.hpp"
#include "vidkd/evaluation/evaluate.hpp"
#include "vidkd/losses.hpp"
#include "vidkd/models/jointnet.hpp"
#include "vidkd/nn/optim.hpp"
#include "vidkd/training/checkpoint.hpp"
#include "vidkd/training/config.hpp"
#include "vidkd/training/schedule.hpp"

namespace vidkd {

struct StepLoss {
    double total = 0.0;
    double cross_entropy = 0.0;
    double kl = 0.0;
};

/// Loss for one batch given the model's clip logits. `augmented` is true when the batch frames
/// came from a random crop (so per-clip results must not be memoized).
using BatchLossFn = std::function<StepLoss(const ClipBatch& batch, const std::vector<std::size_t>& record_indices,
                                           const Tensor& logits, bool augmented, RowMatrixXd* grad)>;

struct LoopSettings {
    std::string role;
    int epochs = 1;
    std::size_t batch_size = 1;
    Schedule schedule = Schedule::constant;
    double learning_rate = 1e-4;
    double min_learning_rate = 0.0;
    double grad_clip_norm = 0.0;
    std::uint64_t seed = 0;
    Json config = Json::object();
};

struct RunOptions {
    /// Continue a run from its last checkpoint; history, optimizer state and best-so-far are restored.
    const TrainingCheckpoint* resume = nullptr;
    /// Stop once this many epochs are complete (the schedule still spans the configured total).
    std::optional<int> stop_after_epoch;
    std::function<void(const EpochRecord&)> on_epoch;
    EvalOptions eval;
};

struct TrainResult {
    TrainingCheckpoint last;
    std::optional<TrainingCheckpoint> best;  // set when this session produced a new best epoch
    RunHistory history;
};

/// Marks every parameter of the model as non-trainable and clears leftover gradients.
inline void freeze_model(Model& model) {
    for (const auto& p : model.parameters()) {
        p.param->trainable = false;
        p.param->grad.fill(0.0f);
    }
}

inline bool fully_frozen(Model& model) {
    for (const auto& p : model.parameters()) {
        if (p.param->needs_grad()) {
            return false;
        }
    }
    return true;
}

namespace detail {

inline bool improves(const BestEpoch& best, double val_accuracy, double val_loss) {
    if (best.epoch == 0) {
        return true;
    }
    if (val_accuracy != best.val_accuracy) {
        return val_accuracy > best.val_accuracy;
    }
    return val_loss < best.val_loss;
}

inline bool finite(const StepLoss& l) {
    return std::isfinite(l.total) && std::isfinite(l.cross_entropy) && std::isfinite(l.kl);
}

}  // namespace detail

/// Generic epoch loop shared by teacher training and distillation.
inline TrainResult run_training(Model& model, ClipDataset& data, const LoopSettings& settings, nn::Optimizer& optimizer,
                                const BatchLossFn& loss_fn, const RunOptions& options = {}) {
    if (optimizer.parameter_count() == 0) {
        throw ConfigError(settings.role + " has no trainable parameters");
    }
    if (data.manifest().count(Split::train) == 0 || data.manifest().count(Split::val) == 0) {
        throw ConfigError("training needs non-empty train and val splits");
    }
    const std::uint64_t frozen_before = parameter_checksum(model, true);

    TrainResult result;
    BestEpoch best;
    int start_epoch = 0;
    if (options.resume != nullptr) {
        const auto& ck = *options.resume;
        if (ck.role != settings.role) {
            throw ConfigError("cannot resume a " + settings.role + " run from a " + ck.role + " checkpoint");
        }
        if (ck.seed != settings.seed) {
            throw ConfigError("resume checkpoint seed " + std::to_string(ck.seed) + " differs from configured seed " +
                              std::to_string(settings.seed));
        }
        if (ck.epoch > settings.epochs) {
            throw ConfigError("checkpoint is at epoch " + std::to_string(ck.epoch) + " beyond the configured " +
                              std::to_string(settings.epochs));
        }
        import_state(model, ck.model_state);
        optimizer.load_state(ck.optimizer);
        result.history = ck.history;
        best = ck.best;
        start_epoch = ck.epoch;
    }
    const int stop = std::min(settings.epochs, options.stop_after_epoch.value_or(settings.epochs));
    const bool augmented = data.sampling().crop_strategy == CropStrategy::random_scale_center;

    auto make_checkpoint = [&](int epoch) {
        TrainingCheckpoint c = snapshot(model, settings.role);
        c.optimizer = optimizer.state();
        c.config = settings.config;
        c.epoch = epoch;
        c.seed = settings.seed;
        c.history = result.history;
        c.best = best;
        return c;
    };

    for (int epoch = start_epoch + 1; epoch <= stop; ++epoch) {
        const double lr =
            scheduled_lr(settings.schedule, epoch - 1, settings.epochs, settings.learning_rate, settings.min_learning_rate);
        Rng dropout_rng(derive_seed(settings.seed, "dropout", epoch));
        const nn::ForwardContext train_ctx{true, &dropout_rng};
        const auto plan =
            plan_batches(data.manifest(), Split::train, settings.batch_size, derive_seed(settings.seed, "order", epoch));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = lr;
        std::size_t seen = 0;
        int step = 0;
        for (const auto& indices : plan) {
            ++step;
            const ClipBatch batch = data.batch(indices, epoch);
            const Tensor logits = model.forward(batch, train_ctx);
            RowMatrixXd grad;
            StepLoss loss;
            try {
                loss = loss_fn(batch, indices, logits, augmented, &grad);
            } catch (const DomainError& e) {
                throw DivergenceError(settings.role + " diverged at epoch " + std::to_string(epoch) + ", step " +
                                          std::to_string(step) + ": " + e.what(),
                                      epoch, step);
            }
            if (!detail::finite(loss) || !grad.allFinite()) {
                throw DivergenceError(settings.role + " diverged at epoch " + std::to_string(epoch) + ", step " +
                                          std::to_string(step) + ": non-finite loss",
                                      epoch, step);
            }
            optimizer.zero_grad();
            model.backward(from_double(grad));
            if (settings.grad_clip_norm > 0.0) {
                optimizer.clip_grad_norm(settings.grad_clip_norm);
            }
            optimizer.step(lr);
            const auto n = static_cast<double>(batch.clip_count());
            rec.train_loss += loss.total * n;
            rec.ce_part += loss.cross_entropy * n;
            rec.kl_part += loss.kl * n;
            seen += batch.clip_count();
        }
        rec.train_loss /= static_cast<double>(seen);
        rec.ce_part /= static_cast<double>(seen);
        rec.kl_part /= static_cast<double>(seen);

        double val_loss = 0.0;
        std::size_t val_seen = 0;
        for (const auto& indices : plan_batches(data.manifest(), Split::val, options.eval.batch_size, 0)) {
            const ClipBatch batch = data.batch(indices);
            const Tensor logits = model.forward(batch, {});
            const StepLoss loss = loss_fn(batch, indices, logits, false, nullptr);
            val_loss += loss.total * static_cast<double>(batch.clip_count());
            val_seen += batch.clip_count();
        }
        rec.val_loss = val_loss / static_cast<double>(val_seen);
        rec.val_accuracy = evaluate_model(model, data, Split::val, options.eval).video_top1;
        rec.train_accuracy = evaluate_model(model, data, Split::train, options.eval).video_top1;
        if (!std::isfinite(rec.val_loss)) {
            throw DivergenceError(settings.role + " produced a non-finite validation loss at epoch " +
                                      std::to_string(epoch),
                                  epoch, step);
        }
        result.history.records.push_back(rec);
        if (detail::improves(best, rec.val_accuracy, rec.val_loss)) {
            best = {epoch, rec.val_accuracy, rec.val_loss};
            result.best = make_checkpoint(epoch);
        }
        if (options.on_epoch) {
            options.on_epoch(rec);
        }
    }

    if (parameter_checksum(model, true) != frozen_before) {
        throw Error(settings.role + " training modified frozen parameters");
    }
    result.last = make_checkpoint(std::max(start_epoch, stop));
    return result;
}

/// Fine-tunes the trainable part of a teacher (adapter + head) with cross entropy.
inline TrainResult train_teacher(Model& teacher, ClipDataset& data, const TeacherTrainConfig& config,
                                 const RunOptions& options = {}) {
    config.validate();
    if (count_parameters(teacher, true) == 0) {
        throw ConfigError("teacher has no trainable parameters");
    }
    if (teacher.output_dim() != data.num_classes()) {
        throw ShapeError("teacher emits " + std::to_string(teacher.output_dim()) + " classes but the dataset has " +
                         std::to_string(data.num_classes()));
    }
    nn::Adam optimizer(teacher.parameters());
    LoopSettings s;
    s.role = "teacher";
    s.epochs = config.epochs;
    s.batch_size = config.batch_size;
    s.schedule = config.schedule;
    s.learning_rate = config.learning_rate;
    s.min_learning_rate = config.min_learning_rate;
    s.grad_clip_norm = config.grad_clip_norm;
    s.seed = config.seed;
    s.config = to_json(config);
    const BatchLossFn loss = [](const ClipBatch& batch, const std::vector<std::size_t>&, const Tensor& logits, bool,
                                RowMatrixXd* grad) {
        StepLoss l;
        l.cross_entropy = cross_entropy(to_double(logits), batch.labels, grad);
        l.total = l.cross_entropy;
        return l;
    };
    return run_training(teacher, data, s, optimizer, loss, options);
}

/// The network whose outputs serve as soft targets for a given stage: the teacher itself for late
/// distillation, its backbone for early distillation.
inline Model& distillation_source(Model& teacher, DistillStage stage) {
    if (stage == DistillStage::late) {
        return teacher;
    }
    if (auto* joint = dynamic_cast<Jointnet*>(&teacher)) {
        return joint->backbone();
    }
    if (teacher.type() == "backbone") {
        return teacher;
    }
    throw ConfigError("early distillation needs a jointnet or backbone teacher");
}

/// Student spec with its classifier sized for the chosen stage.
inline StudentSpec student_spec_for_stage(StudentSpec spec, Model& teacher, DistillStage stage) {
    spec.num_classes = distillation_source(teacher, stage).output_dim();
    return spec;
}

/// Trains a student against a frozen teacher. Both see the same sampled frames every step.
inline TrainResult distill_student(Model& student, Model& teacher, ClipDataset& data, const StudentTrainConfig& config,
                                   const RunOptions& options = {}) {
    config.validate();
    if (!fully_frozen(teacher)) {
        throw ConfigError("teacher must be frozen before distillation");
    }
    Model& source = distillation_source(teacher, config.stage);
    const std::size_t m = data.num_classes();
    if (config.stage == DistillStage::late) {
        if (teacher.output_dim() != m || student.output_dim() != m) {
            throw ShapeError("class count mismatch: teacher " + std::to_string(teacher.output_dim()) + ", student " +
                             std::to_string(student.output_dim()) + ", dataset " + std::to_string(m));
        }
    } else if (student.output_dim() != source.output_dim()) {
        throw ShapeError("early distillation needs a student head of " + std::to_string(source.output_dim()) +
                         " outputs, got " + std::to_string(student.output_dim()));
    }
    DistillParams params = config.distill;
    if (config.stage == DistillStage::early) {
        params.alpha = 0.0;
    }
    const std::uint64_t teacher_before = parameter_checksum(teacher);

    nn::MomentumSgd optimizer(student.parameters(), config.momentum, config.weight_decay);
    LoopSettings s;
    s.role = "student";
    s.epochs = config.epochs;
    s.batch_size = config.batch_size;
    s.schedule = config.schedule;
    s.learning_rate = config.learning_rate;
    s.min_learning_rate = config.min_learning_rate;
    s.grad_clip_norm = config.grad_clip_norm;
    s.seed = config.seed;
    s.config = to_json(config);

    std::map<std::string, std::vector<float>> cache;
    auto teacher_logits = [&](const ClipBatch& batch, bool augmented) {
        const bool use_cache = config.cache_teacher_logits && !augmented;
        if (use_cache) {
            bool all = true;
            for (const auto& id : batch.clip_ids) {
                all = all && cache.count(id) > 0;
            }
            if (all) {
                RowMatrixXd out(static_cast<Eigen::Index>(batch.clip_count()),
                                static_cast<Eigen::Index>(source.output_dim()));
                for (std::size_t b = 0; b < batch.clip_count(); ++b) {
                    const auto& row = cache.at(batch.clip_ids[b]);
                    for (std::size_t c = 0; c < row.size(); ++c) {
                        out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = row[c];
                    }
                }
                return out;
            }
        }
        const Tensor t = source.forward(batch, {});
        if (use_cache) {
            for (std::size_t b = 0; b < batch.clip_count(); ++b) {
                cache[batch.clip_ids[b]].assign(t.data() + b * t.dim(1), t.data() + (b + 1) * t.dim(1));
            }
        }
        return to_double(t);
    };

    const bool early = config.stage == DistillStage::early;
    const BatchLossFn loss = [&](const ClipBatch& batch, const std::vector<std::size_t>&, const Tensor& logits,
                                 bool augmented, RowMatrixXd* grad) {
        const RowMatrixXd t = teacher_logits(batch, augmented);
        const std::span<const int> targets = early ? std::span<const int>() : std::span<const int>(batch.labels);
        const DistillLoss d = distillation_loss(to_double(logits), t, targets, params, grad);
        return StepLoss{d.total, d.cross_entropy, d.kl};
    };
    TrainResult result = run_training(student, data, s, optimizer, loss, options);
    if (parameter_checksum(teacher) != teacher_before) {
        throw Error("distillation modified the teacher");
    }
    return result;
}

}  // namespace vidkd
