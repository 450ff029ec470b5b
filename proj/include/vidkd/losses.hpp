#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/tensor.hpp"

namespace vidkd {

/// Which softened distribution is the KL reference.
/// teacher_to_student: sum_c t_c log(t_c / s_c) (student matches the teacher).
/// student_to_teacher: sum_c s_c log(s_c / t_c) (the printed form with the prediction as reference).
enum class KlDirection { teacher_to_student, student_to_teacher };

inline const char* to_string(KlDirection d) {
    return d == KlDirection::teacher_to_student ? "teacher-to-student" : "student-to-teacher";
}

inline KlDirection parse_kl_direction(const std::string& text) {
    if (text == "teacher-to-student") {
        return KlDirection::teacher_to_student;
    }
    if (text == "student-to-teacher") {
        return KlDirection::student_to_teacher;
    }
    throw ConfigError("unknown KL direction '" + text + "'");
}

struct DistillParams {
    double alpha = 0.90;
    double tau = 6.0;
    KlDirection direction = KlDirection::teacher_to_student;
    bool tau_squared_scaling = true;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw ConfigError("distill.alpha must lie in [0, 1]");
        }
        if (!(tau > 0.0) || !std::isfinite(tau)) {
            throw ConfigError("distill.tau must be positive");
        }
    }

    bool operator==(const DistillParams&) const = default;
};

/// Probability vector over classes.
struct ClassDistribution {
    Eigen::VectorXd probs;

    std::size_t size() const noexcept { return static_cast<std::size_t>(probs.size()); }
    double operator[](std::size_t i) const { return probs(static_cast<Eigen::Index>(i)); }
};

namespace detail {

inline void require_finite(const RowMatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw DomainError(std::string(what) + " contain non-finite values");
    }
}

inline void require_same_shape(const RowMatrixXd& a, const RowMatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("logit shapes differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

}  // namespace detail

/// Row-wise log softmax of logits / tau, with max subtraction.
inline RowMatrixXd log_softmax_rows(const RowMatrixXd& logits, double tau = 1.0) {
    RowMatrixXd z = logits / tau;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
        z.row(r).array() -= lse;
    }
    return z;
}

inline RowMatrixXd softmax_rows(const RowMatrixXd& logits, double tau = 1.0) {
    return log_softmax_rows(logits, tau).array().exp().matrix();
}

inline ClassDistribution softmax(const Eigen::VectorXd& logits, double tau = 1.0) {
    if (!(tau > 0.0)) {
        throw DomainError("softmax temperature must be positive");
    }
    if (!logits.allFinite()) {
        throw DomainError("logits contain non-finite values");
    }
    if (logits.size() == 0) {
        throw ShapeError("softmax of an empty vector");
    }
    const Eigen::VectorXd z = logits / tau;
    const double mx = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - mx).exp().matrix();
    return {e / e.sum()};
}

/// Mean over the batch of -log softmax(logits)[target], at unit temperature.
/// When `grad` is given it receives d(loss)/d(logits).
inline double cross_entropy(const RowMatrixXd& logits, std::span<const int> targets, RowMatrixXd* grad = nullptr) {
    const auto batch = logits.rows();
    if (static_cast<std::size_t>(batch) != targets.size()) {
        throw ShapeError("cross entropy: " + std::to_string(batch) + " logit rows vs " +
                         std::to_string(targets.size()) + " targets");
    }
    if (batch == 0) {
        throw ShapeError("cross entropy of an empty batch");
    }
    detail::require_finite(logits, "logits");
    const RowMatrixXd logp = log_softmax_rows(logits);
    double total = 0.0;
    for (Eigen::Index r = 0; r < batch; ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= logits.cols()) {
            throw DomainError("target index " + std::to_string(t) + " outside [0, " + std::to_string(logits.cols()) +
                              ")");
        }
        total -= logp(r, t);
    }
    if (grad != nullptr) {
        *grad = logp.array().exp().matrix();
        for (Eigen::Index r = 0; r < batch; ++r) {
            (*grad)(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
        }
        *grad /= static_cast<double>(batch);
    }
    return total / static_cast<double>(batch);
}

/// Batch-mean KL divergence between temperature-softened teacher and student distributions,
/// optionally scaled by tau^2. Only the student receives a gradient.
inline double kl_divergence(const RowMatrixXd& student_logits, const RowMatrixXd& teacher_logits, double tau,
                            KlDirection direction = KlDirection::teacher_to_student, bool tau_squared_scaling = true,
                            RowMatrixXd* student_grad = nullptr) {
    detail::require_same_shape(student_logits, teacher_logits);
    if (!(tau > 0.0)) {
        throw DomainError("temperature must be positive");
    }
    const auto batch = student_logits.rows();
    if (batch == 0) {
        throw ShapeError("KL divergence of an empty batch");
    }
    detail::require_finite(student_logits, "student logits");
    detail::require_finite(teacher_logits, "teacher logits");
    const RowMatrixXd log_s = log_softmax_rows(student_logits, tau);
    const RowMatrixXd log_t = log_softmax_rows(teacher_logits, tau);
    const RowMatrixXd s = log_s.array().exp().matrix();
    const RowMatrixXd t = log_t.array().exp().matrix();
    const double scale = tau_squared_scaling ? tau * tau : 1.0;
    Eigen::VectorXd per_row(batch);
    for (Eigen::Index r = 0; r < batch; ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            if (direction == KlDirection::teacher_to_student) {
                if (t(r, c) > 0.0) {
                    acc += t(r, c) * (log_t(r, c) - log_s(r, c));
                }
            } else if (s(r, c) > 0.0) {
                acc += s(r, c) * (log_s(r, c) - log_t(r, c));
            }
        }
        per_row(r) = acc;
    }
    if (student_grad != nullptr) {
        const double k = scale / (tau * static_cast<double>(batch));
        if (direction == KlDirection::teacher_to_student) {
            *student_grad = k * (s - t);
        } else {
            student_grad->resize(s.rows(), s.cols());
            for (Eigen::Index r = 0; r < batch; ++r) {
                for (Eigen::Index c = 0; c < s.cols(); ++c) {
                    (*student_grad)(r, c) = k * s(r, c) * (log_s(r, c) - log_t(r, c) - per_row(r));
                }
            }
        }
    }
    return scale * per_row.mean();
}

struct DistillLoss {
    double total = 0.0;
    double cross_entropy = 0.0;
    double kl = 0.0;
};

/// alpha * CE(student, targets) + (1 - alpha) * KL(teacher || student at temperature tau).
/// With alpha == 0 the hard targets may be empty (their term is then reported as 0).
inline DistillLoss distillation_loss(const RowMatrixXd& student_logits, const RowMatrixXd& teacher_logits,
                                     std::span<const int> targets, const DistillParams& params,
                                     RowMatrixXd* student_grad = nullptr) {
    params.validate();
    DistillLoss out;
    RowMatrixXd ce_grad;
    RowMatrixXd kl_grad;
    RowMatrixXd* ce_g = student_grad ? &ce_grad : nullptr;
    RowMatrixXd* kl_g = student_grad ? &kl_grad : nullptr;
    const bool need_ce = !(params.alpha == 0.0 && targets.empty());
    if (need_ce) {
        out.cross_entropy = cross_entropy(student_logits, targets, ce_g);
    }
    out.kl = kl_divergence(student_logits, teacher_logits, params.tau, params.direction, params.tau_squared_scaling,
                           kl_g);
    out.total = params.alpha * out.cross_entropy + (1.0 - params.alpha) * out.kl;
    if (student_grad != nullptr) {
        *student_grad = (1.0 - params.alpha) * kl_grad;
        if (need_ce) {
            *student_grad += params.alpha * ce_grad;
        }
    }
    return out;
}

}  // namespace vidkd
