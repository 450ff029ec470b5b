#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "vidkd/error.hpp"

namespace vidkd {

enum class Schedule { cosine_annealing, constant };

inline const char* to_string(Schedule s) { return s == Schedule::cosine_annealing ? "cosine-annealing" : "constant"; }

inline Schedule parse_schedule(const std::string& text) {
    if (text == "cosine-annealing") {
        return Schedule::cosine_annealing;
    }
    if (text == "constant") {
        return Schedule::constant;
    }
    throw ConfigError("unknown schedule '" + text + "'");
}

/// Single-descent cosine annealing: min + (base - min) * (1 + cos(pi * epoch / total)) / 2.
inline double cosine_annealing_lr(int epoch, int total_epochs, double base_lr, double min_lr) {
    if (total_epochs < 1 || epoch < 0 || epoch > total_epochs) {
        throw DomainError("cosine schedule needs 0 <= epoch <= total_epochs and total_epochs >= 1");
    }
    if (!(min_lr >= 0.0 && base_lr >= min_lr)) {
        throw DomainError("cosine schedule needs base_lr >= min_lr >= 0");
    }
    const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(phase));
}

inline double scheduled_lr(Schedule s, int epoch, int total_epochs, double base_lr, double min_lr) {
    return s == Schedule::constant ? base_lr : cosine_annealing_lr(epoch, total_epochs, base_lr, min_lr);
}

}  // namespace vidkd
