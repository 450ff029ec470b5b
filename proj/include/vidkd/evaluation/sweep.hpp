#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vidkd/evaluation/evaluate.hpp"
#include "vidkd/experiment.hpp"
#include "vidkd/models/backbone.hpp"
#include "vidkd/models/jointnet.hpp"
#include "vidkd/models/student.hpp"
#include "vidkd/training/trainer.hpp"

namespace vidkd {

enum class SweepAxis { alpha, backbone, stage };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::alpha: return "alpha";
        case SweepAxis::backbone: return "backbone";
        case SweepAxis::stage: return "stage";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "alpha") {
        return SweepAxis::alpha;
    }
    if (text == "backbone") {
        return SweepAxis::backbone;
    }
    if (text == "stage") {
        return SweepAxis::stage;
    }
    throw ConfigError("unknown sweep axis '" + text + "' (expected alpha, backbone or stage)");
}

struct SweepRow {
    std::string setting;
    double mean_accuracy = 0.0;
    double teacher_accuracy = 0.0;
    std::vector<double> accuracies;
    std::vector<std::uint64_t> seeds;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::alpha;
    std::vector<SweepRow> rows;
};

struct SweepHooks {
    std::function<void(const std::string&)> log;
    /// Called after every student run with its setting, seed and training result.
    std::function<void(const std::string&, std::uint64_t, const TrainResult&)> on_run;
    std::function<void(const std::string&, const TrainResult&)> on_teacher;
};

/// Applies one sweep setting to a copy of the base config.
/// Backbone settings are either "<kind>:<identifier>" or a bare identifier keeping the base kind.
inline ExperimentConfig apply_sweep_setting(const ExperimentConfig& base, SweepAxis axis, const std::string& setting) {
    ExperimentConfig c = base;
    switch (axis) {
        case SweepAxis::alpha: {
            std::size_t used = 0;
            double alpha = 0.0;
            try {
                alpha = std::stod(setting, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != setting.size() || setting.empty()) {
                throw ConfigError("alpha setting '" + setting + "' is not a number");
            }
            c.student.train.distill.alpha = alpha;
            break;
        }
        case SweepAxis::backbone: {
            const auto colon = setting.find(':');
            if (colon != std::string::npos) {
                c.teacher.backbone.kind = parse_backbone_kind(setting.substr(0, colon));
                c.teacher.backbone.identifier = setting.substr(colon + 1);
            } else {
                c.teacher.backbone.identifier = setting;
            }
            break;
        }
        case SweepAxis::stage:
            c.student.train.stage = parse_stage(setting);
            break;
    }
    c.validate();
    return c;
}

namespace detail {

template <typename E>
[[noreturn]] void rethrow_with(const E& e, const std::string& context) {
    throw E(context + ": " + e.what());
}

/// Re-raises a pipeline error with the (setting, seed) context while keeping its category.
template <typename F>
auto with_context(const std::string& context, F&& body) {
    try {
        return body();
    } catch (const DivergenceError& e) {
        throw DivergenceError(context + ": " + e.what(), e.epoch(), e.step());
    } catch (const IoError& e) {
        rethrow_with(e, context);
    } catch (const FormatError& e) {
        rethrow_with(e, context);
    } catch (const ShapeError& e) {
        rethrow_with(e, context);
    } catch (const ConfigError& e) {
        rethrow_with(e, context);
    } catch (const DomainError& e) {
        rethrow_with(e, context);
    } catch (const Error& e) {
        rethrow_with(e, context);
    }
}

inline RunOptions options_for(const ExperimentConfig& c) {
    RunOptions o;
    o.eval.batch_size = c.eval.batch_size;
    return o;
}

}  // namespace detail

/// Builds a jointnet from the config and fine-tunes it; returns it frozen, holding its best-val weights.
inline std::unique_ptr<Model> train_frozen_teacher(const ExperimentConfig& c, ClipDataset& data, TrainResult* out = nullptr,
                                                   const RunOptions& options = {}) {
    auto teacher = build_jointnet(build_backbone(c.teacher.backbone), c.teacher.adapter, c.teacher.frontnet,
                                  c.teacher.init_seed);
    TrainResult r = train_teacher(*teacher, data, c.teacher.train, options);
    import_state(*teacher, r.best ? r.best->model_state : r.last.model_state);
    freeze_model(*teacher);
    if (out != nullptr) {
        *out = std::move(r);
    }
    return teacher;
}

/// One distill-then-evaluate run; returns the student's video-level val accuracy after the final epoch.
inline double distill_and_evaluate(const ExperimentConfig& c, Model& teacher, ClipDataset& data, std::uint64_t seed,
                                   TrainResult* out = nullptr) {
    StudentSpec spec = student_spec_for_stage(c.student.model, teacher, c.student.train.stage);
    spec.seed = seed;
    StudentTrainConfig train = c.student.train;
    train.seed = seed;
    auto student = build_student(spec);
    TrainResult r = distill_student(*student, teacher, data, train, detail::options_for(c));
    const double acc = evaluate_model(*student, data, Split::val, {c.eval.batch_size}).video_top1;
    if (out != nullptr) {
        *out = std::move(r);
    }
    return acc;
}

/// Runs every setting `seeds.size()` times. A teacher is trained once per distinct teacher
/// configuration and shared by all runs that use it.
inline SweepResult run_sweep(SweepAxis axis, const std::vector<std::string>& settings, const ExperimentConfig& base,
                             ClipDataset& data, const std::vector<std::uint64_t>& seeds, const SweepHooks& hooks = {}) {
    if (settings.empty()) {
        throw ConfigError("sweep needs at least one setting");
    }
    if (seeds.empty()) {
        throw ConfigError("sweep needs at least one seed");
    }
    SweepResult result;
    result.axis = axis;
    std::map<std::string, std::pair<std::unique_ptr<Model>, double>> teachers;
    for (const auto& setting : settings) {
        const ExperimentConfig c = apply_sweep_setting(base, axis, setting);
        const Json tj = to_json(c)["teacher"];
        const std::string key = tj.dump();
        if (!teachers.count(key)) {
            if (hooks.log) {
                hooks.log("training teacher for " + std::string(to_string(axis)) + "=" + setting);
            }
            TrainResult tr;
            auto teacher = detail::with_context(std::string(to_string(axis)) + "=" + setting + " teacher",
                                                [&] { return train_frozen_teacher(c, data, &tr, detail::options_for(c)); });
            const double tacc = evaluate_model(*teacher, data, Split::val, {c.eval.batch_size}).video_top1;
            if (hooks.on_teacher) {
                hooks.on_teacher(setting, tr);
            }
            teachers.emplace(key, std::make_pair(std::move(teacher), tacc));
        }
        auto& [teacher, teacher_acc] = teachers.at(key);
        SweepRow row;
        row.setting = setting;
        row.teacher_accuracy = teacher_acc;
        for (const auto seed : seeds) {
            if (hooks.log) {
                hooks.log(std::string(to_string(axis)) + "=" + setting + " seed " + std::to_string(seed));
            }
            TrainResult sr;
            const double acc = detail::with_context(
                std::string(to_string(axis)) + "=" + setting + " seed " + std::to_string(seed),
                [&] { return distill_and_evaluate(c, *teacher, data, seed, &sr); });
            if (hooks.on_run) {
                hooks.on_run(setting, seed, sr);
            }
            row.accuracies.push_back(acc);
            row.seeds.push_back(seed);
        }
        row.mean_accuracy =
            std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) / static_cast<double>(row.accuracies.size());
        result.rows.push_back(std::move(row));
    }
    return result;
}

inline std::string format_sweep_report(const SweepResult& r) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "axis\t" << to_string(r.axis) << '\n';
    out << "runs\t" << (r.rows.empty() ? 0 : r.rows.front().accuracies.size()) << '\n';
    out << "setting\tmean_video_top1\tteacher_video_top1\tseeds\tvideo_top1\n";
    for (const auto& row : r.rows) {
        out << row.setting << '\t' << num(row.mean_accuracy) << '\t' << num(row.teacher_accuracy) << '\t';
        for (std::size_t i = 0; i < row.seeds.size(); ++i) {
            out << (i ? "," : "") << row.seeds[i];
        }
        out << '\t';
        for (std::size_t i = 0; i < row.accuracies.size(); ++i) {
            out << (i ? "," : "") << num(row.accuracies[i]);
        }
        out << '\n';
    }
    return out.str();
}

inline OrderedJson to_json(const SweepResult& r) {
    OrderedJson j;
    j["axis"] = to_string(r.axis);
    j["rows"] = OrderedJson::array();
    for (const auto& row : r.rows) {
        OrderedJson o;
        o["setting"] = row.setting;
        o["mean_video_top1"] = row.mean_accuracy;
        o["teacher_video_top1"] = row.teacher_accuracy;
        o["seeds"] = row.seeds;
        o["video_top1"] = row.accuracies;
        j["rows"].push_back(o);
    }
    return j;
}

/// Parses the text report back into a result (used to diff against recorded reference runs).
inline SweepResult parse_sweep_report(std::istream& in) {
    SweepResult r;
    std::string line;
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string p;
        while (std::getline(ss, p, sep)) {
            parts.push_back(p);
        }
        return parts;
    };
    if (!std::getline(in, line) || line.rfind("axis\t", 0) != 0) {
        throw FormatError("sweep report: missing axis line");
    }
    r.axis = parse_sweep_axis(line.substr(5));
    if (!std::getline(in, line) || line.rfind("runs\t", 0) != 0) {
        throw FormatError("sweep report: missing runs line");
    }
    if (!std::getline(in, line) || line.rfind("setting\t", 0) != 0) {
        throw FormatError("sweep report: missing table header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line, '\t');
        if (cells.size() != 5) {
            throw FormatError("sweep report: malformed row '" + line + "'");
        }
        SweepRow row;
        try {
            row.setting = cells[0];
            row.mean_accuracy = std::stod(cells[1]);
            row.teacher_accuracy = std::stod(cells[2]);
            for (const auto& s : split(cells[3], ',')) {
                row.seeds.push_back(std::stoull(s));
            }
            for (const auto& a : split(cells[4], ',')) {
                row.accuracies.push_back(std::stod(a));
            }
        } catch (const std::exception&) {
            throw FormatError("sweep report: non-numeric entry in row '" + line + "'");
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

inline void write_sweep_report(const std::filesystem::path& path, const SweepResult& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write sweep report '" + path.string() + "'");
    }
    out << format_sweep_report(r);
    if (!out) {
        throw IoError("failed writing sweep report '" + path.string() + "'");
    }
}

}  // namespace vidkd
