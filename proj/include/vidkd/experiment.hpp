#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vidkd/dataset/sampling.hpp"
#include "vidkd/json_util.hpp"
#include "vidkd/models/specs.hpp"
#include "vidkd/random.hpp"
#include "vidkd/training/config.hpp"

namespace vidkd {

inline const std::vector<std::uint64_t>& default_sweep_seeds() {
    static const std::vector<std::uint64_t> seeds{11, 23, 37, 53, 71};
    return seeds;
}

struct DatasetSection {
    std::string manifest = "data/manifest.jsonl";
    SamplingConfig sampling;
};

struct TeacherSection {
    BackboneSpec backbone;
    AdapterSpec adapter;
    FrontNetSpec frontnet;
    std::uint64_t init_seed = 0;
    TeacherTrainConfig train;
};

struct StudentSection {
    StudentSpec model;
    StudentTrainConfig train;
};

struct EvalSection {
    int run_count = 5;
    std::vector<std::uint64_t> seeds = default_sweep_seeds();
    std::size_t batch_size = 64;
};

/// Whole pipeline configuration: one document, every field optional, unknown keys rejected.
struct ExperimentConfig {
    DatasetSection dataset;
    TeacherSection teacher;
    StudentSection student;
    EvalSection eval;
    std::string output_dir = "runs";

    void validate() const {
        dataset.sampling.validate();
        teacher.backbone.validate();
        teacher.adapter.validate(teacher.backbone.output_dim);
        teacher.frontnet.validate();
        teacher.train.validate();
        student.model.validate();
        student.train.validate();
        if (eval.run_count < 1) {
            throw ConfigError("eval.run_count must be >= 1");
        }
        if (eval.seeds.size() != static_cast<std::size_t>(eval.run_count)) {
            throw ConfigError("eval.seeds must list exactly eval.run_count seeds");
        }
        if (eval.batch_size == 0) {
            throw ConfigError("eval.batch_size must be positive");
        }
        if (teacher.frontnet.num_classes != student.model.num_classes) {
            throw ConfigError("teacher.frontnet.num_classes and student.model.num_classes disagree");
        }
    }
};

inline Json to_json(const SamplingConfig& s) {
    return {{"num_frames", s.num_frames},
            {"crop_size", s.crop_size},
            {"crop_strategy", to_string(s.crop_strategy)},
            {"seed", s.seed},
            {"min_crop_scale", s.min_crop_scale},
            {"mean", s.mean},
            {"std", s.stddev}};
}

inline SamplingConfig sampling_config_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    SamplingConfig s;
    s.num_frames = r.get<int>("num_frames", s.num_frames);
    s.crop_size = r.get<int>("crop_size", s.crop_size);
    s.crop_strategy = parse_crop_strategy(r.get<std::string>("crop_strategy", to_string(s.crop_strategy)));
    s.seed = r.get<std::uint64_t>("seed", s.seed);
    s.min_crop_scale = r.get<double>("min_crop_scale", s.min_crop_scale);
    s.mean = r.get<std::array<float, 3>>("mean", s.mean);
    s.stddev = r.get<std::array<float, 3>>("std", s.stddev);
    r.finish();
    s.validate();
    return s;
}

inline Json to_json(const ExperimentConfig& c) {
    return {{"dataset", {{"manifest", c.dataset.manifest}, {"sampling", to_json(c.dataset.sampling)}}},
            {"teacher",
             {{"backbone", to_json(c.teacher.backbone)},
              {"adapter", to_json(c.teacher.adapter)},
              {"frontnet", to_json(c.teacher.frontnet)},
              {"init_seed", c.teacher.init_seed},
              {"train", to_json(c.teacher.train)}}},
            {"student", {{"model", to_json(c.student.model)}, {"train", to_json(c.student.train)}}},
            {"eval", {{"run_count", c.eval.run_count}, {"seeds", c.eval.seeds}, {"batch_size", c.eval.batch_size}}},
            {"output_dir", c.output_dir}};
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
    ObjectReader top(j, "config");
    ExperimentConfig c;
    {
        ObjectReader r(top.child("dataset"), "dataset");
        c.dataset.manifest = r.get<std::string>("manifest", c.dataset.manifest);
        c.dataset.sampling = sampling_config_from_json(r.child("sampling"), "dataset.sampling");
        r.finish();
    }
    {
        ObjectReader r(top.child("teacher"), "teacher");
        c.teacher.backbone = backbone_spec_from_json(r.child("backbone"), "teacher.backbone");
        c.teacher.adapter = adapter_spec_from_json(r.child("adapter"), "teacher.adapter");
        c.teacher.frontnet = frontnet_spec_from_json(r.child("frontnet"), "teacher.frontnet");
        c.teacher.init_seed = r.get<std::uint64_t>("init_seed", c.teacher.init_seed);
        c.teacher.train = teacher_train_config_from_json(r.child("train"), "teacher.train");
        r.finish();
    }
    {
        ObjectReader r(top.child("student"), "student");
        c.student.model = student_spec_from_json(r.child("model"), "student.model");
        c.student.train = student_train_config_from_json(r.child("train"), "student.train");
        r.finish();
    }
    {
        ObjectReader r(top.child("eval"), "eval");
        c.eval.run_count = r.get<int>("run_count", c.eval.run_count);
        const bool explicit_seeds = r.has("seeds");
        c.eval.seeds = r.get<std::vector<std::uint64_t>>("seeds", c.eval.seeds);
        c.eval.batch_size = r.get<std::size_t>("batch_size", c.eval.batch_size);
        r.finish();
        if (!explicit_seeds && c.eval.run_count >= 1) {
            // Default seeds follow the run count: the fixed list first, then derived extras.
            std::vector<std::uint64_t> seeds;
            for (int i = 0; i < c.eval.run_count; ++i) {
                seeds.push_back(static_cast<std::size_t>(i) < default_sweep_seeds().size()
                                    ? default_sweep_seeds()[static_cast<std::size_t>(i)]
                                    : derive_seed(0, "sweep-seed", i) % 1000000);
            }
            c.eval.seeds = seeds;
        }
    }
    c.output_dir = top.get<std::string>("output_dir", c.output_dir);
    top.finish();
    c.validate();
    return c;
}

/// Parses an override value: JSON literals (numbers, booleans, arrays, quoted strings) are taken
/// as such, anything else is treated as a bare string.
inline Json parse_override_value(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::exception&) {
        return Json(text);
    }
}

/// Replaces one existing leaf addressed by a dotted path (e.g. "student.train.distill.alpha").
inline void set_dotted(Json& doc, const std::string& dotted, const Json& value) {
    if (dotted.empty()) {
        throw ConfigError("empty override path");
    }
    Json* node = &doc;
    std::stringstream ss(dotted);
    std::string part;
    std::string walked;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        parts.push_back(part);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        walked += (walked.empty() ? "" : ".") + parts[i];
        if (!node->is_object() || !node->contains(parts[i])) {
            throw ConfigError("unknown config key '" + walked + "'");
        }
        node = &(*node)[parts[i]];
    }
    if (node->is_object()) {
        throw ConfigError("'" + dotted + "' is a section, not a value");
    }
    *node = value;
}

/// Applies "path=value" overrides to a fully resolved config and re-validates it.
inline ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides) {
    Json doc = to_json(base);
    bool run_count_set = false;
    bool seeds_set = false;
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override '" + item + "' is not of the form path=value");
        }
        const std::string key = item.substr(0, eq);
        set_dotted(doc, key, parse_override_value(item.substr(eq + 1)));
        run_count_set = run_count_set || key == "eval.run_count";
        seeds_set = seeds_set || key == "eval.seeds";
    }
    if (run_count_set && !seeds_set) {
        doc["eval"].erase("seeds");
    }
    return experiment_config_from_json(doc);
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return apply_overrides(experiment_config_from_json(doc), overrides);
}

/// Eight hex digits of FNV-1a over the canonical (sorted-key) serialization.
inline std::string short_hash(const Json& doc) {
    const auto digest = hash_string(doc.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf, 8);
}

/// Run directory names: the teacher depends on dataset + teacher sections, a student run also on
/// its own section, so student-only overrides reuse the same teacher.
inline std::string teacher_run_name(const ExperimentConfig& c) {
    const Json j = to_json(c);
    return "teacher-" + short_hash({{"dataset", j["dataset"]}, {"teacher", j["teacher"]}});
}

inline std::string student_run_name(const ExperimentConfig& c) {
    const Json j = to_json(c);
    return "student-" + short_hash({{"dataset", j["dataset"]}, {"teacher", j["teacher"]}, {"student", j["student"]}});
}

}  // namespace vidkd
