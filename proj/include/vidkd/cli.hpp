#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vidkd/dataset/fixture.hpp"
#include "vidkd/dataset/scan.hpp"
#include "vidkd/evaluation/curves.hpp"
#include "vidkd/evaluation/sweep.hpp"
#include "vidkd/experiment.hpp"
#include "vidkd/training/trainer.hpp"

namespace vidkd::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kIoFailure = 1, kUsage = 2, kNumerical = 3 };

class Session {
public:
    Session(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    std::ostream& out() { return out_; }
    std::ostream& err() { return err_; }

    void set_workdir(const std::string& dir) { workdir_ = dir; }

    fs::path resolve(const fs::path& p) const {
        if (p.empty() || p.is_absolute() || workdir_.empty()) {
            return p;
        }
        return fs::path(workdir_) / p;
    }

private:
    std::ostream& out_;
    std::ostream& err_;
    std::string workdir_;
};

namespace detail {

inline std::string num(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

/// Timestamps live only here so every other output stays reproducible.
inline void log_line(const fs::path& run_dir, const std::string& message) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ofstream log(run_dir / "run.log", std::ios::app);
    log << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << message << '\n';
}

inline std::string format_report(const EvalReport& r, const std::string& split) {
    std::ostringstream o;
    o << "split       " << split << '\n';
    o << "clips       " << r.clip_count << '\n';
    o << "frames      " << r.frame_count << '\n';
    o << "frame_top1  " << num(r.frame_top1) << '\n';
    o << "video_top1  " << num(r.video_top1) << '\n';
    std::size_t w = 8;
    for (const auto& n : r.class_names) {
        w = std::max(w, n.size() + 2);
    }
    o << "\nper-class video_top1\n";
    for (std::size_t c = 0; c < r.class_names.size(); ++c) {
        o << "  " << std::left << std::setw(static_cast<int>(w)) << r.class_names[c]
          << (r.per_class[c] ? num(*r.per_class[c]) : std::string("n/a")) << '\n';
    }
    o << "\nconfusion (rows: true, columns: predicted)\n  " << std::setw(static_cast<int>(w)) << "";
    for (const auto& n : r.class_names) {
        o << std::right << std::setw(static_cast<int>(w)) << n;
    }
    o << '\n';
    for (std::size_t i = 0; i < r.class_names.size(); ++i) {
        o << "  " << std::left << std::setw(static_cast<int>(w)) << r.class_names[i];
        for (std::size_t j = 0; j < r.class_names.size(); ++j) {
            o << std::right << std::setw(static_cast<int>(w)) << r.confusion[i][j];
        }
        o << '\n';
    }
    return o.str();
}

inline void print_epoch(std::ostream& out, const std::string& role, int total, const EpochRecord& r) {
    out << role << " epoch " << r.epoch << "/" << total << "  loss " << num(r.train_loss) << "  train_acc "
        << num(r.train_accuracy) << "  val_loss " << num(r.val_loss) << "  val_acc " << num(r.val_accuracy)
        << "  lr " << num(r.learning_rate, "%.3g") << '\n';
}

template <typename T>
std::string json_text(const T& v) {
    return Json(v).dump();
}

}  // namespace detail

struct ConfigArgs {
    std::string config;
    std::vector<std::string> sets;
};

inline void add_config_args(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.config, "Experiment config (JSON); built-in defaults when omitted");
    cmd->add_option("--set", args.sets, "Override one config leaf, e.g. student.train.distill.alpha=0.95 (repeatable)")
        ->take_all();
}

inline ExperimentConfig load_config(const Session& s, const ConfigArgs& args, const std::vector<std::string>& extra) {
    std::vector<std::string> sets = args.sets;
    sets.insert(sets.end(), extra.begin(), extra.end());
    if (args.config.empty()) {
        return apply_overrides(ExperimentConfig{}, sets);
    }
    return load_experiment_config(s.resolve(args.config), sets);
}

/// Backbone spec with a workdir-relative feature archive resolved.
inline BackboneSpec resolved_backbone(const Session& s, BackboneSpec spec) {
    if (spec.kind == BackboneKind::pretrained_temporal) {
        spec.identifier = s.resolve(spec.identifier).string();
    }
    return spec;
}

inline ClipDataset open_dataset(const Session& s, const ExperimentConfig& c) {
    return ClipDataset(load_manifest(s.resolve(c.dataset.manifest)), c.dataset.sampling);
}

inline void check_classes(const ExperimentConfig& c, const ClipDataset& data) {
    if (c.teacher.frontnet.num_classes != data.num_classes()) {
        throw ConfigError("config declares " + std::to_string(c.teacher.frontnet.num_classes) +
                          " classes but the manifest has " + std::to_string(data.num_classes()) +
                          " (set teacher.frontnet.num_classes and student.model.num_classes)");
    }
}

/// Writes checkpoints, history, figure and summaries for one finished training run.
inline void write_run_outputs(Session& s, const fs::path& run_dir, const std::string& role, TrainResult& r,
                              const ExperimentConfig& c, Model& model, ClipDataset& data, const Json& extra) {
    r.last.config["sampling"] = to_json(c.dataset.sampling);
    save_checkpoint(r.last, run_dir / "last.ckpt");
    if (r.best) {
        r.best->config["sampling"] = to_json(c.dataset.sampling);
        save_checkpoint(*r.best, run_dir / "best.ckpt");
    }
    export_curves(r.last.history, run_dir / "history");

    const TrainingCheckpoint best = load_checkpoint(run_dir / "best.ckpt");
    import_state(model, best.model_state);
    const EvalReport report = evaluate_model(model, data, Split::val, {c.eval.batch_size});
    const auto& h = r.last.history;

    OrderedJson summary;
    summary["role"] = role;
    summary["run"] = run_dir.filename().string();
    summary["epochs_completed"] = r.last.epoch;
    summary["best_epoch"] = best.best.epoch;
    summary["best_val_video_top1"] = best.best.val_accuracy;
    summary["final_train_video_top1"] = h.empty() ? 0.0 : h.back().train_accuracy;
    summary["final_val_video_top1"] = h.empty() ? 0.0 : h.back().val_accuracy;
    summary["final_train_loss"] = h.empty() ? 0.0 : h.back().train_loss;
    summary["trainable_parameters"] = count_parameters(model, true);
    summary["total_parameters"] = count_parameters(model, false);
    for (const auto& [k, v] : extra.items()) {
        summary[k] = v;
    }
    summary["best_checkpoint_eval"] = to_json(report);
    detail::write_text(run_dir / "summary.json", summary.dump(2) + "\n");

    std::ostringstream text;
    text << role << " run " << run_dir.filename().string() << '\n';
    text << "epochs completed  " << r.last.epoch << '\n';
    text << "best epoch        " << best.best.epoch << " (val video_top1 " << detail::num(best.best.val_accuracy)
         << ")\n";
    text << "parameters        " << count_parameters(model, true) << " trainable / " << count_parameters(model, false)
         << " total\n\n";
    text << "best checkpoint on the val split\n" << detail::format_report(report, "val");
    detail::write_text(run_dir / "summary.txt", text.str());
    s.out() << text.str();
}

inline std::optional<TrainingCheckpoint> resume_point(const fs::path& run_dir, bool resume, const std::string& role) {
    if (!resume || !fs::exists(run_dir / "last.ckpt")) {
        return std::nullopt;
    }
    TrainingCheckpoint c = load_checkpoint(run_dir / "last.ckpt");
    if (c.role != role) {
        throw ConfigError("'" + (run_dir / "last.ckpt").string() + "' is not a " + role + " checkpoint");
    }
    return c;
}

inline void reset_history(const fs::path& run_dir, const std::optional<TrainingCheckpoint>& resume) {
    if (resume) {
        write_history_csv(run_dir / "history.csv", resume->history);
    } else {
        std::error_code ec;
        fs::remove(run_dir / "history.csv", ec);
    }
}

struct PrepareArgs {
    bool synthetic = false;
    std::string src;
    std::string out;
    int classes = 4;
    int per_class = 2;
    int frames = 25;
    int size = 32;
    std::uint64_t seed = 7;
    double split = 0.8;
};

inline int cmd_prepare(Session& s, const PrepareArgs& a) {
    if (a.synthetic == !a.src.empty()) {
        throw ConfigError("prepare needs exactly one of --synthetic or --src");
    }
    if (!(a.split > 0.0 && a.split < 1.0)) {
        throw ConfigError("--split must lie in (0, 1)");
    }
    ClipManifest m;
    fs::path out_dir;
    if (a.synthetic) {
        if (a.out.empty()) {
            throw ConfigError("--synthetic needs --out");
        }
        out_dir = s.resolve(a.out);
        FixtureOptions opt;
        opt.num_classes = a.classes;
        opt.clips_per_class = a.per_class;
        opt.frame_count = a.frames;
        opt.image_size = a.size;
        opt.seed = a.seed;
        opt.train_fraction = a.split;
        m = make_synthetic_fixture(out_dir, opt);
    } else {
        const fs::path src = s.resolve(a.src);
        out_dir = a.out.empty() ? src : s.resolve(a.out);
        m = scan_clip_directory(src, out_dir);
        detail::ensure_dir(out_dir);
        assign_stratified_splits(m, a.split, a.seed);
        write_manifest(out_dir / "manifest.jsonl", m);
    }
    s.out() << "wrote " << (out_dir / "manifest.jsonl").string() << '\n';
    s.out() << m.num_classes() << " classes, " << m.records.size() << " clips (train " << m.count(Split::train)
            << ", val " << m.count(Split::val) << ")\n";
    for (std::size_t c = 0; c < m.num_classes(); ++c) {
        std::size_t tr = 0, va = 0;
        for (const auto& r : m.records) {
            if (static_cast<std::size_t>(r.label_index) == c) {
                (r.split == Split::train ? tr : va) += 1;
            }
        }
        s.out() << "  " << m.vocabulary.name(c) << ": train " << tr << ", val " << va << '\n';
    }
    return kOk;
}

struct TeacherArgs {
    ConfigArgs cfg;
    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

inline int cmd_train_teacher(Session& s, const TeacherArgs& a) {
    std::vector<std::string> extra;
    if (a.epochs) extra.push_back("teacher.train.epochs=" + detail::json_text(*a.epochs));
    if (a.batch_size) extra.push_back("teacher.train.batch_size=" + detail::json_text(*a.batch_size));
    if (a.lr) extra.push_back("teacher.train.learning_rate=" + detail::json_text(*a.lr));
    if (a.seed) extra.push_back("teacher.train.seed=" + detail::json_text(*a.seed));
    const ExperimentConfig c = load_config(s, a.cfg, extra);
    ClipDataset data = open_dataset(s, c);
    check_classes(c, data);

    const fs::path run_dir = s.resolve(c.output_dir) / teacher_run_name(c);
    detail::ensure_dir(run_dir);
    detail::write_text(run_dir / "config.json", to_json(c).dump(2) + "\n");
    detail::log_line(run_dir, "train-teacher started");

    auto teacher = build_jointnet(build_backbone(resolved_backbone(s, c.teacher.backbone)), c.teacher.adapter,
                                  c.teacher.frontnet, c.teacher.init_seed);
    const auto resume = resume_point(run_dir, a.resume, "teacher");
    reset_history(run_dir, resume);
    RunOptions opts;
    opts.resume = resume ? &*resume : nullptr;
    opts.eval.batch_size = c.eval.batch_size;
    opts.on_epoch = [&](const EpochRecord& r) {
        append_history_csv(run_dir / "history.csv", r);
        detail::print_epoch(s.out(), "teacher", c.teacher.train.epochs, r);
    };
    TrainResult r = train_teacher(*teacher, data, c.teacher.train, opts);
    write_run_outputs(s, run_dir, "teacher", r, c, *teacher, data, Json::object());
    detail::log_line(run_dir, "train-teacher finished");
    s.out() << "run directory " << run_dir.string() << '\n';
    return kOk;
}

struct DistillArgs {
    ConfigArgs cfg;
    std::string teacher;
    std::optional<int> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<double> momentum;
    std::optional<double> weight_decay;
    std::optional<double> alpha;
    std::optional<double> tau;
    std::optional<std::string> stage;
    std::optional<std::uint64_t> seed;
    bool resume = false;
};

inline std::unique_ptr<Model> load_frozen_teacher(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError("teacher checkpoint '" + path.string() + "' not found; run train-teacher first");
    }
    const TrainingCheckpoint tc = load_checkpoint(path);
    if (tc.role != "teacher") {
        throw ConfigError("'" + path.string() + "' is a " + tc.role + " checkpoint, not a teacher");
    }
    auto teacher = restore_model(tc);
    freeze_model(*teacher);
    return teacher;
}

inline int cmd_distill(Session& s, const DistillArgs& a) {
    std::vector<std::string> extra;
    if (a.epochs) extra.push_back("student.train.epochs=" + detail::json_text(*a.epochs));
    if (a.batch_size) extra.push_back("student.train.batch_size=" + detail::json_text(*a.batch_size));
    if (a.lr) extra.push_back("student.train.learning_rate=" + detail::json_text(*a.lr));
    if (a.momentum) extra.push_back("student.train.momentum=" + detail::json_text(*a.momentum));
    if (a.weight_decay) extra.push_back("student.train.weight_decay=" + detail::json_text(*a.weight_decay));
    if (a.alpha) extra.push_back("student.train.distill.alpha=" + detail::json_text(*a.alpha));
    if (a.tau) extra.push_back("student.train.distill.tau=" + detail::json_text(*a.tau));
    if (a.stage) extra.push_back("student.train.stage=" + detail::json_text(*a.stage));
    if (a.seed) extra.push_back("student.train.seed=" + detail::json_text(*a.seed));
    const ExperimentConfig c = load_config(s, a.cfg, extra);
    ClipDataset data = open_dataset(s, c);
    check_classes(c, data);

    const fs::path teacher_path =
        a.teacher.empty() ? s.resolve(c.output_dir) / teacher_run_name(c) / "best.ckpt" : s.resolve(a.teacher);
    auto teacher = load_frozen_teacher(teacher_path);

    const fs::path run_dir = s.resolve(c.output_dir) / student_run_name(c);
    detail::ensure_dir(run_dir);
    detail::write_text(run_dir / "config.json", to_json(c).dump(2) + "\n");
    detail::log_line(run_dir, "distill started with teacher " + teacher_path.string());

    auto student = build_student(student_spec_for_stage(c.student.model, *teacher, c.student.train.stage));
    const auto resume = resume_point(run_dir, a.resume, "student");
    reset_history(run_dir, resume);
    RunOptions opts;
    opts.resume = resume ? &*resume : nullptr;
    opts.eval.batch_size = c.eval.batch_size;
    opts.on_epoch = [&](const EpochRecord& r) {
        append_history_csv(run_dir / "history.csv", r);
        detail::print_epoch(s.out(), "student", c.student.train.epochs, r);
    };
    TrainResult r = distill_student(*student, *teacher, data, c.student.train, opts);
    const EvalReport teacher_report = evaluate_model(*teacher, data, Split::val, {c.eval.batch_size});
    Json extra_summary = {{"stage", to_string(c.student.train.stage)},
                          {"teacher_checkpoint", teacher_path.string()},
                          {"teacher_val_video_top1", teacher_report.video_top1}};
    write_run_outputs(s, run_dir, "student", r, c, *student, data, extra_summary);
    detail::log_line(run_dir, "distill finished");
    s.out() << "teacher val video_top1 " << detail::num(teacher_report.video_top1) << '\n';
    s.out() << "run directory " << run_dir.string() << '\n';
    return kOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string split = "val";
    std::size_t batch_size = 64;
    std::optional<int> num_frames;
    std::optional<int> crop_size;
    std::string out;
};

inline int cmd_eval(Session& s, const EvalArgs& a) {
    const fs::path ckpt_path = s.resolve(a.checkpoint);
    if (!fs::exists(ckpt_path)) {
        throw ConfigError("checkpoint '" + ckpt_path.string() + "' not found");
    }
    const TrainingCheckpoint ck = load_checkpoint(ckpt_path);
    auto model = restore_model(ck);
    SamplingConfig sampling;
    if (ck.config.contains("sampling")) {
        sampling = sampling_config_from_json(ck.config.at("sampling"), "checkpoint.sampling");
    }
    if (a.num_frames) sampling.num_frames = *a.num_frames;
    if (a.crop_size) sampling.crop_size = *a.crop_size;
    sampling.validate();
    const Split split = parse_split(a.split);
    ClipDataset data(load_manifest(s.resolve(a.manifest)), sampling);
    const EvalReport report = evaluate_model(*model, data, split, {a.batch_size});
    const std::string text = detail::format_report(report, a.split);
    s.out() << text;
    const fs::path stem = a.out.empty() ? ckpt_path.parent_path() / ("eval-" + a.split) : s.resolve(a.out);
    if (!stem.parent_path().empty()) {
        detail::ensure_dir(stem.parent_path());
    }
    OrderedJson j;
    j["checkpoint"] = ckpt_path.string();
    j["role"] = ck.role;
    j["split"] = a.split;
    const auto report_json = to_json(report);
    for (const auto& [k, v] : report_json.items()) {
        j[k] = v;
    }
    fs::path txt = stem, js = stem;
    txt += ".txt";
    js += ".json";
    detail::write_text(txt, text);
    detail::write_text(js, j.dump(2) + "\n");
    return kOk;
}

struct SweepArgs {
    ConfigArgs cfg;
    std::string axis;
    std::vector<std::string> values;
    std::optional<int> runs;
    std::vector<std::uint64_t> seeds;
};

inline int cmd_sweep(Session& s, const SweepArgs& a) {
    const SweepAxis axis = parse_sweep_axis(a.axis);
    const ExperimentConfig c = load_config(s, a.cfg, {});
    std::vector<std::uint64_t> seeds = a.seeds;
    if (seeds.empty()) {
        const int runs = a.runs.value_or(c.eval.run_count);
        if (runs < 1) {
            throw ConfigError("--runs must be >= 1");
        }
        if (runs == c.eval.run_count) {
            seeds = c.eval.seeds;
        } else {
            seeds = apply_overrides(c, {"eval.run_count=" + std::to_string(runs)}).eval.seeds;
        }
    } else if (a.runs && static_cast<std::size_t>(*a.runs) != seeds.size()) {
        throw ConfigError("--runs disagrees with the number of --seeds");
    }
    ClipDataset data = open_dataset(s, c);
    check_classes(c, data);
    for (const auto& v : a.values) {
        apply_sweep_setting(c, axis, v);  // reject bad settings before any training
    }
    const Json key = {{"config", to_json(c)}, {"axis", a.axis}, {"values", a.values}, {"seeds", seeds}};
    const fs::path dir = s.resolve(c.output_dir) / ("sweep-" + a.axis + "-" + short_hash(key));
    detail::ensure_dir(dir / "runs");
    detail::write_text(dir / "config.json", to_json(c).dump(2) + "\n");
    detail::log_line(dir, "sweep started");

    auto safe = [](std::string v) {
        for (char& ch : v) {
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') {
                ch = '_';
            }
        }
        return v;
    };
    SweepHooks hooks;
    hooks.log = [&](const std::string& m) {
        s.out() << m << '\n';
        detail::log_line(dir, m);
    };
    hooks.on_teacher = [&](const std::string& setting, const TrainResult& r) {
        export_curves(r.last.history, dir / "runs" / ("teacher-" + safe(setting)));
    };
    hooks.on_run = [&](const std::string& setting, std::uint64_t seed, const TrainResult& r) {
        export_curves(r.last.history, dir / "runs" / (safe(setting) + "-seed" + std::to_string(seed)));
    };
    ExperimentConfig base = c;
    base.teacher.backbone = resolved_backbone(s, c.teacher.backbone);
    std::vector<std::string> values = a.values;
    if (axis == SweepAxis::backbone) {
        for (auto& v : values) {
            const auto colon = v.find(':');
            const std::string kind = colon == std::string::npos ? to_string(c.teacher.backbone.kind) : v.substr(0, colon);
            const std::string ident = colon == std::string::npos ? v : v.substr(colon + 1);
            if (kind == "pretrained-temporal") {
                v = kind + ":" + s.resolve(ident).string();
            }
        }
    }
    SweepResult result = run_sweep(axis, values, base, data, seeds, hooks);
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        result.rows[i].setting = a.values[i];
    }
    write_sweep_report(dir / "report.txt", result);
    detail::write_text(dir / "report.json", to_json(result).dump(2) + "\n");
    detail::log_line(dir, "sweep finished");
    s.out() << format_sweep_report(result);
    s.out() << "report " << (dir / "report.txt").string() << '\n';
    return kOk;
}

struct PlotArgs {
    std::string history;
    std::string out;
};

inline int cmd_plot(Session& s, const PlotArgs& a) {
    const RunHistory h = read_history_csv(s.resolve(a.history));
    const fs::path out = s.resolve(a.out);
    if (!out.parent_path().empty()) {
        detail::ensure_dir(out.parent_path());
    }
    write_curves_svg(out, h);
    s.out() << "wrote " << out.string() << " (" << h.size() << " epochs)\n";
    return kOk;
}

/// Entry point shared by the executable and the tests. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Session session(out, err);
    CLI::App app{"Video knowledge distillation pipeline: prepare data, fine-tune a teacher, distill a student, "
                 "evaluate, sweep and plot.",
                 "vidkd"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    std::string workdir;
    app.add_option("--workdir", workdir, "Resolve every relative path against this directory");

    PrepareArgs prep;
    auto* p = app.add_subcommand("prepare", "Write a manifest from a clip directory or a synthetic fixture");
    p->add_flag("--synthetic", prep.synthetic, "Generate the synthetic fixture");
    p->add_option("--src", prep.src, "Source directory laid out as <class>/<clip>");
    p->add_option("--out", prep.out, "Output directory for manifest.jsonl (default: --src)");
    p->add_option("--classes", prep.classes, "Fixture class count")->capture_default_str();
    p->add_option("--per-class", prep.per_class, "Fixture clips per class")->capture_default_str();
    p->add_option("--frames", prep.frames, "Fixture frames per clip")->capture_default_str();
    p->add_option("--size", prep.size, "Fixture frame side in pixels")->capture_default_str();
    p->add_option("--seed", prep.seed, "Seed for the fixture and the split")->capture_default_str();
    p->add_option("--split", prep.split, "Train fraction per class")->capture_default_str();

    TeacherArgs ta;
    auto* t = app.add_subcommand("train-teacher", "Fine-tune the teacher (adapter + head) on the train split");
    add_config_args(t, ta.cfg);
    t->add_option("--epochs", ta.epochs, "teacher.train.epochs")->default_str("100");
    t->add_option("--batch-size", ta.batch_size, "teacher.train.batch_size")->default_str("64");
    t->add_option("--lr", ta.lr, "teacher.train.learning_rate (adaptive-moment, cosine-annealing)")
        ->default_str("0.0001");
    t->add_option("--seed", ta.seed, "teacher.train.seed")->default_str("11");
    t->add_flag("--resume", ta.resume, "Continue from last.ckpt in the run directory");

    DistillArgs da;
    auto* d = app.add_subcommand("distill", "Train the student against a frozen teacher");
    add_config_args(d, da.cfg);
    d->add_option("--teacher", da.teacher, "Teacher checkpoint (default: best.ckpt of the matching teacher run)");
    d->add_option("--epochs", da.epochs, "student.train.epochs")->default_str("200");
    d->add_option("--batch-size", da.batch_size, "student.train.batch_size")->default_str("128");
    d->add_option("--lr", da.lr, "student.train.learning_rate (momentum-sgd, constant)")->default_str("0.0001");
    d->add_option("--momentum", da.momentum, "student.train.momentum")->default_str("0.9");
    d->add_option("--weight-decay", da.weight_decay, "student.train.weight_decay")->default_str("0.0005");
    d->add_option("--alpha", da.alpha, "student.train.distill.alpha")->default_str("0.9");
    d->add_option("--tau", da.tau, "student.train.distill.tau")->default_str("6");
    d->add_option("--stage", da.stage, "student.train.stage (late|early)")->default_str("late");
    d->add_option("--seed", da.seed, "student.train.seed")->default_str("11");
    d->add_flag("--resume", da.resume, "Continue from last.ckpt in the run directory");

    EvalArgs ea;
    auto* e = app.add_subcommand("eval", "Score a checkpoint on one split");
    e->add_option("--checkpoint", ea.checkpoint, "Checkpoint to evaluate")->required();
    e->add_option("--manifest", ea.manifest, "Dataset manifest")->required();
    e->add_option("--split", ea.split, "train or val")->capture_default_str();
    e->add_option("--batch-size", ea.batch_size, "Clips per forward pass")->capture_default_str();
    e->add_option("--num-frames", ea.num_frames, "Frames per clip (default: as trained)");
    e->add_option("--crop-size", ea.crop_size, "Crop side (default: as trained)");
    e->add_option("--out", ea.out, "Report path stem (default: eval-<split> beside the checkpoint)");

    SweepArgs sa;
    auto* w = app.add_subcommand("sweep", "Repeat distill-then-evaluate over one axis and several seeds");
    add_config_args(w, sa.cfg);
    w->add_option("--axis", sa.axis, "alpha | backbone | stage")->required();
    w->add_option("--values", sa.values, "Comma-separated settings, e.g. 0.90,0.95,0.97")->required()->delimiter(',');
    w->add_option("--runs", sa.runs, "Runs per setting (default: eval.run_count)")->default_str("5");
    w->add_option("--seeds", sa.seeds, "Comma-separated run seeds")->delimiter(',')->default_str("11,23,37,53,71");

    PlotArgs pa;
    auto* pl = app.add_subcommand("plot", "Render accuracy and loss curves from a history table");
    pl->add_option("--history", pa.history, "history.csv written by a training run")->required();
    pl->add_option("--out", pa.out, "Output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kUsage;
    }
    session.set_workdir(workdir);
    try {
        if (p->parsed()) return cmd_prepare(session, prep);
        if (t->parsed()) return cmd_train_teacher(session, ta);
        if (d->parsed()) return cmd_distill(session, da);
        if (e->parsed()) return cmd_eval(session, ea);
        if (w->parsed()) return cmd_sweep(session, sa);
        if (pl->parsed()) return cmd_plot(session, pa);
    } catch (const DivergenceError& ex) {
        err << "error: " << ex.what() << '\n';
        return kNumerical;
    } catch (const IoError& ex) {
        err << "error: " << ex.what() << '\n';
        return kIoFailure;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kIoFailure;
    }
    return kUsage;
}

}  // namespace vidkd::cli
