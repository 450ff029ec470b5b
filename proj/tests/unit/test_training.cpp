#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "vidkd/training/trainer.hpp"

using namespace vidkd;

namespace {

ClipDataset tiny_data() {
    SamplingConfig s;
    s.num_frames = 3;
    s.crop_size = 16;
    return ClipDataset(test::fixture(), s);
}

std::unique_ptr<Jointnet> tiny_teacher() {
    BackboneSpec b;
    b.identifier = "tiny";
    b.width = 8;
    b.output_dim = 400;
    AdapterSpec a;
    FrontNetSpec f;
    return build_jointnet(build_backbone(b), a, f, 1);
}

std::unique_ptr<Student> tiny_student(std::size_t classes = 4, std::uint64_t seed = 2) {
    StudentSpec s;
    s.architecture = StudentArchitecture::tiny_conv;
    s.width = 8;
    s.num_classes = classes;
    s.seed = seed;
    return build_student(s);
}

TeacherTrainConfig teacher_config(int epochs) {
    TeacherTrainConfig c;
    c.epochs = epochs;
    c.batch_size = 2;
    c.learning_rate = 1e-3;
    return c;
}

StudentTrainConfig student_config(int epochs) {
    StudentTrainConfig c;
    c.epochs = epochs;
    c.batch_size = 2;
    c.learning_rate = 0.05;
    return c;
}

std::unique_ptr<Jointnet> frozen_teacher(ClipDataset& data) {
    auto t = tiny_teacher();
    train_teacher(*t, data, teacher_config(2));
    freeze_model(*t);
    return t;
}

}  // namespace

TEST(CosineSchedule, ClosedForm) {
    EXPECT_DOUBLE_EQ(cosine_annealing_lr(0, 100, 1e-4, 0.0), 1e-4);
    EXPECT_NEAR(cosine_annealing_lr(100, 100, 1e-4, 1e-6), 1e-6, 1e-18);
    EXPECT_NEAR(cosine_annealing_lr(50, 100, 1e-4, 0.0), 5e-5, 1e-18);
    EXPECT_NEAR(cosine_annealing_lr(25, 100, 1.0, 0.0), 0.5 * (1.0 + std::cos(M_PI / 4.0)), 1e-15);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        const double base = u(rng);
        const double min = base * u(rng);
        const int total = 1 + static_cast<int>(rng() % 200);
        double prev = base;
        for (int e = 0; e <= total; ++e) {
            const double lr = cosine_annealing_lr(e, total, base, min);
            EXPECT_LE(lr, prev + 1e-15);
            EXPECT_GE(lr, min - 1e-15);
            prev = lr;
        }
    }
    EXPECT_THROW(cosine_annealing_lr(101, 100, 1.0, 0.0), DomainError);
    EXPECT_THROW(cosine_annealing_lr(0, 10, 1.0, 2.0), DomainError);
    EXPECT_EQ(scheduled_lr(Schedule::constant, 7, 10, 0.3, 0.0), 0.3);
}

TEST(History, CsvRoundTripIsExact) {
    RunHistory h;
    h.records.push_back({1, 1.0 / 3.0, 0.25, std::nextafter(1.0, 2.0), 0.5, 1e-4, 0.1, 0.2});
    h.records.push_back({2, 0.1, 0.75, 0.2, 1.0, 5e-5, 0.3, 1e-300});
    const auto dir = test::scratch("history");
    write_history_csv(dir / "h.csv", h);
    EXPECT_EQ(read_history_csv(dir / "h.csv"), h);
    for (const auto& r : h.records) {
        append_history_csv(dir / "a.csv", r);
    }
    EXPECT_EQ(read_history_csv(dir / "a.csv"), h);
    EXPECT_EQ(history_from_json(to_json(h)), h);
    EXPECT_THROW(read_history_csv(dir / "missing.csv"), IoError);
}

TEST(BestEpoch, Ordering) {
    EXPECT_TRUE(detail::improves({}, 0.0, 9.0));
    EXPECT_TRUE(detail::improves({1, 0.5, 1.0}, 0.75, 2.0));
    EXPECT_FALSE(detail::improves({1, 0.5, 1.0}, 0.25, 0.1));
    EXPECT_TRUE(detail::improves({1, 0.5, 1.0}, 0.5, 0.9));
    EXPECT_FALSE(detail::improves({1, 0.5, 1.0}, 0.5, 1.0));
}

TEST(TrainTeacher, RejectsUntrainableOrMismatchedModels) {
    auto data = tiny_data();
    auto teacher = tiny_teacher();
    freeze_model(*teacher);
    EXPECT_THROW(train_teacher(*teacher, data, teacher_config(1)), ConfigError);
    BackboneSpec b;
    b.width = 8;
    FrontNetSpec f;
    f.num_classes = 5;
    auto wrong = build_jointnet(build_backbone(b), AdapterSpec{}, f);
    EXPECT_THROW(train_teacher(*wrong, data, teacher_config(1)), ShapeError);
    auto cfg = teacher_config(1);
    cfg.epochs = 0;
    EXPECT_THROW(train_teacher(*tiny_teacher(), data, cfg), ConfigError);
}

TEST(TrainTeacher, DeterministicAndBookkept) {
    auto data = tiny_data();
    auto a = tiny_teacher();
    auto b = tiny_teacher();
    const auto backbone_sum = parameter_checksum(a->backbone());
    const auto ra = train_teacher(*a, data, teacher_config(3));
    const auto rb = train_teacher(*b, data, teacher_config(3));
    EXPECT_EQ(ra.history, rb.history);
    EXPECT_EQ(parameter_checksum(*a), parameter_checksum(*b));
    EXPECT_EQ(parameter_checksum(a->backbone()), backbone_sum);
    ASSERT_EQ(ra.history.size(), 3u);
    EXPECT_EQ(ra.last.epoch, 3);
    ASSERT_TRUE(ra.best.has_value());
    EXPECT_EQ(ra.best->best.epoch, ra.last.best.epoch);
    for (const auto& r : ra.history.records) {
        EXPECT_EQ(r.train_loss, r.ce_part);
        EXPECT_EQ(r.kl_part, 0.0);
        EXPECT_NEAR(r.learning_rate, cosine_annealing_lr(r.epoch - 1, 3, 1e-3, 0.0), 1e-18);
    }
}

TEST(TrainTeacher, ResumeMatchesUninterruptedRun) {
    auto data = tiny_data();
    auto full = tiny_teacher();
    const auto straight = train_teacher(*full, data, teacher_config(4));

    auto part = tiny_teacher();
    RunOptions stop;
    stop.stop_after_epoch = 2;
    const auto first = train_teacher(*part, data, teacher_config(4), stop);
    EXPECT_EQ(first.history.size(), 2u);
    const auto dir = test::scratch("resume");
    save_checkpoint(first.last, dir / "last.ckpt");
    const auto ck = load_checkpoint(dir / "last.ckpt");

    auto fresh = tiny_teacher();
    RunOptions resume;
    resume.resume = &ck;
    const auto second = train_teacher(*fresh, data, teacher_config(4), resume);
    EXPECT_EQ(second.history, straight.history);
    EXPECT_EQ(parameter_checksum(*fresh), parameter_checksum(*full));

    auto cfg = teacher_config(4);
    cfg.seed = 99;
    EXPECT_THROW(train_teacher(*tiny_teacher(), data, cfg, resume), ConfigError);
}

TEST(TrainTeacher, DivergenceIsReported) {
    auto data = tiny_data();
    auto student = tiny_student();
    nn::MomentumSgd opt(student->parameters(), 0.9, 0.0);
    LoopSettings s;
    s.role = "probe";
    s.epochs = 2;
    s.batch_size = 2;
    int calls = 0;
    const BatchLossFn nan_on_second = [&](const ClipBatch& batch, const std::vector<std::size_t>&, const Tensor& logits,
                                          bool, RowMatrixXd* grad) {
        StepLoss l;
        l.total = cross_entropy(to_double(logits), batch.labels, grad);
        if (++calls == 2) {
            l.total = std::nan("");
        }
        return l;
    };
    try {
        run_training(*student, data, s, opt, nan_on_second);
        FAIL();
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.epoch(), 1);
        EXPECT_EQ(e.step(), 2);
    }
    auto wild = tiny_teacher();
    auto cfg = teacher_config(3);
    cfg.learning_rate = 1e30;
    EXPECT_THROW(train_teacher(*wild, data, cfg), DivergenceError);
}

TEST(DistillStudent, RequiresFrozenTeacherAndMatchingShapes) {
    auto data = tiny_data();
    auto teacher = tiny_teacher();
    auto student = tiny_student();
    EXPECT_THROW(distill_student(*student, *teacher, data, student_config(1)), ConfigError);
    freeze_model(*teacher);
    auto wide = tiny_student(5);
    EXPECT_THROW(distill_student(*wide, *teacher, data, student_config(1)), ShapeError);
    auto cfg = student_config(1);
    cfg.stage = DistillStage::early;
    EXPECT_THROW(distill_student(*student, *teacher, data, cfg), ShapeError);
}

TEST(DistillStudent, TeacherUnchangedAndLossDecomposes) {
    auto data = tiny_data();
    auto teacher = frozen_teacher(data);
    const auto before = parameter_checksum(*teacher);
    auto student = tiny_student();
    auto cfg = student_config(3);
    cfg.distill.alpha = 0.7;
    cfg.distill.tau = 4.0;
    const auto r = distill_student(*student, *teacher, data, cfg);
    EXPECT_EQ(parameter_checksum(*teacher), before);
    for (const auto& p : teacher->parameters()) {
        for (float g : p.param->grad.values()) {
            ASSERT_EQ(g, 0.0f) << p.name;
        }
    }
    for (const auto& rec : r.history.records) {
        EXPECT_NEAR(rec.train_loss, 0.7 * rec.ce_part + 0.3 * rec.kl_part, 1e-9);
        EXPECT_GE(rec.kl_part, 0.0);
        EXPECT_EQ(rec.learning_rate, 0.05);
    }
}

TEST(DistillStudent, AlphaOneEqualsPlainCrossEntropy) {
    auto data = tiny_data();
    auto teacher = frozen_teacher(data);
    auto a = tiny_student();
    auto cfg = student_config(3);
    cfg.distill.alpha = 1.0;
    const auto distilled = distill_student(*a, *teacher, data, cfg);

    auto b = tiny_student();
    nn::MomentumSgd opt(b->parameters(), cfg.momentum, cfg.weight_decay);
    LoopSettings s;
    s.role = "student";
    s.epochs = cfg.epochs;
    s.batch_size = cfg.batch_size;
    s.schedule = cfg.schedule;
    s.learning_rate = cfg.learning_rate;
    s.seed = cfg.seed;
    const BatchLossFn ce = [](const ClipBatch& batch, const std::vector<std::size_t>&, const Tensor& logits, bool,
                              RowMatrixXd* grad) {
        StepLoss l;
        l.cross_entropy = cross_entropy(to_double(logits), batch.labels, grad);
        l.total = l.cross_entropy;
        return l;
    };
    const auto plain = run_training(*b, data, s, opt, ce);
    ASSERT_EQ(plain.history.size(), distilled.history.size());
    for (std::size_t i = 0; i < plain.history.size(); ++i) {
        EXPECT_EQ(plain.history.records[i].train_loss, distilled.history.records[i].train_loss);
        EXPECT_EQ(plain.history.records[i].val_accuracy, distilled.history.records[i].val_accuracy);
    }
    EXPECT_EQ(parameter_checksum(*a), parameter_checksum(*b));
}

TEST(DistillStudent, CachedTeacherLogitsChangeNothing) {
    auto data = tiny_data();
    auto teacher = frozen_teacher(data);
    auto a = tiny_student();
    auto b = tiny_student();
    auto cfg = student_config(2);
    const auto plain = distill_student(*a, *teacher, data, cfg);
    cfg.cache_teacher_logits = true;
    const auto cached = distill_student(*b, *teacher, data, cfg);
    EXPECT_EQ(plain.history, cached.history);
}

TEST(DistillStudent, EarlyStageMatchesBackboneOutputs) {
    auto data = tiny_data();
    auto teacher = frozen_teacher(data);
    auto cfg = student_config(2);
    cfg.stage = DistillStage::early;
    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    spec.width = 8;
    spec = student_spec_for_stage(spec, *teacher, cfg.stage);
    EXPECT_EQ(spec.num_classes, 400u);
    auto student = build_student(spec);
    const auto r = distill_student(*student, *teacher, data, cfg);
    for (const auto& rec : r.history.records) {
        EXPECT_EQ(rec.ce_part, 0.0);
        EXPECT_EQ(rec.train_loss, rec.kl_part);
    }
    EXPECT_EQ(&distillation_source(*teacher, DistillStage::early), &teacher->backbone());
    EXPECT_EQ(&distillation_source(*teacher, DistillStage::late), teacher.get());
}

TEST(DistillStudent, SeedsAreReproducibleAndDistinct) {
    auto data = tiny_data();
    auto teacher = frozen_teacher(data);
    auto cfg = student_config(2);
    auto a = tiny_student();
    auto b = tiny_student();
    auto c = tiny_student();
    const auto ra = distill_student(*a, *teacher, data, cfg);
    const auto rb = distill_student(*b, *teacher, data, cfg);
    cfg.seed = 12;
    const auto rc = distill_student(*c, *teacher, data, cfg);
    EXPECT_EQ(ra.history, rb.history);
    EXPECT_NE(ra.history.records[0].train_loss, rc.history.records[0].train_loss);
}

TEST(TrainingConfig, JsonRoundTripAndStrictness) {
    StudentTrainConfig s;
    s.distill.alpha = 0.95;
    s.stage = DistillStage::early;
    EXPECT_EQ(to_json(student_train_config_from_json(to_json(s), "student.train")), to_json(s));
    TeacherTrainConfig t;
    t.epochs = 7;
    EXPECT_EQ(to_json(teacher_train_config_from_json(to_json(t), "teacher.train")), to_json(t));
    Json bad = to_json(s);
    bad["learning_rte"] = 0.1;
    EXPECT_THROW(student_train_config_from_json(bad, "student.train"), ConfigError);
    Json bad_alpha = to_json(s);
    bad_alpha["distill"]["alpha"] = 1.5;
    EXPECT_THROW(student_train_config_from_json(bad_alpha, "student.train"), ConfigError);
}

TEST(TrainingConfig, RecipeDefaults) {
    const TeacherTrainConfig t;
    EXPECT_EQ(t.epochs, 100);
    EXPECT_EQ(t.batch_size, 64u);
    EXPECT_DOUBLE_EQ(t.learning_rate, 1e-4);
    EXPECT_EQ(t.schedule, Schedule::cosine_annealing);
    const StudentTrainConfig s;
    EXPECT_EQ(s.epochs, 200);
    EXPECT_EQ(s.batch_size, 128u);
    EXPECT_DOUBLE_EQ(s.learning_rate, 1e-4);
    EXPECT_DOUBLE_EQ(s.momentum, 0.9);
    EXPECT_DOUBLE_EQ(s.weight_decay, 5e-4);
    EXPECT_DOUBLE_EQ(s.distill.alpha, 0.9);
    EXPECT_DOUBLE_EQ(s.distill.tau, 6.0);
    EXPECT_EQ(s.stage, DistillStage::late);
}
