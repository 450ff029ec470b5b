#include <gtest/gtest.h>

#include <fstream>

#include "helpers.hpp"
#include "vidkd/losses.hpp"
#include "vidkd/models/factory.hpp"
#include "vidkd/nn/optim.hpp"
#include "vidkd/training/checkpoint.hpp"

using namespace vidkd;

namespace {

BackboneSpec tiny_backbone() {
    BackboneSpec b;
    b.kind = BackboneKind::synthetic_tiny;
    b.identifier = "tiny";
    b.width = 8;
    return b;
}

std::unique_ptr<Jointnet> tiny_teacher(std::uint64_t seed = 0) {
    return build_jointnet(build_backbone(tiny_backbone()), AdapterSpec{}, FrontNetSpec{}, seed);
}

ClipDataset small_data(int frames = 4, int crop = 32) {
    SamplingConfig s;
    s.num_frames = frames;
    s.crop_size = crop;
    return ClipDataset(test::fixture(), s);
}

void train_steps(Model& model, ClipDataset& data, int steps) {
    auto params = model.parameters();
    nn::Adam opt(params);
    Rng rng(3);
    const auto batch = data.batch(data.manifest().indices(Split::train));
    for (int i = 0; i < steps; ++i) {
        opt.zero_grad();
        const Tensor logits = model.forward(batch, {true, &rng});
        RowMatrixXd grad;
        cross_entropy(to_double(logits), batch.labels, &grad);
        model.backward(from_double(grad));
        opt.step(1e-2);
    }
}

}  // namespace

TEST(ParameterCounts, SmallResidualStudent) {
    StudentSpec spec;
    spec.num_classes = 4;
    auto student = build_student(spec);
    // Eighteen-layer residual network: 11,176,512 feature parameters plus a 512 x 4 classifier.
    EXPECT_EQ(count_parameters(*student, false), 11'178'564u);
    EXPECT_EQ(count_parameters(*student, true), 11'178'564u);
    EXPECT_LT(count_parameters(*student, false), 50'000'000u);
}

TEST(ParameterCounts, JointnetAdapterAndHead) {
    auto teacher = tiny_teacher();
    std::size_t adapter = 0, frontnet = 0;
    Shape last_weight;
    for (const auto& p : teacher->parameters()) {
        if (p.param->buffer) {
            continue;
        }
        if (p.name.rfind("adapter.", 0) == 0) {
            adapter += p.param->value.size();
        } else if (p.name.rfind("frontnet.", 0) == 0) {
            frontnet += p.param->value.size();
            if (p.name.ends_with(".weight") && p.param->value.rank() == 2) {
                last_weight = p.param->value.shape();
            }
        }
    }
    EXPECT_EQ(adapter, 400u * 400u + 400u + 2u * 400u);
    EXPECT_EQ(frontnet, (400u * 256u + 256u + 512u) + (256u * 128u + 128u + 256u) + (128u * 4u + 4u));
    EXPECT_EQ(last_weight, (Shape{4, 128}));
    EXPECT_EQ(count_parameters(*teacher, true), adapter + frontnet);
}

TEST(Backbone, FrozenParametersAreNotTrainable) {
    auto b = build_backbone(tiny_backbone());
    EXPECT_TRUE(b->frozen());
    EXPECT_EQ(count_parameters(*b, true), 0u);
    EXPECT_GT(count_parameters(*b, false), 0u);
    auto data = small_data();
    EXPECT_THROW(b->backward(Tensor({1, 400})), ConfigError);
    EXPECT_EQ(b->forward(data.batch({0, 1}), {}).shape(), (Shape{2, 400}));
}

TEST(Jointnet, RejectsTrainableBackboneAndWidthMismatch) {
    auto spec = tiny_backbone();
    spec.frozen = false;
    EXPECT_THROW(build_jointnet(build_backbone(spec), AdapterSpec{}, FrontNetSpec{}), ConfigError);
    AdapterSpec bad;
    bad.layer_widths = {300, 400};
    EXPECT_THROW(build_jointnet(build_backbone(tiny_backbone()), bad, FrontNetSpec{}), ShapeError);
    FrontNetSpec head;
    head.hidden_widths = {256, 64};
    EXPECT_THROW(build_jointnet(build_backbone(tiny_backbone()), AdapterSpec{}, head), ConfigError);
}

TEST(Jointnet, StagesCompose) {
    auto teacher = tiny_teacher();
    auto data = small_data();
    const auto batch = data.batch({0, 3, 5});
    const auto stages = teacher->forward_stages(batch, {});
    EXPECT_EQ(stages.backbone.shape(), (Shape{3, 400}));
    EXPECT_EQ(stages.adapter.shape(), (Shape{3, 400}));
    EXPECT_EQ(stages.logits.shape(), (Shape{3, 4}));
    const Tensor direct = teacher->frontnet_forward(teacher->adapter_forward(teacher->backbone().forward(batch, {}), {}), {});
    EXPECT_EQ(direct.storage(), stages.logits.storage());
    EXPECT_EQ(teacher->forward(batch, {}).storage(), stages.logits.storage());
}

TEST(Jointnet, TrainingLeavesBackboneUntouched) {
    auto teacher = tiny_teacher();
    auto data = small_data();
    const auto frozen_before = parameter_checksum(teacher->backbone());
    const auto all_before = parameter_checksum(*teacher);
    train_steps(*teacher, data, 5);
    EXPECT_EQ(parameter_checksum(teacher->backbone()), frozen_before);
    EXPECT_NE(parameter_checksum(*teacher), all_before);
    for (const auto& p : teacher->backbone().parameters()) {
        for (float g : p.param->grad.values()) {
            ASSERT_EQ(g, 0.0f) << p.name;
        }
    }
}

TEST(Student, ShapesForBothArchitectures) {
    auto data = small_data(3, 32);
    const auto batch = data.batch({0, 1});
    for (auto arch : {StudentArchitecture::tiny_conv, StudentArchitecture::small_residual_2d}) {
        StudentSpec spec;
        spec.architecture = arch;
        spec.num_classes = 4;
        auto s = build_student(spec);
        EXPECT_EQ(s->forward(batch, {}).shape(), (Shape{2, 4})) << to_string(arch);
        EXPECT_EQ(s->predict_units(batch).shape(), (Shape{6, 4})) << to_string(arch);
        EXPECT_EQ(s->granularity(), OutputGranularity::frame);
    }
}

TEST(Student, ClipLogitsAreFrameMeans) {
    auto data = small_data(3, 16);
    const auto batch = data.batch({2, 6});
    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    auto s = build_student(spec);
    const Tensor frames = s->predict_units(batch);
    const Tensor clips = s->forward(batch, {});
    const Tensor expected = aggregate_clip_logits(frames, batch.offsets);
    for (std::size_t i = 0; i < clips.size(); ++i) {
        EXPECT_FLOAT_EQ(clips[i], expected[i]);
    }
}

TEST(Student, SeedDeterminesWeights) {
    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    spec.seed = 5;
    auto a = build_student(spec);
    auto b = build_student(spec);
    spec.seed = 6;
    auto c = build_student(spec);
    EXPECT_EQ(parameter_checksum(*a), parameter_checksum(*b));
    EXPECT_NE(parameter_checksum(*a), parameter_checksum(*c));
}

TEST(Aggregation, MeanOverFrames) {
    Tensor per_frame({2, 2}, std::vector<float>{1, 2, 3, 4});
    EXPECT_EQ(aggregate_clip_logits(per_frame).storage(), (std::vector<float>{2, 3}));
    Tensor one({1, 3}, std::vector<float>{0.5f, -1.0f, 7.0f});
    EXPECT_EQ(aggregate_clip_logits(one).storage(), one.storage());
    Tensor batched({3, 2}, std::vector<float>{1, 1, 3, 5, 10, 20});
    EXPECT_EQ(aggregate_clip_logits(batched, {0, 2, 3}).storage(), (std::vector<float>{2, 3, 10, 20}));
    EXPECT_THROW(aggregate_clip_logits(Tensor({0, 2})), ShapeError);
}

TEST(PrecomputedBackbone, ServesExportedRows) {
    const auto dir = test::scratch("features");
    const auto& m = test::fixture();
    std::vector<std::string> ids;
    Tensor features({m.records.size(), 400});
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        ids.push_back(m.records[i].clip_id);
        for (std::size_t c = 0; c < 400; ++c) {
            features.at(i, c) = static_cast<float>(i * 1000 + c);
        }
    }
    write_clip_features(dir / "feat.vkd", ids, features, 24'000'000);
    BackboneSpec spec;
    spec.kind = BackboneKind::pretrained_temporal;
    spec.identifier = (dir / "feat.vkd").string();
    auto b = build_backbone(spec);
    auto data = small_data();
    const Tensor out = b->forward(data.batch({4, 1}), {});
    EXPECT_EQ(out.at(0, 7), 4007.0f);
    EXPECT_EQ(out.at(1, 399), 1399.0f);
    EXPECT_EQ(count_parameters(*b, false), 24'000'000u);
    EXPECT_EQ(count_parameters(*b, true), 0u);

    write_clip_features(dir / "partial.vkd", {ids[0]}, Tensor({1, 400}));
    spec.identifier = (dir / "partial.vkd").string();
    auto partial = build_backbone(spec);
    EXPECT_THROW(partial->forward(data.batch({1}), {}), FormatError);

    spec.identifier = (dir / "absent.vkd").string();
    EXPECT_THROW(build_backbone(spec), IoError);
    spec.identifier = "x";
    spec.output_dim = 300;
    EXPECT_THROW(build_backbone(spec), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
    const auto dir = test::scratch("ckpt");
    auto teacher = tiny_teacher(3);
    auto data = small_data();
    train_steps(*teacher, data, 2);
    const auto batch = data.batch({0, 1, 2, 3});
    const Tensor before = teacher->forward(batch, {});
    auto ck = snapshot(*teacher, "teacher");
    ck.epoch = 2;
    ck.seed = 11;
    ck.history.records.push_back({1, 1.5, 0.25, 1.4, 0.5, 1e-3, 1.5, 0.0});
    ck.best = {1, 0.5, 1.4};
    save_checkpoint(ck, dir / "a.ckpt");
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(loaded.role, "teacher");
    EXPECT_EQ(loaded.epoch, 2);
    EXPECT_EQ(loaded.seed, 11u);
    EXPECT_EQ(loaded.history, ck.history);
    EXPECT_EQ(loaded.best, ck.best);
    auto restored = restore_model(loaded);
    EXPECT_EQ(restored->forward(batch, {}).storage(), before.storage());

    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    auto student = build_student(spec);
    save_checkpoint(snapshot(*student, "student"), dir / "s.ckpt");
    auto student_back = restore_model(load_checkpoint(dir / "s.ckpt"));
    EXPECT_EQ(student_back->forward(batch, {}).storage(), student->forward(batch, {}).storage());
}

TEST(Checkpoint, CorruptionIsRejected) {
    const auto dir = test::scratch("ckpt_bad");
    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    auto student = build_student(spec);
    save_checkpoint(snapshot(*student, "student"), dir / "s.ckpt");
    std::string bytes;
    {
        std::ifstream in(dir / "s.ckpt", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(load_checkpoint(dir / "trunc.ckpt"), FormatError);
    bytes[bytes.size() / 2] ^= 0x5a;
    {
        std::ofstream out(dir / "flip.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    EXPECT_THROW(load_checkpoint(dir / "flip.ckpt"), FormatError);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
    StudentSpec spec;
    spec.architecture = StudentArchitecture::tiny_conv;
    auto student = build_student(spec);
    auto ck = snapshot(*student, "student");
    spec.num_classes = 7;
    ck.model_spec = build_student(spec)->spec();
    EXPECT_THROW(restore_model(ck), ShapeError);
    auto missing = snapshot(*student, "student");
    missing.model_state.pop_back();
    EXPECT_THROW(restore_model(missing), FormatError);
}

TEST(ModelFactory, RebuildsFromSpec) {
    auto teacher = tiny_teacher(9);
    auto rebuilt = build_model(teacher->spec());
    EXPECT_EQ(rebuilt->type(), "jointnet");
    EXPECT_EQ(parameter_checksum(*rebuilt), parameter_checksum(*teacher));
    EXPECT_THROW(build_model(Json{{"type", "mystery"}}), FormatError);
}
