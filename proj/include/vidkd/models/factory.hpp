#pragma once

#include <memory>
#include <string>

#include "vidkd/models/backbone.hpp"
#include "vidkd/models/jointnet.hpp"
#include "vidkd/models/student.hpp"

namespace vidkd {

/// Rebuilds an architecture from Model::spec().
inline std::unique_ptr<Model> build_model(const Json& spec) {
    ObjectReader r(spec, "model spec");
    const auto type = r.require<std::string>("type");
    if (type == "backbone") {
        auto b = build_backbone(backbone_spec_from_json(r.child("backbone")));
        r.finish();
        return b;
    }
    if (type == "jointnet") {
        auto backbone = build_backbone(backbone_spec_from_json(r.child("backbone")));
        const auto adapter = adapter_spec_from_json(r.child("adapter"));
        const auto frontnet = frontnet_spec_from_json(r.child("frontnet"));
        const auto seed = r.get<std::uint64_t>("init_seed", 0);
        r.finish();
        return build_jointnet(std::move(backbone), adapter, frontnet, seed);
    }
    if (type == "student") {
        auto s = build_student(student_spec_from_json(r.child("student")));
        r.finish();
        return s;
    }
    throw FormatError("unknown model type '" + type + "'");
}

}  // namespace vidkd
