#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/json_util.hpp"

namespace vidkd {

enum class BackboneKind { pretrained_temporal, synthetic_tiny };

inline const char* to_string(BackboneKind k) {
    return k == BackboneKind::pretrained_temporal ? "pretrained-temporal" : "synthetic-tiny";
}

inline BackboneKind parse_backbone_kind(const std::string& text) {
    if (text == "pretrained-temporal") {
        return BackboneKind::pretrained_temporal;
    }
    if (text == "synthetic-tiny") {
        return BackboneKind::synthetic_tiny;
    }
    throw ConfigError("unknown backbone kind '" + text + "'");
}

inline constexpr std::size_t kPretrainedOutputDim = 400;

/// For pretrained-temporal backbones `identifier` locates the exported clip-feature archive;
/// for synthetic-tiny it names the variant and also seeds its frozen random weights.
struct BackboneSpec {
    BackboneKind kind = BackboneKind::synthetic_tiny;
    std::string identifier = "tiny";
    std::size_t output_dim = kPretrainedOutputDim;
    bool frozen = true;
    std::uint64_t seed = 0;
    std::size_t width = 16;  // channel width of the synthetic conv stack

    void validate() const {
        if (output_dim == 0) {
            throw ConfigError("backbone.output_dim must be positive");
        }
        if (kind == BackboneKind::pretrained_temporal && output_dim != kPretrainedOutputDim) {
            throw ConfigError("pretrained-temporal backbones emit 400 features");
        }
        if (identifier.empty()) {
            throw ConfigError("backbone.identifier must be non-empty");
        }
        if (width < 2) {
            throw ConfigError("backbone.width must be >= 2");
        }
    }

    bool operator==(const BackboneSpec&) const = default;
};

struct AdapterSpec {
    std::vector<std::size_t> layer_widths{400, 400};
    bool use_batch_normalization = true;

    void validate(std::size_t backbone_dim) const {
        if (layer_widths.size() < 2) {
            throw ConfigError("adapter.layer_widths needs at least two entries");
        }
        for (auto w : layer_widths) {
            if (w == 0) {
                throw ConfigError("adapter.layer_widths entries must be positive");
            }
        }
        if (layer_widths.front() != backbone_dim) {
            throw ShapeError("backbone -> adapter boundary: backbone emits " + std::to_string(backbone_dim) +
                             " features but adapter expects " + std::to_string(layer_widths.front()));
        }
        if (layer_widths.back() != backbone_dim) {
            throw ShapeError("adapter output width " + std::to_string(layer_widths.back()) +
                             " must equal the backbone output width " + std::to_string(backbone_dim));
        }
    }

    bool operator==(const AdapterSpec&) const = default;
};

inline constexpr std::size_t kFrontNetPenultimateWidth = 128;

/// Classification head: input -> hidden_widths... -> num_classes; the last hidden width is 128.
struct FrontNetSpec {
    std::vector<std::size_t> hidden_widths{256, 128};
    std::size_t num_classes = 4;
    bool use_batch_normalization = true;
    double dropout_rate = 0.0;

    void validate() const {
        if (hidden_widths.empty()) {
            throw ConfigError("frontnet.hidden_widths must be non-empty");
        }
        for (auto w : hidden_widths) {
            if (w == 0) {
                throw ConfigError("frontnet.hidden_widths entries must be positive");
            }
        }
        if (hidden_widths.back() != kFrontNetPenultimateWidth) {
            throw ConfigError("frontnet.hidden_widths must end in 128");
        }
        if (num_classes == 0) {
            throw ConfigError("frontnet.num_classes must be positive");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ConfigError("frontnet.dropout_rate must lie in [0, 1)");
        }
    }

    bool operator==(const FrontNetSpec&) const = default;
};

enum class StudentArchitecture { small_residual_2d, tiny_conv };

inline const char* to_string(StudentArchitecture a) {
    return a == StudentArchitecture::small_residual_2d ? "small-residual-2d" : "tiny-conv";
}

inline StudentArchitecture parse_student_architecture(const std::string& text) {
    if (text == "small-residual-2d") {
        return StudentArchitecture::small_residual_2d;
    }
    if (text == "tiny-conv") {
        return StudentArchitecture::tiny_conv;
    }
    throw ConfigError("unknown student architecture '" + text + "'");
}

struct StudentSpec {
    StudentArchitecture architecture = StudentArchitecture::small_residual_2d;
    std::size_t num_classes = 4;
    double dropout_rate = 0.5;
    std::uint64_t seed = 0;
    std::size_t width = 16;  // tiny-conv channel width

    void validate() const {
        if (num_classes == 0) {
            throw ConfigError("student.num_classes must be positive");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ConfigError("student.dropout_rate must lie in [0, 1)");
        }
        if (width < 2) {
            throw ConfigError("student.width must be >= 2");
        }
    }

    bool operator==(const StudentSpec&) const = default;
};

// JSON forms. Readers are strict: unknown keys are rejected.

inline Json to_json(const BackboneSpec& s) {
    return {{"kind", to_string(s.kind)}, {"identifier", s.identifier}, {"output_dim", s.output_dim},
            {"frozen", s.frozen},        {"seed", s.seed},             {"width", s.width}};
}

inline BackboneSpec backbone_spec_from_json(const Json& j, const std::string& where = "backbone") {
    ObjectReader r(j, where);
    BackboneSpec s;
    s.kind = parse_backbone_kind(r.get<std::string>("kind", to_string(s.kind)));
    s.identifier = r.get<std::string>("identifier", s.identifier);
    s.output_dim = r.get<std::size_t>("output_dim", s.output_dim);
    s.frozen = r.get<bool>("frozen", s.frozen);
    s.seed = r.get<std::uint64_t>("seed", s.seed);
    s.width = r.get<std::size_t>("width", s.width);
    r.finish();
    s.validate();
    return s;
}

inline Json to_json(const AdapterSpec& s) {
    return {{"layer_widths", s.layer_widths}, {"use_batch_normalization", s.use_batch_normalization}};
}

inline AdapterSpec adapter_spec_from_json(const Json& j, const std::string& where = "adapter") {
    ObjectReader r(j, where);
    AdapterSpec s;
    s.layer_widths = r.get<std::vector<std::size_t>>("layer_widths", s.layer_widths);
    s.use_batch_normalization = r.get<bool>("use_batch_normalization", s.use_batch_normalization);
    r.finish();
    return s;
}

inline Json to_json(const FrontNetSpec& s) {
    return {{"hidden_widths", s.hidden_widths},
            {"num_classes", s.num_classes},
            {"use_batch_normalization", s.use_batch_normalization},
            {"dropout_rate", s.dropout_rate}};
}

inline FrontNetSpec frontnet_spec_from_json(const Json& j, const std::string& where = "frontnet") {
    ObjectReader r(j, where);
    FrontNetSpec s;
    s.hidden_widths = r.get<std::vector<std::size_t>>("hidden_widths", s.hidden_widths);
    s.num_classes = r.get<std::size_t>("num_classes", s.num_classes);
    s.use_batch_normalization = r.get<bool>("use_batch_normalization", s.use_batch_normalization);
    s.dropout_rate = r.get<double>("dropout_rate", s.dropout_rate);
    r.finish();
    s.validate();
    return s;
}

inline Json to_json(const StudentSpec& s) {
    return {{"architecture", to_string(s.architecture)},
            {"num_classes", s.num_classes},
            {"dropout_rate", s.dropout_rate},
            {"seed", s.seed},
            {"width", s.width}};
}

inline StudentSpec student_spec_from_json(const Json& j, const std::string& where = "student") {
    ObjectReader r(j, where);
    StudentSpec s;
    s.architecture = parse_student_architecture(r.get<std::string>("architecture", to_string(s.architecture)));
    s.num_classes = r.get<std::size_t>("num_classes", s.num_classes);
    s.dropout_rate = r.get<double>("dropout_rate", s.dropout_rate);
    s.seed = r.get<std::uint64_t>("seed", s.seed);
    s.width = r.get<std::size_t>("width", s.width);
    r.finish();
    s.validate();
    return s;
}

}  // namespace vidkd
