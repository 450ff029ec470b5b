#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/json_util.hpp"

namespace vidkd {

struct EpochRecord {
    int epoch = 0;  // 1-based index of the completed epoch
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double learning_rate = 0.0;
    double ce_part = 0.0;
    double kl_part = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct RunHistory {
    std::vector<EpochRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    const EpochRecord& back() const { return records.back(); }

    bool operator==(const RunHistory&) const = default;
};

inline constexpr const char* kHistoryHeader = "epoch,train_loss,train_acc,val_loss,val_acc,lr,ce_part,kl_part";

inline std::string format_history_row(const EpochRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.epoch, r.train_loss,
                  r.train_accuracy, r.val_loss, r.val_accuracy, r.learning_rate, r.ce_part, r.kl_part);
    return buf;
}

inline void write_history_csv(const std::filesystem::path& path, const RunHistory& h) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write history '" + path.string() + "'");
    }
    out << kHistoryHeader << '\n';
    for (const auto& r : h.records) {
        out << format_history_row(r) << '\n';
    }
    if (!out) {
        throw IoError("failed writing history '" + path.string() + "'");
    }
}

/// Appends one epoch, writing the header first when the file is new or empty.
inline void append_history_csv(const std::filesystem::path& path, const EpochRecord& r) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw IoError("cannot append history '" + path.string() + "'");
    }
    if (fresh) {
        out << kHistoryHeader << '\n';
    }
    out << format_history_row(r) << '\n';
}

inline RunHistory read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open history '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) {
        throw FormatError(path.string() + ": missing or unexpected history header");
    }
    RunHistory h;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 8) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " columns, expected 8");
        }
        try {
            EpochRecord r;
            r.epoch = std::stoi(cells[0]);
            r.train_loss = std::stod(cells[1]);
            r.train_accuracy = std::stod(cells[2]);
            r.val_loss = std::stod(cells[3]);
            r.val_accuracy = std::stod(cells[4]);
            r.learning_rate = std::stod(cells[5]);
            r.ce_part = std::stod(cells[6]);
            r.kl_part = std::stod(cells[7]);
            h.records.push_back(r);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) + " is not numeric");
        }
    }
    return h;
}

inline Json to_json(const RunHistory& h) {
    Json arr = Json::array();
    for (const auto& r : h.records) {
        arr.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"train_accuracy", r.train_accuracy},
                       {"val_loss", r.val_loss},
                       {"val_accuracy", r.val_accuracy},
                       {"learning_rate", r.learning_rate},
                       {"ce_part", r.ce_part},
                       {"kl_part", r.kl_part}});
    }
    return arr;
}

inline RunHistory history_from_json(const Json& arr) {
    RunHistory h;
    for (const auto& j : arr) {
        EpochRecord r;
        r.epoch = j.at("epoch").get<int>();
        r.train_loss = j.at("train_loss").get<double>();
        r.train_accuracy = j.at("train_accuracy").get<double>();
        r.val_loss = j.at("val_loss").get<double>();
        r.val_accuracy = j.at("val_accuracy").get<double>();
        r.learning_rate = j.at("learning_rate").get<double>();
        r.ce_part = j.at("ce_part").get<double>();
        r.kl_part = j.at("kl_part").get<double>();
        h.records.push_back(r);
    }
    return h;
}

}  // namespace vidkd
