#include <algorithm>

#include "poisonforge/errors.hpp"
#include "poisonforge/eval.hpp"

namespace poisonforge::eval {

// Published CIFAR-10 benchmark numbers used for regression tests and PCC
// analysis. table1: alignment gap, uniformity gap, and SimCLR test accuracy
// per attack. table2: per-algorithm accuracies plus the printed worst-case
// column.

const FixtureTable::Row& FixtureTable::row(const std::string& label) const {
    for (const auto& r : rows)
        if (r.label == label) return r;
    throw ConfigError("unknown fixture row: " + label);
}

std::vector<double> FixtureTable::column(const std::string& column_name) const {
    const auto it = std::find(columns.begin(), columns.end(), column_name);
    if (it == columns.end()) throw ConfigError("unknown fixture column: " + column_name);
    const std::size_t j = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.values[j]);
    return out;
}

const FixtureTable& table_fixture(const std::string& name) {
    static const FixtureTable table1 = {
        "table1",
        {"ag", "ug", "simclr_acc"},
        {
            {"DC", {0.12, 0.07, 86.1}},
            {"UE", {0.05, 0.03, 89.0}},
            {"AR", {0.07, 0.09, 88.8}},
            {"NTGA", {0.12, 0.12, 86.9}},
            {"SN", {0.08, 0.00, 90.6}},
            {"OPS", {0.04, 0.01, 86.7}},
            {"GUE", {0.07, 0.03, 88.8}},
            {"REM", {0.12, 0.04, 88.6}},
            {"EntF", {0.01, -0.04, 87.5}},
            {"HYPO", {0.11, 0.13, 86.9}},
            {"T-AP", {0.18, 0.44, 48.4}},
            {"UT-AP", {0.17, 0.77, 41.5}},
            {"SEP-FA-VR", {0.24, 0.25, 37.3}},
            {"CP", {0.55, 0.87, 38.7}},
            {"TUE", {0.30, 0.76, 48.1}},
            {"TP", {0.52, 0.82, 31.4}},
        },
    };

    static const FixtureTable table2 = {
        "table2",
        {"sl", "simclr", "moco", "byol", "simsiam", "worst_printed"},
        {
            {"Clean", {95.5, 91.3, 91.5, 92.3, 90.7, 95.5}},
            {"T-AP", {9.5, 48.4, 53.8, 53.0, 51.1, 53.8}},
            {"UT-AP", {9.6, 41.5, 31.5, 44.0, 42.8, 44.0}},
            {"SEP-FA-VR", {2.3, 37.3, 35.8, 42.8, 36.7, 42.8}},
            {"CP-SimCLR", {94.5, 38.7, 69.3, 79.5, 29.2, 94.5}},
            {"CP-MoCo", {94.5, 53.7, 47.9, 56.8, 47.1, 94.5}},
            {"CP-BYOL", {11.0, 39.3, 32.7, 41.8, 37.9, 41.8}},
            {"TUE-SimCLR", {10.6, 48.1, 71.2, 79.5, 39.0, 79.5}},
            {"TUE-MoCo", {10.1, 57.2, 51.6, 60.1, 58.5, 60.1}},
            {"TUE-SimSiam", {9.9, 82.5, 80.7, 84.3, 81.8, 84.3}},
            {"TP", {14.8, 31.4, 54.1, 61.8, 30.7, 61.8}},
            {"AUE", {18.9, 52.4, 57.0, 58.2, 34.5, 58.6}},
            {"T-AAP", {9.2, 39.1, 40.4, 43.3, 42.1, 43.3}},
            {"UT-AAP", {29.7, 32.3, 23.2, 35.5, 34.1, 35.5}},
        },
    };

    if (name == "table1") return table1;
    if (name == "table2") return table2;
    throw ConfigError("unknown fixture: " + name);
}

const std::vector<std::string>& table2_worst_discrepancies() {
    // The published worst for AUE (58.6) disagrees with its own row max (58.2).
    static const std::vector<std::string> rows = {"AUE"};
    return rows;
}

} // namespace poisonforge::eval
