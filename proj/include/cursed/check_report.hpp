#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cursed {

/// One concrete counterexample found by a checker.
struct Witness {
    std::vector<double> profile;
    std::optional<std::size_t> agent;
    std::optional<double> deviation;  // misreported bid, when the check involves one
    double margin = 0.0;              // size of the violation
};

/// Machine-readable result of a sampled property check.
struct CheckReport {
    std::string property;
    bool passed = true;
    std::size_t samples_checked = 0;
    double max_violation = 0.0;
    double tolerance = 0.0;
    std::vector<Witness> witnesses;
    std::map<std::string, double> metrics;  // checker-specific diagnostics
    std::string note;

    static constexpr std::size_t kMaxWitnesses = 8;

    /// Record a violation of size `margin` (only margins above tolerance count).
    void record(double margin, Witness w) {
        if (!(margin > tolerance)) return;
        max_violation = std::max(max_violation, margin);
        if (witnesses.size() < kMaxWitnesses) {
            w.margin = margin;
            witnesses.push_back(std::move(w));
        }
    }

    /// Tracks the largest margin even when it is below tolerance.
    void observe(double margin) { max_violation = std::max(max_violation, std::max(margin, 0.0)); }

    void finalize() { passed = max_violation <= tolerance; }

    /// Order-independent merge (max + concat).
    void merge(const CheckReport& other) {
        samples_checked += other.samples_checked;
        max_violation = std::max(max_violation, other.max_violation);
        for (const auto& w : other.witnesses)
            if (witnesses.size() < kMaxWitnesses) witnesses.push_back(w);
    }
};

}  // namespace cursed
