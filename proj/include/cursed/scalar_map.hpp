#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace cursed {

/// Closed catalogue of monotone scalar maps used by valuation families and
/// quantile descriptors. Each entry has an analytic derivative and inverse.
struct Identity {};

/// a*x + b
struct Affine {
    double a = 1.0;
    double b = 0.0;
};

/// x^p, p > 0, defined for x >= 0
struct Power {
    double exponent = 1.0;
};

/// log(1 + scale*x), scale > 0
struct Log1pScaled {
    double scale = 1.0;
};

using ScalarMapKind = std::variant<Identity, Affine, Power, Log1pScaled>;

class ScalarMap {
public:
    ScalarMap() = default;
    ScalarMap(ScalarMapKind kind) : kind_(kind) { validate(); }  // NOLINT(google-explicit-constructor)

    static ScalarMap identity() { return ScalarMap(Identity{}); }
    static ScalarMap affine(double a, double b) { return ScalarMap(Affine{a, b}); }
    static ScalarMap power(double p) { return ScalarMap(Power{p}); }
    static ScalarMap log1p_scaled(double k) { return ScalarMap(Log1pScaled{k}); }

    [[nodiscard]] const ScalarMapKind& kind() const { return kind_; }

    [[nodiscard]] double operator()(double x) const {
        return std::visit(
            [x](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, Identity>) return x;
                else if constexpr (std::is_same_v<M, Affine>) return m.a * x + m.b;
                else if constexpr (std::is_same_v<M, Power>) return std::pow(std::max(x, 0.0), m.exponent);
                else return std::log1p(m.scale * x);
            },
            kind_);
    }

    [[nodiscard]] double derivative(double x) const {
        return std::visit(
            [x](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, Identity>) return 1.0;
                else if constexpr (std::is_same_v<M, Affine>) return m.a;
                else if constexpr (std::is_same_v<M, Power>) {
                    if (m.exponent == 1.0) return 1.0;
                    return m.exponent * std::pow(std::max(x, 0.0), m.exponent - 1.0);
                } else return m.scale / (1.0 + m.scale * x);
            },
            kind_);
    }

    [[nodiscard]] double inverse(double y) const {
        return std::visit(
            [y](const auto& m) -> double {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, Identity>) return y;
                else if constexpr (std::is_same_v<M, Affine>) return (y - m.b) / m.a;
                else if constexpr (std::is_same_v<M, Power>) return std::pow(std::max(y, 0.0), 1.0 / m.exponent);
                else return std::expm1(y) / m.scale;
            },
            kind_);
    }

    /// Linear maps commute with expectation.
    [[nodiscard]] bool is_affine() const {
        return std::holds_alternative<Identity>(kind_) || std::holds_alternative<Affine>(kind_);
    }

    /// Concave on [0, inf).
    [[nodiscard]] bool is_concave() const {
        if (const auto* p = std::get_if<Power>(&kind_)) return p->exponent <= 1.0;
        return true;
    }

    [[nodiscard]] std::string name() const {
        return std::visit(
            [](const auto& m) -> std::string {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, Identity>) return "identity";
                else if constexpr (std::is_same_v<M, Affine>) return "affine";
                else if constexpr (std::is_same_v<M, Power>) return "power";
                else return "log1p";
            },
            kind_);
    }

    friend bool operator==(const ScalarMap& a, const ScalarMap& b) {
        if (a.kind_.index() != b.kind_.index()) return false;
        return std::visit(
            [&b](const auto& m) -> bool {
                using M = std::decay_t<decltype(m)>;
                const auto& o = std::get<M>(b.kind_);
                if constexpr (std::is_same_v<M, Identity>) return true;
                else if constexpr (std::is_same_v<M, Affine>) return m.a == o.a && m.b == o.b;
                else if constexpr (std::is_same_v<M, Power>) return m.exponent == o.exponent;
                else return m.scale == o.scale;
            },
            a.kind_);
    }

private:
    void validate() const {
        if (const auto* a = std::get_if<Affine>(&kind_); a && !(a->a > 0.0))
            throw std::invalid_argument("affine map needs a positive slope");
        if (const auto* p = std::get_if<Power>(&kind_); p && !(p->exponent > 0.0))
            throw std::invalid_argument("power map needs a positive exponent");
        if (const auto* l = std::get_if<Log1pScaled>(&kind_); l && !(l->scale > 0.0))
            throw std::invalid_argument("log1p map needs a positive scale");
    }

    ScalarMapKind kind_ = Identity{};
};

}  // namespace cursed
