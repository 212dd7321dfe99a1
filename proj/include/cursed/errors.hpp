#pragma once

#include <stdexcept>
#include <string>

namespace cursed {

/// The operation has no meaning for the given marginal or model (e.g. a density on a grid).
class UnsupportedOperation : public std::logic_error {
public:
    explicit UnsupportedOperation(const std::string& what) : std::logic_error(what) {}
};

/// The valuation model fails a structural precondition (e.g. single-crossing).
class ModelUnsupported : public std::invalid_argument {
public:
    explicit ModelUnsupported(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace cursed
