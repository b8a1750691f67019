#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdsim {

/// Invalid or inconsistent configuration / input data.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver failed to reach its tolerance; carries the residual history.
struct solver_error : std::runtime_error {
    std::vector<double> residual_history;

    solver_error(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), residual_history(std::move(history)) {}
};

/// A diagnostic was requested below the resolution the grid can support.
struct resolution_error : std::runtime_error {
    explicit resolution_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mdsim
