#pragma once

// Named reference models used by the tests, the acceptance suite and the CLI.

#include "maplab/map_model.hpp"

#include <memory>
#include <string>
#include <vector>

namespace maplab {

struct FixtureInfo {
    std::string name;
    std::string description;
    bool continuous_time = false;
    /// Estimation problem (see mean_contrast_problem) rather than a MAP.
    bool estimation_problem = false;
};

const std::vector<FixtureInfo>& fixture_catalog();
bool has_fixture(const std::string& name);

/// Discrete-time fixture; continuous-time fixtures return their time-1 skeleton.
MapSpec fixture(const std::string& name, bool centered = true);

/// Continuous-time fixture (throws InvalidSpec for discrete-time names).
std::shared_ptr<const CtMapSpec> ct_fixture(const std::string& name, bool centered = true);

}  // namespace maplab
