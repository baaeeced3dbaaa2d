#pragma once

// Environment lookup by name: "point_mass", "pendulum", or "tabular:<path>".

#include "soac/pendulum.hpp"
#include "soac/point_mass.hpp"
#include "soac/tabular.hpp"

#include <memory>
#include <string>

namespace soac {

inline std::unique_ptr<ContinuousEnv> make_env(const std::string& name) {
  if (name == "point_mass") return std::make_unique<PointMassEnv>();
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name.rfind("tabular:", 0) == 0) {
    std::string path = name.substr(8);
    if (path.empty()) throw ConfigError("env: tabular needs a file path");
    return std::make_unique<TabularEnv>(TabularMDP::load(path));
  }
  throw ConfigError("env: unknown environment '" + name + "'");
}

}  // namespace soac
