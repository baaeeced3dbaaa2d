#pragma once

#include "soac/mat.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <string>

namespace soac {

inline constexpr const char* kCheckpointFormat = "soac-checkpoint-v1";

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Matf> tensors;

  void save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, m] : tensors) {
      nlohmann::json entry;
      entry["shape"] = {m.rows(), m.cols()};
      std::vector<double> data;
      data.reserve(size_t(m.size()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(double(m(r, c)));
      entry["data"] = std::move(data);
      params[name] = std::move(entry);
    }
    j["params"] = std::move(params);
    std::ofstream f(path);
    if (!f) throw ConfigError("checkpoint: cannot open for write: " + path);
    f << j.dump();
    if (!f.good()) throw ConfigError("checkpoint: write failed: " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("checkpoint: cannot open: " + path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("checkpoint: bad json in " + path + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != kCheckpointFormat)
      throw ConfigError("checkpoint: unrecognized format tag in " + path);
    Checkpoint ck;
    ck.meta = j.value("meta", nlohmann::json::object());
    if (!j.contains("params") || !j["params"].is_object())
      throw ConfigError("checkpoint: missing params map in " + path);
    for (const auto& [name, entry] : j["params"].items()) {
      if (!entry.contains("shape") || !entry.contains("data") ||
          entry["shape"].size() != 2)
        throw ConfigError("checkpoint: malformed entry " + name);
      Eigen::Index rows = entry["shape"][0].get<Eigen::Index>();
      Eigen::Index cols = entry["shape"][1].get<Eigen::Index>();
      const auto& data = entry["data"];
      if (Eigen::Index(data.size()) != rows * cols)
        throw ConfigError("checkpoint: data length mismatch for " + name);
      Matf m(rows, cols);
      size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = float(data[k++].get<double>());
      ck.tensors[name] = std::move(m);
    }
    return ck;
  }
};

}  // namespace soac
