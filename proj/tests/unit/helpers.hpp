#pragma once

#include <string>
#include <vector>

#include "rtdnas/supernet.hpp"

namespace testing {

inline rtdnas::OperationSpec op(const std::string& id, std::vector<double> lat, double quality = 0.5) {
  return rtdnas::OperationSpec{id, id, quality, std::move(lat)};
}

inline rtdnas::SkeletonConfig skeleton(int layers, int scales, int tensors, std::vector<rtdnas::OperationSpec> ops,
                                       std::vector<rtdnas::CellType> types = {rtdnas::CellType::expanding,
                                                                              rtdnas::CellType::non_scaling,
                                                                              rtdnas::CellType::contracting}) {
  rtdnas::SkeletonConfig cfg;
  cfg.n_layers = layers;
  cfg.n_scales = scales;
  cfg.n_tensors = tensors;
  cfg.cell_types = std::move(types);
  cfg.ops = std::move(ops);
  return cfg;
}

inline std::string config_path(const std::string& name) { return std::string(RTDNAS_CONFIG_DIR) + "/" + name; }

}  // namespace testing
