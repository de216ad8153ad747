#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "vgpds/dataset.hpp"
#include "vgpds/kernels.hpp"
#include "vgpds/model.hpp"

namespace vgpds {

nlohmann::json temporal_kernel_to_json(const TemporalKernelSpec &spec);
TemporalKernelSpec temporal_kernel_from_json(const nlohmann::json &j);
// Accepts inline JSON text, or "@path" to read the document from a file.
TemporalKernelSpec parse_temporal_kernel(const std::string &text);

nlohmann::json model_to_json(const VgpdsModel &model);

/// Rebuilds a model from its checkpoint and the training data it was fitted
/// to. The data are needed for predictions; their checksum must match.
VgpdsModel model_from_json(const nlohmann::json &j, const TimeSeriesDataset &data);

void save_model(const std::string &path, const VgpdsModel &model);
// Loads the dataset from `data_path`, or from the path recorded in the
// checkpoint when none is given.
VgpdsModel load_model(const std::string &path, const std::optional<std::string> &data_path = std::nullopt);

}  // namespace vgpds
