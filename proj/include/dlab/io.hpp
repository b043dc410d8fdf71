#pragma once

#include "dlab/metrics.hpp"
#include "dlab/models.hpp"
#include "dlab/schedule.hpp"
#include "dlab/unroll.hpp"
#include "dlab/variational.hpp"

#include <cstdint>
#include <string>
#include <vector>

// JSON documents for models, grids, PWL denoisers, weights and reports.
// Matrices are stored row-major; doubles are written with 17 significant
// digits so every value round-trips exactly.

namespace dlab {

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

std::string grid_to_json(const TimeGrid& grid);
TimeGrid grid_from_json(const std::string& text);

std::string pwl_to_json(const PwlDenoiser& pwl);
PwlDenoiser pwl_from_json(const std::string& text);

std::string weights_to_json(const ResNetWeights& w);
/// A single network or a {"networks": [...]} bundle.
std::vector<ResNetWeights> weights_from_json(const std::string& text);
std::string weights_bundle_to_json(const std::vector<ResNetWeights>& nets);

std::string report_to_json(const EvalReport& report);
/// Header row plus one value row.
std::string report_to_csv(const EvalReport& report);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// FNV-1a, used to fingerprint models in manifests and reports.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace dlab
