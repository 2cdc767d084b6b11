#pragma once
// On-disk round-trips for trained parameters and windowed datasets. Each
// artifact is a pair: a JSON header describing shapes, config, and the
// SHA-256 of the raw payload, next to a flat binary of 64-bit values.

#include <string>

#include "vollab/ingest.hpp"
#include "vollab/model.hpp"

namespace vollab {

// Writes prefix + ".json" and prefix + ".bin". The binary holds every tensor
// back to back in declaration order.
void save_params(const Parameters& p, const std::string& prefix);

// Validates the payload hash and all shapes before returning.
Parameters load_params(const std::string& prefix);

// Dataset blob: inputs, targets, split labels, asset indices, target dates;
// the sidecar records shape, split bounds, and preprocessing statistics.
void save_dataset(const WindowedDataset& ds, const std::string& prefix);
WindowedDataset load_dataset(const std::string& prefix);

// Whole-file helpers shared by the artifact writers.
void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace vollab
