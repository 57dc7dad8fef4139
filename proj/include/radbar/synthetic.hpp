#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "radbar/datastore.hpp"
#include "radbar/image.hpp"

namespace radbar::synthetic {

/// Ten visually distinct classes of shapes and textures, each tagged with its
/// own IRMA code.
inline constexpr std::size_t kClassCount = 10;

const std::string& class_name(std::size_t cls);
const std::string& class_irma(std::size_t cls);

/// One jittered, noisy sample of class `cls` (side 56..72 px per axis).
GrayImage render(std::size_t cls, std::mt19937_64& rng);

struct Options {
  std::size_t per_class = 20;
  std::size_t train_per_class = 16;
  std::uint64_t seed = 20170101;
};

/// Writes PGM images plus manifest.csv into `dir` and returns the records.
/// image_ids are "c<class>_<n>".
std::vector<ManifestRecord> write_dataset(const std::filesystem::path& dir, const Options& options = {});

/// Class index encoded in a synthetic image_id.
std::size_t class_of(const std::string& image_id);

}  // namespace radbar::synthetic
