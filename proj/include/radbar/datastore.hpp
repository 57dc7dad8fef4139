#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radbar/barcode.hpp"
#include "radbar/irma.hpp"
#include "radbar/retrieval.hpp"

namespace radbar {

struct ManifestRecord {
  std::string image_id;
  std::string path;  // relative to the manifest's directory
  Split split = Split::Train;
  std::optional<IrmaCode> irma_code;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  /// Records with paths resolved against `root`.
  std::vector<DatasetImage> images() const;
};

/// CSV with header image_id,path,split,irma_code. Errors name the 1-based
/// line number.
Manifest read_manifest(const std::filesystem::path& path);
std::vector<ManifestRecord> parse_manifest(const std::string& text);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct EmbeddingRecord {
  std::string image_id;
  ActivationVector activations;
};

/// JSON-lines: {"image_id": str, "activations": [numbers]} per line, uniform
/// dimension.
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);
std::vector<EmbeddingRecord> parse_embeddings(const std::string& text);

/// Aligns embeddings with dataset images by image_id; images without a
/// record get nullopt. Records naming unknown images are rejected.
std::vector<std::optional<ActivationVector>> align_embeddings(const std::vector<DatasetImage>& images,
                                                              const std::vector<EmbeddingRecord>& embeddings);

/// Index file: a header line {format, version, count, config, cardinalities}
/// followed by one JSON record per entry.
void save_index(const std::filesystem::path& path, const RetrievalIndex& index);
std::string serialize_index(const RetrievalIndex& index);
RetrievalIndex load_index(const std::filesystem::path& path);
RetrievalIndex deserialize_index(const std::string& text);

}  // namespace radbar
