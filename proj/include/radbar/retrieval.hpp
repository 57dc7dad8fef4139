#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radbar/barcode.hpp"
#include "radbar/bitcode.hpp"
#include "radbar/irma.hpp"
#include "radbar/kernels.hpp"

namespace radbar {

enum class Split { Train, Test };
enum class RbcMode { Precompute, Lazy };

std::string to_string(Split split);
Split parse_split(std::string_view text);
std::string to_string(RbcMode mode);
RbcMode parse_rbc_mode(std::string_view text);

struct IndexConfig {
  std::size_t cnnc_dim = 1024;
  ActivationSource cnnc_source = ActivationSource::Fallback;
  RbcConfig rbc;
  std::size_t k1 = 50;
  std::size_t k2 = 10;
  RbcMode rbc_mode = RbcMode::Precompute;

  /// Side of the fallback descriptor grid; cnnc_dim must be a perfect square.
  std::size_t fallback_side() const;
  bool operator==(const IndexConfig&) const = default;
};

struct IndexEntry {
  std::string image_id;
  std::string path;
  Split split = Split::Train;
  std::optional<IrmaCode> irma;
  BitCode cnnc;
  std::optional<BitCode> rbc;

  bool operator==(const IndexEntry&) const = default;
};

/// Searchable corpus. Immutable after construction apart from the lazy RBC
/// memo, which is race-safe and idempotent.
class RetrievalIndex {
 public:
  /// Sorts entries by image_id and validates uniqueness and code lengths.
  RetrievalIndex(IndexConfig config, std::vector<IndexEntry> entries,
                 std::optional<CardinalityTable> cardinalities = std::nullopt);

  const IndexConfig& config() const { return config_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const std::optional<CardinalityTable>& cardinalities() const { return cardinalities_; }

  std::optional<std::size_t> find(std::string_view image_id) const;

  /// Row-major CNNC words, words_per_code() per entry, in entry order.
  std::span<const std::uint64_t> packed_cnnc() const { return packed_cnnc_; }
  std::size_t words_per_code() const { return words_per_code_; }

  /// Stored RBC, or (lazy mode) computed from the entry's image and cached.
  const BitCode& rbc(std::size_t entry) const;

  bool operator==(const RetrievalIndex& other) const;

 private:
  struct LazyRbc;

  IndexConfig config_;
  std::vector<IndexEntry> entries_;
  std::optional<CardinalityTable> cardinalities_;
  std::vector<std::uint64_t> packed_cnnc_;
  std::size_t words_per_code_ = 0;
  std::shared_ptr<LazyRbc> lazy_;
};

struct Candidate {
  std::size_t entry = 0;
  std::uint32_t cnnc_distance = 0;

  bool operator==(const Candidate&) const = default;
};

struct Hit {
  std::string image_id;
  std::uint32_t cnnc_distance = 0;
  std::uint32_t rbc_distance = 0;
  std::size_t final_rank = 0;

  bool operator==(const Hit&) const = default;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<Hit> hits;
  std::optional<double> first_hit_error;

  bool operator==(const RetrievalResult&) const = default;
};

struct DatasetImage {
  std::string image_id;
  std::string path;
  Split split = Split::Train;
  std::optional<IrmaCode> irma;
};

/// Codes every train-split image. When `activations` is non-empty it is
/// aligned with `images` and every train image needs a vector; CNNCs then
/// come from it instead of the fallback descriptor. Cardinalities are derived
/// from the labelled train images.
RetrievalIndex build_index(std::span<const DatasetImage> images,
                           std::span<const std::optional<ActivationVector>> activations, IndexConfig config,
                           Execution exec = Execution::Parallel);

/// min(k1, size) entries with the smallest CNNC distance, ties by image_id.
std::vector<Candidate> stage1_candidates(const RetrievalIndex& index, const BitCode& query_cnnc, std::size_t k1,
                                         Execution exec = Execution::Parallel);

/// Re-sorts by (RBC distance, CNNC distance, image_id) and keeps k2.
std::vector<Hit> stage2_rerank(const RetrievalIndex& index, std::span<const Candidate> candidates,
                               const BitCode& query_rbc, std::size_t k2);

/// CNNC for a query image under the index's activation source. Supplying
/// activations to a fallback index, or omitting them for an external one,
/// is rejected.
BitCode query_cnnc(const RetrievalIndex& index, const GrayImage& image,
                   const std::optional<ActivationVector>& activations);

struct QueryOptions {
  std::string query_id;
  std::optional<std::size_t> k1;
  std::optional<std::size_t> k2;
  std::optional<IrmaCode> label;
  ErrorMode error_mode = ErrorMode::Literal;
  Execution exec = Execution::Parallel;
};

RetrievalResult retrieve(const RetrievalIndex& index, const GrayImage& query_image,
                         const std::optional<ActivationVector>& query_activations, const QueryOptions& options = {});

/// {query_id, hits: [{image_id, cnnc_distance, rbc_distance, final_rank}], first_hit_error?}
std::string result_to_json(const RetrievalResult& result, int indent = -1);

}  // namespace radbar
