#include "radbar/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>

#include <json.hpp>

#include "radbar/image.hpp"

namespace radbar {

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  throw InvalidInput("unknown split '" + std::string(text) + "', expected train or test");
}

std::string to_string(RbcMode mode) { return mode == RbcMode::Precompute ? "precompute" : "lazy"; }

RbcMode parse_rbc_mode(std::string_view text) {
  if (text == "precompute") return RbcMode::Precompute;
  if (text == "lazy") return RbcMode::Lazy;
  throw InvalidInput("unknown rbc mode '" + std::string(text) + "', expected precompute or lazy");
}

std::size_t IndexConfig::fallback_side() const {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cnnc_dim))));
  if (side == 0 || side * side != cnnc_dim) {
    throw InvalidInput("fallback descriptor needs a square CNNC dimension, got " + std::to_string(cnnc_dim));
  }
  return side;
}

// ---------------------------------------------------------------------------
// RetrievalIndex

struct RetrievalIndex::LazyRbc {
  std::mutex mutex;
  std::vector<std::optional<BitCode>> codes;
};

RetrievalIndex::RetrievalIndex(IndexConfig config, std::vector<IndexEntry> entries,
                               std::optional<CardinalityTable> cardinalities)
    : config_(config), entries_(std::move(entries)), cardinalities_(std::move(cardinalities)) {
  if (config_.k1 < 1 || config_.k2 < 1) throw InvalidInput("k1 and k2 must be >= 1");
  if (config_.cnnc_dim < 1) throw InvalidInput("CNNC dimension must be >= 1");
  if (config_.rbc.side < 2 || config_.rbc.angle_count < 1) throw InvalidInput("invalid RBC configuration");

  std::sort(entries_.begin(), entries_.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.image_id.empty()) throw InvalidInput("index entry with empty image_id");
    if (i > 0 && entries_[i - 1].image_id == e.image_id) {
      throw InvalidInput("duplicate image_id '" + e.image_id + "' in index");
    }
    if (e.cnnc.kind() != CodeKind::Cnnc || e.cnnc.length() != config_.cnnc_dim) {
      throw InvalidInput("entry '" + e.image_id + "' has a CNNC of " + std::to_string(e.cnnc.length()) +
                         " bits, index expects " + std::to_string(config_.cnnc_dim));
    }
    if (e.cnnc.config().source != config_.cnnc_source) {
      throw InvalidInput("entry '" + e.image_id + "' has a CNNC from the " + to_string(e.cnnc.config().source) +
                         " source, index uses " + to_string(config_.cnnc_source));
    }
    if (e.rbc) {
      if (e.rbc->kind() != CodeKind::Rbc || e.rbc->length() != config_.rbc.code_length()) {
        throw InvalidInput("entry '" + e.image_id + "' has an RBC of " + std::to_string(e.rbc->length()) +
                           " bits, index expects " + std::to_string(config_.rbc.code_length()));
      }
    } else if (config_.rbc_mode == RbcMode::Precompute) {
      throw InvalidInput("entry '" + e.image_id + "' lacks an RBC in precompute mode");
    }
  }

  words_per_code_ = words_for_bits(config_.cnnc_dim);
  packed_cnnc_.reserve(entries_.size() * words_per_code_);
  for (const auto& e : entries_) packed_cnnc_.insert(packed_cnnc_.end(), e.cnnc.words().begin(), e.cnnc.words().end());

  lazy_ = std::make_shared<LazyRbc>();
  lazy_->codes.resize(entries_.size());
}

std::optional<std::size_t> RetrievalIndex::find(std::string_view image_id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), image_id,
                             [](const IndexEntry& e, std::string_view id) { return e.image_id < id; });
  if (it == entries_.end() || it->image_id != image_id) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

const BitCode& RetrievalIndex::rbc(std::size_t entry) const {
  const auto& e = entries_.at(entry);
  if (e.rbc) return *e.rbc;
  {
    std::lock_guard lock(lazy_->mutex);
    if (lazy_->codes[entry]) return *lazy_->codes[entry];
  }
  // Computed outside the lock; every thread arrives at the same code, so the
  // first insert wins and the rest are discarded.
  BitCode code = radon_barcode(load_grayscale(e.path), config_.rbc, Execution::Serial);
  std::lock_guard lock(lazy_->mutex);
  if (!lazy_->codes[entry]) lazy_->codes[entry] = std::move(code);
  return *lazy_->codes[entry];
}

bool RetrievalIndex::operator==(const RetrievalIndex& other) const {
  return config_ == other.config_ && entries_ == other.entries_ && cardinalities_ == other.cardinalities_;
}

// ---------------------------------------------------------------------------
// Build

RetrievalIndex build_index(std::span<const DatasetImage> images,
                           std::span<const std::optional<ActivationVector>> activations, IndexConfig config,
                           Execution exec) {
  if (images.empty()) throw InvalidInput("dataset is empty");
  const bool external = !activations.empty();
  if (external && activations.size() != images.size()) {
    throw InvalidInput("activation list is not aligned with the dataset");
  }

  std::vector<std::size_t> train;
  std::set<std::string_view> ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!ids.insert(images[i].image_id).second) {
      throw InvalidInput("duplicate image_id '" + images[i].image_id + "'");
    }
    if (images[i].split == Split::Train) train.push_back(i);
  }
  if (train.empty()) throw InvalidInput("dataset has no train-split images");

  if (external) {
    std::optional<std::size_t> dim;
    for (std::size_t i : train) {
      if (!activations[i]) throw NotFound("no activation record for image '" + images[i].image_id + "'");
      if (dim && activations[i]->dimension() != *dim) {
        throw InvalidInput("activation record for '" + images[i].image_id + "' has dimension " +
                           std::to_string(activations[i]->dimension()) + ", expected " + std::to_string(*dim));
      }
      dim = activations[i]->dimension();
    }
    config.cnnc_source = ActivationSource::External;
    config.cnnc_dim = *dim;
  } else {
    config.cnnc_source = ActivationSource::Fallback;
    config.fallback_side();
  }

  std::vector<IndexEntry> entries(train.size());
  std::vector<std::exception_ptr> failures(train.size());
  const auto count = static_cast<std::ptrdiff_t>(train.size());
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const auto slot = static_cast<std::size_t>(t);
    const DatasetImage& src = images[train[slot]];
    try {
      const GrayImage img = load_grayscale(src.path);
      IndexEntry entry{src.image_id, src.path, src.split, src.irma, {}, std::nullopt};
      entry.cnnc = external ? binarize_activations(*activations[train[slot]], ActivationSource::External)
                            : binarize_activations(fallback_descriptor(img, config.fallback_side()),
                                                   ActivationSource::Fallback);
      if (config.rbc_mode == RbcMode::Precompute) entry.rbc = radon_barcode(img, config.rbc, Execution::Serial);
      entries[slot] = std::move(entry);
    } catch (...) {
      failures[slot] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<IrmaCode> labels;
  for (const auto& e : entries) {
    if (e.irma) labels.push_back(*e.irma);
  }
  std::optional<CardinalityTable> table;
  if (!labels.empty()) table = build_cardinalities(labels);
  return RetrievalIndex(config, std::move(entries), std::move(table));
}

// ---------------------------------------------------------------------------
// Query

std::vector<Candidate> stage1_candidates(const RetrievalIndex& index, const BitCode& query_cnnc, std::size_t k1,
                                         Execution exec) {
  if (index.size() == 0) throw InvalidInput("index is empty");
  if (k1 < 1) throw InvalidInput("k1 must be >= 1");
  if (query_cnnc.kind() != CodeKind::Cnnc || query_cnnc.length() != index.config().cnnc_dim) {
    throw InvalidInput("query CNNC has " + std::to_string(query_cnnc.length()) + " bits, index expects " +
                       std::to_string(index.config().cnnc_dim));
  }
  std::vector<std::uint32_t> distances(index.size());
  if (exec == Execution::Serial) {
    kernels::serial::hamming_scan(index.packed_cnnc(), index.words_per_code(), query_cnnc.words(), distances);
  } else {
    kernels::parallel::hamming_scan(index.packed_cnnc(), index.words_per_code(), query_cnnc.words(), distances);
  }

  // Entries are sorted by image_id, so position order is the id tie-break.
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = std::min(k1, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return distances[a] != distances[b] ? distances[a] < distances[b] : a < b;
                    });
  std::vector<Candidate> out(keep);
  for (std::size_t i = 0; i < keep; ++i) out[i] = {order[i], distances[order[i]]};
  return out;
}

std::vector<Hit> stage2_rerank(const RetrievalIndex& index, std::span<const Candidate> candidates,
                               const BitCode& query_rbc, std::size_t k2) {
  if (candidates.empty()) throw InvalidInput("no candidates to re-rank");
  if (k2 < 1) throw InvalidInput("k2 must be >= 1");
  if (query_rbc.kind() != CodeKind::Rbc || query_rbc.length() != index.config().rbc.code_length()) {
    throw InvalidInput("query RBC has " + std::to_string(query_rbc.length()) + " bits, index expects " +
                       std::to_string(index.config().rbc.code_length()));
  }

  struct Scored {
    std::size_t entry;
    std::uint32_t cnnc;
    std::uint32_t rbc;
  };
  std::vector<Scored> scored(candidates.size());
  std::vector<std::exception_ptr> failures(candidates.size());
  const auto count = static_cast<std::ptrdiff_t>(candidates.size());
  const bool lazy = index.config().rbc_mode == RbcMode::Lazy;
#pragma omp parallel for schedule(dynamic, 1) if (lazy)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const auto i = static_cast<std::size_t>(t);
    try {
      scored[i] = {candidates[i].entry, candidates[i].cnnc_distance, hamming(query_rbc, index.rbc(candidates[i].entry))};
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.rbc != b.rbc) return a.rbc < b.rbc;
    if (a.cnnc != b.cnnc) return a.cnnc < b.cnnc;
    return a.entry < b.entry;
  });
  const std::size_t keep = std::min(k2, scored.size());
  std::vector<Hit> hits;
  hits.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    hits.push_back({index.entries()[scored[i].entry].image_id, scored[i].cnnc, scored[i].rbc, i + 1});
  }
  return hits;
}

BitCode query_cnnc(const RetrievalIndex& index, const GrayImage& image,
                   const std::optional<ActivationVector>& activations) {
  const auto& config = index.config();
  if (activations) {
    if (config.cnnc_source != ActivationSource::External) {
      throw InvalidInput("index was built from fallback descriptors; query activations cannot be mixed in");
    }
    if (activations->dimension() != config.cnnc_dim) {
      throw InvalidInput("query activations have dimension " + std::to_string(activations->dimension()) +
                         ", index expects " + std::to_string(config.cnnc_dim));
    }
    return binarize_activations(*activations, ActivationSource::External);
  }
  if (config.cnnc_source != ActivationSource::Fallback) {
    throw InvalidInput("index was built from external activations; the query needs an activation vector");
  }
  return binarize_activations(fallback_descriptor(image, config.fallback_side()), ActivationSource::Fallback);
}

RetrievalResult retrieve(const RetrievalIndex& index, const GrayImage& query_image,
                         const std::optional<ActivationVector>& query_activations, const QueryOptions& options) {
  if (index.size() == 0) throw InvalidInput("index is empty");
  const BitCode cnnc = query_cnnc(index, query_image, query_activations);
  const BitCode rbc = radon_barcode(query_image, index.config().rbc, options.exec);
  const auto candidates = stage1_candidates(index, cnnc, options.k1.value_or(index.config().k1), options.exec);

  RetrievalResult result;
  result.query_id = options.query_id;
  result.hits = stage2_rerank(index, candidates, rbc, options.k2.value_or(index.config().k2));
  if (options.label && index.cardinalities() && !result.hits.empty()) {
    const auto& top = index.entries()[*index.find(result.hits.front().image_id)];
    if (top.irma) result.first_hit_error = irma_error(*options.label, *top.irma, *index.cardinalities(), options.error_mode);
  }
  return result;
}

std::string result_to_json(const RetrievalResult& result, int indent) {
  nlohmann::json doc;
  doc["query_id"] = result.query_id;
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : result.hits) {
    hits.push_back({{"image_id", h.image_id},
                    {"cnnc_distance", h.cnnc_distance},
                    {"rbc_distance", h.rbc_distance},
                    {"final_rank", h.final_rank}});
  }
  doc["hits"] = std::move(hits);
  if (result.first_hit_error) doc["first_hit_error"] = *result.first_hit_error;
  return doc.dump(indent);
}

}  // namespace radbar
