#include "radbar/datastore.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace radbar {

using nlohmann::json;

namespace {

constexpr const char* kIndexFormat = "radbar-index";
constexpr int kIndexVersion = 1;

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound(std::string("cannot read ") + what + " " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Splits on \n, strips a trailing \r, and drops the empty tail produced by a
// final newline.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find(',', pos);
    fields.push_back(line.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  for (auto& f : fields) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    f = first == std::string::npos ? std::string() : f.substr(first, last - first + 1);
  }
  return fields;
}

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t") == std::string::npos; }

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

std::vector<ManifestRecord> parse_manifest(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || is_blank(lines.front())) throw InvalidInput("manifest is missing its header line");
  std::string header = lines.front();
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  if (split_csv(header) != std::vector<std::string>{"image_id", "path", "split", "irma_code"}) {
    throw InvalidInput("manifest header must be image_id,path,split,irma_code");
  }

  std::vector<ManifestRecord> records;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "manifest line " + std::to_string(i + 1);
    if (is_blank(lines[i])) continue;
    const auto fields = split_csv(lines[i]);
    if (fields.size() != 4) {
      throw InvalidInput(where + ": expected 4 fields, found " + std::to_string(fields.size()));
    }
    ManifestRecord rec;
    rec.image_id = fields[0];
    rec.path = fields[1];
    if (rec.image_id.empty()) throw InvalidInput(where + ": empty image_id");
    if (rec.path.empty()) throw InvalidInput(where + ": empty path");
    const std::filesystem::path rel = std::filesystem::path(rec.path).lexically_normal();
    if (rel.is_absolute() || (!rel.empty() && *rel.begin() == "..")) {
      throw InvalidInput(where + ": path '" + rec.path + "' escapes the dataset root");
    }
    try {
      rec.split = parse_split(fields[2]);
      if (!fields[3].empty()) rec.irma_code = IrmaCode::parse(fields[3]);
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + ": " + e.what());
    }
    if (!seen.insert(rec.image_id).second) throw InvalidInput(where + ": duplicate image_id '" + rec.image_id + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_text(path, "manifest");
  try {
    return Manifest{path.parent_path(), parse_manifest(text)};
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "image_id,path,split,irma_code\n";
  for (const auto& r : records) {
    out << r.image_id << ',' << r.path << ',' << to_string(r.split) << ','
        << (r.irma_code ? r.irma_code->hyphenated() : std::string()) << '\n';
  }
}

std::vector<DatasetImage> Manifest::images() const {
  std::vector<DatasetImage> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.image_id, (root / r.path).lexically_normal().string(), r.split, r.irma_code});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

std::vector<EmbeddingRecord> parse_embeddings(const std::string& text) {
  const auto lines = split_lines(text);
  std::vector<EmbeddingRecord> records;
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string where = "embeddings line " + std::to_string(i + 1);
    json doc;
    try {
      doc = json::parse(lines[i]);
    } catch (const json::exception&) {
      throw InvalidInput(where + ": malformed JSON or non-finite value");
    }
    if (!doc.is_object() || !doc.contains("image_id") || !doc["image_id"].is_string() ||
        !doc.contains("activations") || !doc["activations"].is_array()) {
      throw InvalidInput(where + ": expected {\"image_id\": string, \"activations\": [numbers]}");
    }
    std::vector<double> values;
    values.reserve(doc["activations"].size());
    for (const auto& v : doc["activations"]) {
      if (!v.is_number()) throw InvalidInput(where + ": activations must be numbers");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw InvalidInput(where + ": non-finite activation");
      values.push_back(x);
    }
    if (dim && values.size() != *dim) {
      throw InvalidInput(where + ": dimension " + std::to_string(values.size()) + " differs from " +
                         std::to_string(*dim));
    }
    dim = values.size();
    records.push_back({doc["image_id"].get<std::string>(), ActivationVector(std::move(values))});
  }
  return records;
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  const std::string text = read_text(path, "embeddings");
  try {
    return parse_embeddings(text);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

std::vector<std::optional<ActivationVector>> align_embeddings(const std::vector<DatasetImage>& images,
                                                              const std::vector<EmbeddingRecord>& embeddings) {
  std::map<std::string_view, std::size_t> slot;
  for (std::size_t i = 0; i < images.size(); ++i) slot.emplace(images[i].image_id, i);
  std::vector<std::optional<ActivationVector>> out(images.size());
  for (const auto& e : embeddings) {
    const auto it = slot.find(e.image_id);
    if (it == slot.end()) throw InvalidInput("embedding for unknown image_id '" + e.image_id + "'");
    if (out[it->second]) throw InvalidInput("duplicate embedding for image_id '" + e.image_id + "'");
    out[it->second] = e.activations;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Index persistence

std::string serialize_index(const RetrievalIndex& index) {
  const auto& cfg = index.config();
  json header;
  header["format"] = kIndexFormat;
  header["version"] = kIndexVersion;
  header["count"] = index.size();
  header["config"] = {{"cnnc_dim", cfg.cnnc_dim},
                      {"cnnc_source", to_string(cfg.cnnc_source)},
                      {"rbc_side", cfg.rbc.side},
                      {"rbc_angles", cfg.rbc.angle_count},
                      {"k1", cfg.k1},
                      {"k2", cfg.k2},
                      {"rbc_mode", to_string(cfg.rbc_mode)}};
  header["cardinalities"] =
      index.cardinalities() ? json::parse(cardinalities_to_json(*index.cardinalities())) : json(nullptr);

  std::string out = header.dump() + "\n";
  for (const auto& e : index.entries()) {
    json rec;
    rec["image_id"] = e.image_id;
    rec["path"] = e.path;
    rec["split"] = to_string(e.split);
    rec["irma"] = e.irma ? json(e.irma->hyphenated()) : json(nullptr);
    rec["cnnc_hex"] = e.cnnc.to_hex();
    rec["cnnc_bits"] = e.cnnc.length();
    rec["rbc_hex"] = e.rbc ? json(e.rbc->to_hex()) : json(nullptr);
    rec["rbc_bits"] = e.rbc ? json(e.rbc->length()) : json(nullptr);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_index(const std::filesystem::path& path, const RetrievalIndex& index) {
  const std::string text = serialize_index(index);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write index " + path.string());
  out << text;
  if (!out) throw Error("failed writing index " + path.string());
}

namespace {

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InvalidInput(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

RetrievalIndex deserialize_index(const std::string& text) {
  auto lines = split_lines(text);
  while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
  if (lines.empty()) throw InvalidInput("index file is empty");

  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::exception&) {
    throw InvalidInput("index header is not valid JSON");
  }
  if (!header.is_object() || header.value("format", "") != kIndexFormat) {
    throw InvalidInput("not a radbar index file");
  }
  if (require<int>(header, "version", "index header") != kIndexVersion) {
    throw InvalidInput("unsupported index version");
  }
  const auto count = require<std::size_t>(header, "count", "index header");
  if (!header.contains("config") || !header["config"].is_object()) throw InvalidInput("index header lacks config");
  const json& c = header["config"];
  IndexConfig cfg;
  try {
    cfg.cnnc_dim = require<std::size_t>(c, "cnnc_dim", "index config");
    cfg.cnnc_source = parse_activation_source(require<std::string>(c, "cnnc_source", "index config"));
    cfg.rbc.side = require<std::size_t>(c, "rbc_side", "index config");
    cfg.rbc.angle_count = require<std::size_t>(c, "rbc_angles", "index config");
    cfg.k1 = require<std::size_t>(c, "k1", "index config");
    cfg.k2 = require<std::size_t>(c, "k2", "index config");
    cfg.rbc_mode = parse_rbc_mode(require<std::string>(c, "rbc_mode", "index config"));
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string("index header: ") + e.what());
  }
  std::optional<CardinalityTable> table;
  if (header.contains("cardinalities") && !header["cardinalities"].is_null()) {
    table = cardinalities_from_json(header["cardinalities"].dump());
  }

  if (lines.size() - 1 != count) {
    throw InvalidInput("index header declares " + std::to_string(count) + " records but the file holds " +
                       std::to_string(lines.size() - 1));
  }

  CodeConfig cnnc_meta;
  cnnc_meta.dimension = cfg.cnnc_dim;
  cnnc_meta.source = cfg.cnnc_source;
  CodeConfig rbc_meta;
  rbc_meta.image_side = cfg.rbc.side;
  rbc_meta.angle_count = cfg.rbc.angle_count;

  std::vector<IndexEntry> entries;
  entries.reserve(count);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "index line " + std::to_string(i + 1);
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::exception&) {
      throw InvalidInput(where + ": malformed JSON");
    }
    if (!rec.is_object()) throw InvalidInput(where + ": expected an object");
    try {
      IndexEntry e;
      e.image_id = require<std::string>(rec, "image_id", where);
      e.path = require<std::string>(rec, "path", where);
      e.split = parse_split(require<std::string>(rec, "split", where));
      if (rec.contains("irma") && !rec["irma"].is_null()) e.irma = IrmaCode::parse(require<std::string>(rec, "irma", where));
      const auto cnnc_bits = require<std::size_t>(rec, "cnnc_bits", where);
      if (cnnc_bits != cfg.cnnc_dim) {
        throw InvalidInput("cnnc_bits " + std::to_string(cnnc_bits) + " disagrees with header cnnc_dim " +
                           std::to_string(cfg.cnnc_dim));
      }
      e.cnnc = BitCode::from_hex(require<std::string>(rec, "cnnc_hex", where), cnnc_bits, CodeKind::Cnnc, cnnc_meta);
      const bool has_rbc = rec.contains("rbc_hex") && !rec["rbc_hex"].is_null();
      if (has_rbc) {
        const auto rbc_bits = require<std::size_t>(rec, "rbc_bits", where);
        if (rbc_bits != cfg.rbc.code_length()) {
          throw InvalidInput("rbc_bits " + std::to_string(rbc_bits) + " disagrees with header rbc configuration (" +
                             std::to_string(cfg.rbc.code_length()) + ")");
        }
        e.rbc = BitCode::from_hex(require<std::string>(rec, "rbc_hex", where), rbc_bits, CodeKind::Rbc, rbc_meta);
      }
      entries.push_back(std::move(e));
    } catch (const InvalidInput& e) {
      const std::string msg = e.what();
      throw InvalidInput(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
  }
  return RetrievalIndex(cfg, std::move(entries), std::move(table));
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  const std::string text = read_text(path, "index");
  try {
    return deserialize_index(text);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

}  // namespace radbar
