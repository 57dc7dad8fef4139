#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "radbar/datastore.hpp"
#include "radbar/image.hpp"
#include "radbar/retrieval.hpp"
#include "radbar/roimatch.hpp"
#include "radbar/service.hpp"
#include "radbar/synthetic.hpp"

namespace radbar::cli {

namespace {

struct BuildArgs {
  std::string manifest;
  std::string out;
  std::string embeddings;
  std::size_t rbc_side = 192;
  std::size_t rbc_angles = 16;
  std::string rbc_mode = "precompute";
  std::optional<std::size_t> cnnc_dim;
  std::size_t k1 = 50;
  std::size_t k2 = 10;
};

struct QueryArgs {
  std::string index;
  std::string image;
  std::string embeddings;
  std::optional<std::size_t> k1;
  std::optional<std::size_t> k2;
  bool json = false;
};

struct EvaluateArgs {
  std::string index;
  std::string manifest;
  std::string embeddings;
  std::string report;
  std::string cardinalities;
  bool hierarchical = false;
};

struct RoiArgs {
  std::string index;
  std::string image;
  std::string roi;
  std::vector<std::string> targets;
  bool from_query = false;
  std::string embeddings;
};

struct ServeArgs {
  std::string index;
  std::string listen = "127.0.0.1:8080";
  std::string static_dir;
  std::size_t max_upload = 16u << 20;
  std::size_t sessions = 256;
};

struct SynthArgs {
  std::string out;
  std::uint64_t seed = synthetic::Options{}.seed;
  std::size_t per_class = 20;
  std::size_t train_per_class = 16;
};

// Activations for a single query image: the record whose id equals the image
// file stem, or the only record in the file.
std::optional<ActivationVector> query_activations(const std::string& embeddings_path, const std::string& image_path) {
  if (embeddings_path.empty()) return std::nullopt;
  const auto records = read_embeddings(embeddings_path);
  const std::string stem = std::filesystem::path(image_path).stem().string();
  for (const auto& r : records) {
    if (r.image_id == stem) return r.activations;
  }
  if (records.size() == 1) return records.front().activations;
  throw NotFound("no activation record for query '" + stem + "' in " + embeddings_path);
}

int build_index_cmd(const BuildArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const Manifest manifest = read_manifest(a.manifest);
  if (manifest.records.empty()) throw InvalidInput("manifest " + a.manifest + " has no records");
  const auto images = manifest.images();

  IndexConfig cfg;
  cfg.rbc.side = a.rbc_side;
  cfg.rbc.angle_count = a.rbc_angles;
  cfg.rbc_mode = parse_rbc_mode(a.rbc_mode);
  cfg.k1 = a.k1;
  cfg.k2 = a.k2;
  if (a.cnnc_dim) cfg.cnnc_dim = *a.cnnc_dim;

  std::vector<std::optional<ActivationVector>> activations;
  if (!a.embeddings.empty()) {
    activations = align_embeddings(images, read_embeddings(a.embeddings));
    for (const auto& v : activations) {
      if (v && a.cnnc_dim && v->dimension() != *a.cnnc_dim) {
        throw InvalidInput("--cnnc-dim " + std::to_string(*a.cnnc_dim) + " disagrees with embedding dimension " +
                           std::to_string(v->dimension()));
      }
    }
  }
  const RetrievalIndex index = build_index(images, activations, cfg);
  save_index(a.out, index);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "entries:    " << index.size() << "\n"
      << "cnnc bits:  " << index.config().cnnc_dim << " (" << to_string(index.config().cnnc_source) << ")\n"
      << "rbc bits:   " << index.config().rbc.code_length() << " (" << to_string(index.config().rbc_mode) << ")\n"
      << "elapsed:    " << std::fixed << std::setprecision(3) << elapsed << " s\n"
      << "written to: " << a.out << "\n";
  return 0;
}

int query_cmd(const QueryArgs& a, std::ostream& out) {
  const RetrievalIndex index = load_index(a.index);
  const GrayImage image = load_grayscale(a.image);
  QueryOptions opts;
  opts.query_id = std::filesystem::path(a.image).stem().string();
  opts.k1 = a.k1;
  opts.k2 = a.k2;
  const auto result = retrieve(index, image, query_activations(a.embeddings, a.image), opts);
  if (a.json) {
    out << result_to_json(result) << "\n";
    return 0;
  }
  out << std::left << std::setw(6) << "rank" << std::setw(24) << "image_id" << std::setw(8) << "cnnc" << "rbc\n";
  for (const auto& h : result.hits) {
    out << std::setw(6) << h.final_rank << std::setw(24) << h.image_id << std::setw(8) << h.cnnc_distance
        << h.rbc_distance << "\n";
  }
  return 0;
}

int evaluate_cmd(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const RetrievalIndex index = load_index(a.index);
  const Manifest manifest = read_manifest(a.manifest);
  const auto images = manifest.images();
  std::vector<std::optional<ActivationVector>> activations(images.size());
  if (!a.embeddings.empty()) activations = align_embeddings(images, read_embeddings(a.embeddings));

  CardinalityTable table;
  if (!a.cardinalities.empty()) {
    table = load_cardinalities(a.cardinalities);
  } else if (index.cardinalities()) {
    table = *index.cardinalities();
  } else {
    throw InvalidInput("index has no label cardinalities; pass --cardinalities");
  }
  const ErrorMode mode = a.hierarchical ? ErrorMode::Hierarchical : ErrorMode::Literal;

  std::vector<FirstHit> first_hits;
  std::size_t tests = 0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.split != Split::Test) continue;
    ++tests;
    if (!img.irma) {
      ++skipped;
      continue;
    }
    QueryOptions opts;
    opts.query_id = img.image_id;
    const auto result = retrieve(index, load_grayscale(img.path), activations[i], opts);
    const auto& top = index.entries()[*index.find(result.hits.front().image_id)];
    if (!top.irma) {
      ++skipped;
      continue;
    }
    first_hits.push_back({img.image_id, top.image_id, *img.irma, *top.irma});
  }
  if (tests == 0) throw InvalidInput("manifest " + a.manifest + " has no test-split images");
  if (first_hits.empty()) throw InvalidInput("no labelled test queries to evaluate");

  EvaluationReport report = total_error(first_hits, table, mode);
  report.skipped = skipped;
  std::ofstream file(a.report);
  if (!file) throw Error("cannot write report " + a.report);
  file << report_to_json(report) << "\n";
  out << report_summary(report);
  if (skipped) err << "skipped " << skipped << " unlabelled queries\n";
  return 0;
}

int roi_match_cmd(const RoiArgs& a, std::ostream& out) {
  const RetrievalIndex index = load_index(a.index);
  const GrayImage query = load_grayscale(a.image);
  const Roi roi = parse_roi(a.roi);
  validate_roi(roi, query.width(), query.height());

  std::vector<std::string> ids = a.targets;
  if (a.from_query) {
    QueryOptions opts;
    opts.query_id = std::filesystem::path(a.image).stem().string();
    for (const auto& h : retrieve(index, query, query_activations(a.embeddings, a.image), opts).hits) {
      ids.push_back(h.image_id);
    }
  }
  if (ids.empty()) throw InvalidInput("no targets; pass --targets or --from-query");
  std::vector<RoiTarget> targets;
  for (const auto& id : ids) {
    const auto entry = index.find(id);
    if (!entry) throw NotFound("unknown target id '" + id + "'");
    targets.push_back({id, load_grayscale(index.entries()[*entry].path)});
  }
  out << roi_matches_to_json(roi_match(query, roi, targets), 2) << "\n";
  return 0;
}

int serve_cmd(const ServeArgs& a, std::ostream& out) {
  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) throw InvalidInput("--listen expects address:port");
  const std::string host = a.listen.substr(0, colon);
  const int port = std::stoi(a.listen.substr(colon + 1));
  ServiceOptions opts;
  opts.max_upload_bytes = a.max_upload;
  opts.session_capacity = a.sessions;
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  Service service(load_index(a.index), opts);
  out << "serving " << service.index().size() << " entries on http://" << a.listen << std::endl;
  if (!service.listen(host, port)) throw Error("cannot listen on " + a.listen);
  return 0;
}

int synth_cmd(const SynthArgs& a, std::ostream& out) {
  synthetic::Options opts;
  opts.seed = a.seed;
  opts.per_class = a.per_class;
  opts.train_per_class = a.train_per_class;
  const auto records = synthetic::write_dataset(a.out, opts);
  out << "wrote " << records.size() << " images and manifest.csv to " << a.out << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"radbar: binary-code image retrieval with Radon barcodes"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build-index", "Code a dataset manifest into an index file");
  build_cmd->add_option("--manifest", build.manifest, "Manifest CSV")->required();
  build_cmd->add_option("--out", build.out, "Index file to write")->required();
  build_cmd->add_option("--embeddings", build.embeddings, "Activation JSON-lines sidecar");
  build_cmd->add_option("--rbc-side", build.rbc_side, "RBC down-sampling side")->capture_default_str();
  build_cmd->add_option("--rbc-angles", build.rbc_angles, "RBC projection angles")->capture_default_str();
  build_cmd->add_option("--rbc-mode", build.rbc_mode, "precompute|lazy")
      ->check(CLI::IsMember({"precompute", "lazy"}))
      ->capture_default_str();
  build_cmd->add_option("--cnnc-dim", build.cnnc_dim, "CNNC bits (fallback: perfect square, default 1024)");
  build_cmd->add_option("--k1", build.k1, "Stage-1 candidate count")->capture_default_str();
  build_cmd->add_option("--k2", build.k2, "Returned hit count")->capture_default_str();

  QueryArgs query;
  auto* query_cmd_app = app.add_subcommand("query", "Retrieve the nearest images for one query image");
  query_cmd_app->add_option("--index", query.index)->required();
  query_cmd_app->add_option("--image", query.image)->required();
  query_cmd_app->add_option("--embeddings", query.embeddings, "Activations for the query image");
  query_cmd_app->add_option("--k1", query.k1);
  query_cmd_app->add_option("--k2", query.k2);
  query_cmd_app->add_flag("--json", query.json, "Emit the result as JSON");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "First-hit IRMA error over the test split");
  eval_cmd->add_option("--index", eval.index)->required();
  eval_cmd->add_option("--manifest", eval.manifest)->required();
  eval_cmd->add_option("--embeddings", eval.embeddings);
  eval_cmd->add_option("--report", eval.report, "JSON report to write")->required();
  eval_cmd->add_option("--cardinalities", eval.cardinalities, "Label cardinality table override (JSON)");
  eval_cmd->add_flag("--hierarchical", eval.hierarchical, "Propagate mismatches down each axis");

  RoiArgs roi;
  auto* roi_cmd = app.add_subcommand("roi-match", "Locate a query ROI in indexed images");
  roi_cmd->add_option("--index", roi.index)->required();
  roi_cmd->add_option("--image", roi.image)->required();
  roi_cmd->add_option("--roi", roi.roi, "x,y,w,h")->required();
  auto* targets_opt = roi_cmd->add_option("--targets", roi.targets, "Comma-separated target ids")->delimiter(',');
  auto* from_query_opt = roi_cmd->add_flag("--from-query", roi.from_query, "Use the query's retrieved hits");
  targets_opt->excludes(from_query_opt);
  roi_cmd->add_option("--embeddings", roi.embeddings);

  ServeArgs serve;
  auto* serve_cmd_app = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd_app->add_option("--index", serve.index)->required();
  serve_cmd_app->add_option("--listen", serve.listen, "address:port")->capture_default_str();
  serve_cmd_app->add_option("--static", serve.static_dir, "UI asset directory served at /");
  serve_cmd_app->add_option("--max-upload", serve.max_upload, "Upload limit in bytes")->capture_default_str();
  serve_cmd_app->add_option("--sessions", serve.sessions, "Query sessions kept in memory")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd_app = app.add_subcommand("make-synthetic", "Write the 10-class synthetic test dataset");
  synth_cmd_app->add_option("--out", synth.out)->required();
  synth_cmd_app->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd_app->add_option("--per-class", synth.per_class)->capture_default_str();
  synth_cmd_app->add_option("--train-per-class", synth.train_per_class)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*build_cmd) return build_index_cmd(build, out);
    if (*query_cmd_app) return query_cmd(query, out);
    if (*eval_cmd) return evaluate_cmd(eval, out, err);
    if (*roi_cmd) return roi_match_cmd(roi, out);
    if (*serve_cmd_app) return serve_cmd(serve, out);
    if (*synth_cmd_app) return synth_cmd(synth, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace radbar::cli
