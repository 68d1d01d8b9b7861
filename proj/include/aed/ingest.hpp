#pragma once
// HTML-to-Document conversion: Markdown body with placeholder substitution,
// tuple-encoded tables, chart manifest, and corpus (de)serialization.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aed/core.hpp"

namespace aed::ingest {

struct IngestReport {
  std::string doc_id;
  int tables_found = 0;
  int charts_found = 0;
  std::vector<std::string> warnings;
};

struct IngestResult {
  Document doc;
  IngestReport report;
};

struct UnparseableHtml : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotATable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationFailed : std::runtime_error {
  ValidationFailed(std::string message, std::vector<std::string> violations_in)
      : std::runtime_error(std::move(message)), violations(std::move(violations_in)) {}
  std::vector<std::string> violations;
};

// Converts one webpage to a canonical Document. Body text is rendered as
// Markdown in source order; each <table> becomes the next `table{i}`
// placeholder line, each chart image the next `img{j}` line. Chart files are expected
// under asset_dir; a missing file is a warning, not a failure.
// Throws UnparseableHtml when no body content can be recovered.
IngestResult html_to_document(std::string_view html, const std::string& doc_id,
                              const std::filesystem::path& asset_dir);

// Flattens a single <table> element into (row label, column label, value)
// tuples. Header cells are <th> cells and cells inside <thead>; a table with
// neither treats its first row as the header row. colspan/rowspan are
// expanded so every covered position carries the spanned label; stacked
// header levels are joined by "/" into one flat label. Tuple order is
// row-major over data cells. Throws NotATable when the root element is not
// a table; an empty table yields an empty list.
std::vector<CellTuple> table_html_to_tuples(std::string_view table_html);

// Writes `{id}.md`, `{id}.table{i}.html`, `{id}.table{i}.json` and the
// corpus manifest `corpus.json` under out_dir. Every document must pass
// validate_document first; otherwise ValidationFailed carries the
// violations and nothing is written. Returns the manifest path.
std::filesystem::path build_manifest(const std::vector<Document>& docs,
                                     const std::filesystem::path& out_dir);

// Reads a corpus manifest back into Documents (structural inverse of
// build_manifest).
std::vector<Document> load_manifest(const std::filesystem::path& corpus_json);

}  // namespace aed::ingest
