#pragma once
// QA pair generation from Documents and the sampled quality-check workflow.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aed/backends.hpp"
#include "aed/core.hpp"

namespace aed::qagen {

struct QaGenConfig {
  int pairs_per_text = 2;
  int pairs_per_table = 2;
  int pairs_per_chart = 2;
  uint64_t seed = 0;
  double manual_ratio = 0.25;
};

// Empty iff counts are >= 0 and manual_ratio is in [0,1].
std::vector<std::string> validate_qagen_config(const QaGenConfig& cfg);

struct UnparseableGeneration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationResult {
  std::vector<QAPair> pairs;
  std::vector<std::string> warnings;  // filtered yes/no pairs, pruned duplicates, ...
};

// Text and table pairs come from the chat backend, chart pairs from the
// vision backend one chart at a time. Yes/no pairs are filtered; pairs whose
// answer duplicates an earlier one for the same document are pruned.
GenerationResult generate_qa_pairs(const Document& doc, const QaGenConfig& cfg,
                                   backends::ChatBackend& chat,
                                   backends::VisionBackend* vision);

// Parses "Q: ... / A: ..." blocks. Throws UnparseableGeneration on a
// dangling Q:, an A: with no question, or no block at all.
std::vector<std::pair<std::string, std::string>> parse_qa_blocks(const std::string& reply);

struct QualityCheckResult {
  std::vector<QAPair> manual_queue;     // ceil(manual_ratio * n) sampled pairs
  std::vector<QAPair> model_verified;   // everything sent to the judge
  std::vector<QAPair> flagged;          // judged INVALID (subset of model_verified)
  std::vector<std::string> flag_reasons;  // parallel to flagged
  std::vector<std::string> errors;      // per-pair judge failures, non-fatal
};

// Seeded shuffle, manual sample first, judge on the rest. The partition
// manual_queue + model_verified covers the input exactly once.
// doc_markdown (doc_id -> markdown) is included in judge prompts when given.
QualityCheckResult quality_check(const std::vector<QAPair>& pairs, const QaGenConfig& cfg,
                                 backends::ChatBackend& judge,
                                 const std::map<std::string, std::string>* doc_markdown = nullptr);

// Fisher-Yates over the indices with a fixed bound mapping, so the same seed
// gives the same permutation on every platform.
std::vector<size_t> shuffled_indices(size_t n, uint64_t seed);

}  // namespace aed::qagen
