#pragma once
// Keyword extraction from gold answers, KM / CLKM matching, corpus-level
// per-modality scoring, and answer-type classification.

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aed/core.hpp"

namespace aed::metrics {

enum class KeywordKind { Numeric, Term };

struct Keyword {
  std::string surface;     // as it appeared in the gold answer (width-folded)
  std::string normalized;  // canonical match form
  KeywordKind kind = KeywordKind::Term;

  bool operator==(const Keyword&) const = default;
};

struct MatchReport {
  bool hit = false;
  std::vector<Keyword> matched;
  std::vector<Keyword> missing;
  std::string note;  // diagnostic, e.g. when the gold answer yields no keywords
};

// Tokenization knobs. The defaults ship as data files as well (data/),
// both can be overridden from config.
struct KeywordConfig {
  std::vector<std::string> unit_suffixes;  // consumed after a numeric token
  std::set<std::string> stopwords;         // checked on the normalized form
  size_t min_term_len = 2;                 // in codepoints

  static KeywordConfig defaults();
  // One entry per line, '#' comments. Missing path keeps the defaults.
  void load_unit_suffixes(const std::filesystem::path& path);
  void load_stopwords(const std::filesystem::path& path);
};

// Cross-language equivalents for term keywords. Lookups are
// case-insensitive after NFC and case folding.
class Lexicon {
 public:
  void add(std::string_view term, std::vector<std::string> equivalents);
  const std::vector<std::string>* lookup(std::string_view term) const;
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // TSV: `term<TAB>equiv1|equiv2|...`, '#' comments, blank lines skipped.
  static Lexicon load_tsv(const std::filesystem::path& path);

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// NFC, full-width to half-width, case folding, thousands separators
// (commas flanked by digits) removed. Idempotent.
std::string canonicalize(std::string_view text);

// Numeric keywords: maximal digit/decimal tokens, thousands separators
// dropped, trailing '%' and unit suffixes stripped. Term keywords: CJK runs
// and ASCII-letter words of at least min_term_len, minus stopwords.
// Deduplicated preserving first occurrence. Empty gold yields no keywords.
std::vector<Keyword> extract_keywords(std::string_view gold,
                                      const KeywordConfig& cfg = KeywordConfig::defaults());

// Binary keyword match: every keyword of the gold answer must appear in the
// canonicalized generated answer. Numeric keywords require digit boundaries.
MatchReport km_match(std::string_view gold, std::string_view generated,
                     const KeywordConfig& cfg = KeywordConfig::defaults());

// KM relaxed so a term keyword may also match via any lexicon equivalent.
// Anything KM matches, CLKM matches.
MatchReport clkm_match(std::string_view gold, std::string_view generated,
                       const Lexicon& lexicon,
                       const KeywordConfig& cfg = KeywordConfig::defaults());

enum class AnswerType { Numerical, NonNumerical };

// Numerical iff the answer contains at least one ASCII or full-width digit.
AnswerType classify_answer_type(std::string_view answer);

struct SubsetScore {
  int count = 0;
  int km_hits = 0;
  int clkm_hits = 0;

  double km_pct() const { return count == 0 ? 0.0 : 100.0 * km_hits / count; }
  double clkm_pct() const { return count == 0 ? 0.0 : 100.0 * clkm_hits / count; }
};

// Per-modality-subset scores. A multi-modality question counts in each
// applicable subset, so subset counts may sum to more than `all.count`.
struct EvalReport {
  SubsetScore text;
  SubsetScore table;
  SubsetScore chart;
  SubsetScore all;
};

struct UnknownQaId : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scores `predictions` (qa_id -> generated answer) against the QA pairs.
// Missing predictions count as misses; a prediction whose qa_id is not in
// `qa` raises UnknownQaId.
EvalReport evaluate_corpus(const std::map<std::string, std::string>& predictions,
                           const std::vector<QAPair>& qa, const Lexicon& lexicon,
                           const KeywordConfig& cfg = KeywordConfig::defaults());

nlohmann::json to_json(const EvalReport& report);
// Aligned markdown table: one row of KM/CLKM per subset column, counts below.
std::string to_markdown(const EvalReport& report, std::string_view method = "aed");

}  // namespace aed::metrics
