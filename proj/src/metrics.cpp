#include "aed/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "aed/unicode.hpp"

namespace aed::metrics {

using nlohmann::json;

namespace {

// Ideographs only; CJK punctuation breaks term tokens.
bool is_cjk_letter(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}

bool is_ascii_letter(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

std::string fold_token(const std::vector<char32_t>& cps, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) uni::append_utf8(out, uni::fold_case(cps[i]));
  return out;
}

std::string slice_utf8(const std::vector<char32_t>& cps, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) uni::append_utf8(out, cps[i]);
  return out;
}

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> read_list_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open list file: " + path.string());
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    entries.push_back(std::move(t));
  }
  return entries;
}

}  // namespace

KeywordConfig KeywordConfig::defaults() {
  KeywordConfig cfg;
  cfg.unit_suffixes = {"亿元", "万元", "元", "万人", "吨"};
  cfg.stopwords = {
      // English function words
      "the", "a", "an", "of", "to", "in", "on", "at", "is", "are", "was", "were",
      "and", "or", "for", "with", "that", "this", "from", "by", "as", "be", "been",
      "it", "its",
      // Chinese function words (single characters fall below min_term_len anyway)
      "以及", "或者", "但是", "因为", "所以", "如果", "对于", "关于",
      "什么", "哪些", "怎么", "如何", "多少", "这个", "那个", "还是", "并且",
  };
  return cfg;
}

void KeywordConfig::load_unit_suffixes(const std::filesystem::path& path) {
  unit_suffixes = read_list_file(path);
}

void KeywordConfig::load_stopwords(const std::filesystem::path& path) {
  stopwords.clear();
  for (auto& entry : read_list_file(path)) stopwords.insert(canonicalize(entry));
}

// ---------------------------------------------------------------------------
// Lexicon

void Lexicon::add(std::string_view term, std::vector<std::string> equivalents) {
  entries_[canonicalize(term)] = std::move(equivalents);
}

const std::vector<std::string>* Lexicon::lookup(std::string_view term) const {
  auto it = entries_.find(canonicalize(term));
  return it == entries_.end() ? nullptr : &it->second;
}

Lexicon Lexicon::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon: " + path.string());
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t tab = t.find('\t');
    if (tab == std::string::npos) continue;
    std::string term = trim(t.substr(0, tab));
    std::vector<std::string> equivalents;
    std::stringstream rest(t.substr(tab + 1));
    std::string item;
    while (std::getline(rest, item, '|')) {
      std::string e = trim(item);
      if (!e.empty()) equivalents.push_back(std::move(e));
    }
    if (!term.empty() && !equivalents.empty()) lex.add(term, std::move(equivalents));
  }
  return lex;
}

// ---------------------------------------------------------------------------
// Canonicalization

std::string canonicalize(std::string_view text) {
  std::vector<char32_t> cps = uni::decode_utf8(uni::nfc(text));
  for (auto& cp : cps) cp = uni::fold_case(uni::fold_width(cp));
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < cps.size(); ++i) {
    // Thousands separator: a comma flanked by digits.
    if (cps[i] == U',' && i > 0 && i + 1 < cps.size() && uni::is_ascii_digit(cps[i - 1]) &&
        uni::is_ascii_digit(cps[i + 1])) {
      continue;
    }
    uni::append_utf8(out, cps[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keyword extraction

std::vector<Keyword> extract_keywords(std::string_view gold, const KeywordConfig& cfg) {
  // Width-fold without case folding so surfaces keep their original case.
  std::vector<char32_t> cps = uni::decode_utf8(uni::nfc(gold));
  for (auto& cp : cps) cp = uni::fold_width(cp);

  // Longest suffix first so "万元" wins over "元".
  std::vector<std::vector<char32_t>> suffixes;
  for (const auto& s : cfg.unit_suffixes) suffixes.push_back(uni::decode_utf8(s));
  std::sort(suffixes.begin(), suffixes.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });

  auto starts_with_at = [&](size_t pos, const std::vector<char32_t>& pat) {
    if (pat.empty() || pos + pat.size() > cps.size()) return false;
    for (size_t k = 0; k < pat.size(); ++k) {
      if (cps[pos + k] != pat[k]) return false;
    }
    return true;
  };

  std::vector<Keyword> keywords;
  std::set<std::pair<int, std::string>> seen;
  auto emit = [&](Keyword kw) {
    if (kw.normalized.empty()) return;
    if (seen.emplace(static_cast<int>(kw.kind), kw.normalized).second) {
      keywords.push_back(std::move(kw));
    }
  };

  const size_t n = cps.size();
  size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i];
    if (uni::is_ascii_digit(c)) {
      std::string surface;
      std::string normalized;
      bool seen_dot = false;
      size_t j = i;
      while (j < n) {
        const char32_t d = cps[j];
        if (uni::is_ascii_digit(d)) {
          uni::append_utf8(surface, d);
          uni::append_utf8(normalized, d);
          ++j;
        } else if (d == U',' && j + 1 < n && uni::is_ascii_digit(cps[j + 1])) {
          surface.push_back(',');  // thousands separator, not part of the value
          ++j;
        } else if (d == U'.' && !seen_dot && j + 1 < n && uni::is_ascii_digit(cps[j + 1])) {
          seen_dot = true;
          surface.push_back('.');
          normalized.push_back('.');
          ++j;
        } else {
          break;
        }
      }
      if (j < n && cps[j] == U'%') {
        surface.push_back('%');
        ++j;
      }
      for (const auto& suffix : suffixes) {
        if (starts_with_at(j, suffix)) {
          j += suffix.size();
          break;
        }
      }
      emit({std::move(surface), std::move(normalized), KeywordKind::Numeric});
      i = j;
    } else if (is_cjk_letter(c)) {
      size_t j = i;
      while (j < n && is_cjk_letter(cps[j])) ++j;
      if (j - i >= cfg.min_term_len) {
        std::string normalized = fold_token(cps, i, j);
        if (!cfg.stopwords.count(normalized)) {
          emit({slice_utf8(cps, i, j), std::move(normalized), KeywordKind::Term});
        }
      }
      i = j;
    } else if (is_ascii_letter(c)) {
      size_t j = i;
      while (j < n && is_ascii_letter(cps[j])) ++j;
      if (j - i >= cfg.min_term_len) {
        std::string normalized = fold_token(cps, i, j);
        if (!cfg.stopwords.count(normalized)) {
          emit({slice_utf8(cps, i, j), std::move(normalized), KeywordKind::Term});
        }
      }
      i = j;
    } else {
      ++i;
    }
  }
  return keywords;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

bool is_digit_or_dot(char b) { return (b >= '0' && b <= '9') || b == '.'; }

// Substring search with digit boundaries: the byte before and after the
// match must not be a digit or '.'. UTF-8 continuation bytes are >= 0x80 and
// never collide with these, so byte-level checks are exact.
bool numeric_occurs(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  size_t pos = haystack.find(needle);
  while (pos != std::string::npos) {
    const bool left_ok = pos == 0 || !is_digit_or_dot(haystack[pos - 1]);
    const size_t end = pos + needle.size();
    const bool right_ok = end >= haystack.size() || !is_digit_or_dot(haystack[end]);
    if (left_ok && right_ok) return true;
    pos = haystack.find(needle, pos + 1);
  }
  return false;
}

bool term_occurs(const std::string& haystack, const std::string& needle) {
  return !needle.empty() && haystack.find(needle) != std::string::npos;
}

MatchReport match_keywords(std::string_view gold, std::string_view generated,
                           const KeywordConfig& cfg, const Lexicon* lexicon) {
  MatchReport report;
  std::vector<Keyword> keywords = extract_keywords(gold, cfg);
  if (keywords.empty()) {
    report.hit = false;
    report.note = "no keywords extracted from gold answer";
    return report;
  }
  const std::string canon = canonicalize(generated);
  for (auto& kw : keywords) {
    bool found = false;
    if (kw.kind == KeywordKind::Numeric) {
      found = numeric_occurs(canon, kw.normalized);
    } else {
      found = term_occurs(canon, kw.normalized);
      if (!found && lexicon) {
        if (const auto* equivalents = lexicon->lookup(kw.normalized)) {
          for (const auto& eq : *equivalents) {
            if (term_occurs(canon, canonicalize(eq))) {
              found = true;
              break;
            }
          }
        }
      }
    }
    (found ? report.matched : report.missing).push_back(std::move(kw));
  }
  report.hit = report.missing.empty() && !report.matched.empty();
  return report;
}

}  // namespace

MatchReport km_match(std::string_view gold, std::string_view generated,
                     const KeywordConfig& cfg) {
  return match_keywords(gold, generated, cfg, nullptr);
}

MatchReport clkm_match(std::string_view gold, std::string_view generated,
                       const Lexicon& lexicon, const KeywordConfig& cfg) {
  return match_keywords(gold, generated, cfg, &lexicon);
}

AnswerType classify_answer_type(std::string_view answer) {
  for (char32_t cp : uni::decode_utf8(answer)) {
    if (uni::is_ascii_digit(cp) || uni::is_fullwidth_digit(cp)) return AnswerType::Numerical;
  }
  return AnswerType::NonNumerical;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

EvalReport evaluate_corpus(const std::map<std::string, std::string>& predictions,
                           const std::vector<QAPair>& qa, const Lexicon& lexicon,
                           const KeywordConfig& cfg) {
  std::set<std::string> known_ids;
  for (const auto& pair : qa) known_ids.insert(pair.id);
  for (const auto& [id, _] : predictions) {
    if (!known_ids.count(id)) throw UnknownQaId("prediction for unknown qa id: " + id);
  }

  EvalReport report;
  for (const auto& pair : qa) {
    bool km = false;
    bool clkm = false;
    auto it = predictions.find(pair.id);
    if (it != predictions.end()) {
      km = km_match(pair.gold_answer, it->second, cfg).hit;
      clkm = clkm_match(pair.gold_answer, it->second, lexicon, cfg).hit;
    }
    bool in_text = false, in_table = false, in_chart = false;
    for (const auto& m : pair.modalities) {
      in_text |= m.kind == Modality::Text;
      in_table |= m.kind == Modality::Table;
      in_chart |= m.kind == Modality::Chart;
    }
    auto tally = [&](SubsetScore& s) {
      ++s.count;
      s.km_hits += km ? 1 : 0;
      s.clkm_hits += clkm ? 1 : 0;
    };
    if (in_text) tally(report.text);
    if (in_table) tally(report.table);
    if (in_chart) tally(report.chart);
    tally(report.all);
  }
  return report;
}

json to_json(const EvalReport& report) {
  auto subset = [](const SubsetScore& s) {
    return json{{"count", s.count}, {"km", s.km_pct()}, {"clkm", s.clkm_pct()}};
  };
  return json{{"text", subset(report.text)},
              {"table", subset(report.table)},
              {"chart", subset(report.chart)},
              {"all", subset(report.all)}};
}

std::string to_markdown(const EvalReport& report, std::string_view method) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return std::string(buf);
  };
  std::vector<std::string> headers = {"Method",   "Text KM",  "Text CLKM", "Table KM",
                                      "Table CLKM", "Chart KM", "Chart CLKM", "All KM",
                                      "All CLKM"};
  std::vector<std::string> row = {std::string(method),
                                  pct(report.text.km_pct()),
                                  pct(report.text.clkm_pct()),
                                  pct(report.table.km_pct()),
                                  pct(report.table.clkm_pct()),
                                  pct(report.chart.km_pct()),
                                  pct(report.chart.clkm_pct()),
                                  pct(report.all.km_pct()),
                                  pct(report.all.clkm_pct())};
  std::vector<size_t> widths(headers.size());
  for (size_t i = 0; i < headers.size(); ++i) {
    widths[i] = std::max(headers[i].size(), row[i].size());
  }
  auto emit_row = [&](const std::vector<std::string>& cells) {
    std::string line = "|";
    for (size_t i = 0; i < cells.size(); ++i) {
      line += " " + cells[i] + std::string(widths[i] - cells[i].size(), ' ') + " |";
    }
    return line + "\n";
  };
  std::string out = emit_row(headers);
  std::string rule = "|";
  for (size_t w : widths) rule += std::string(w + 2, '-') + "|";
  out += rule + "\n";
  out += emit_row(row);
  out += "\nQuestions: text=" + std::to_string(report.text.count) +
         " table=" + std::to_string(report.table.count) +
         " chart=" + std::to_string(report.chart.count) +
         " all=" + std::to_string(report.all.count) + "\n";
  return out;
}

}  // namespace aed::metrics
