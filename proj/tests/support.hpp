#pragma once
// Shared helpers for the test suites: fixture paths, temp dirs, tiny asset
// writers, a process runner for the CLI binary, and the independent
// reference oracles the property tests compare against.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "aed/core.hpp"
#include "aed/ingest.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(AED_FIXTURE_DIR); }
inline fs::path data_dir() { return fs::path(AED_DATA_DIR); }
inline std::string cli_path() { return AED_CLI_PATH; }

// ---------------------------------------------------------------------------
// scratch files

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& label) {
    static std::atomic<uint64_t> counter{0};
    path = fs::temp_directory_path() /
           ("aed_" + label + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  fs::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const fs::path& p, std::string_view bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("test write failed: " + p.string());
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("test read failed: " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// Only the PNG magic matters: nothing in the pipeline decodes pixels.
inline std::string png_bytes(char filler = 'x') {
  std::string bytes("\x89PNG\r\n\x1a\n", 8);
  bytes.append(8, filler);
  return bytes;
}

inline void write_png(const fs::path& p, char filler = 'x') {
  write_file(p, png_bytes(filler));
}

// OCR sidecar next to the image, one token per text with a dummy box.
inline void write_ocr_sidecar(const fs::path& image,
                              const std::vector<std::string>& token_texts) {
  std::string body = "[";
  for (size_t i = 0; i < token_texts.size(); ++i) {
    if (i > 0) body += ",";
    std::string escaped;
    for (char c : token_texts[i]) {
      if (c == '"' || c == '\\') escaped += '\\';
      escaped += c;
    }
    body += "{\"text\":\"" + escaped +
            "\",\"bbox\":[[0,0],[10,0],[10,10],[0,10]],\"score\":0.9}";
  }
  body += "]\n";
  write_file(image.string() + ".ocr.json", body);
}

// Runs the CLI binary through /bin/sh with the backend env scrubbed, so a
// developer's AED_* settings cannot leak into the tests.
inline int run_cli(const std::string& args, const fs::path& stdout_file = {},
                   const fs::path& stderr_file = {}) {
  std::string cmd = "env -u AED_CHAT_URL -u AED_EMBED_URL -u AED_OCR_URL -u AED_API_KEY ";
  cmd += "\"" + cli_path() + "\" " + args;
  cmd += stdout_file.empty() ? std::string(" >/dev/null")
                             : " >\"" + stdout_file.string() + "\"";
  cmd += stderr_file.empty() ? std::string(" 2>/dev/null")
                             : " 2>\"" + stderr_file.string() + "\"";
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

// ---------------------------------------------------------------------------
// minimal standalone UTF-8 layer for the oracles (independent of aed::uni)

inline std::vector<uint32_t> o_decode(std::string_view s) {
  std::vector<uint32_t> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b = static_cast<unsigned char>(s[i]);
    uint32_t cp = 0;
    size_t len = 1;
    if (b < 0x80) {
      cp = b;
    } else if ((b >> 5) == 0x6 && i + 1 < s.size()) {
      cp = (b & 0x1F) << 6 | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
      len = 2;
    } else if ((b >> 4) == 0xE && i + 2 < s.size()) {
      cp = (b & 0x0F) << 12 | (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
           (static_cast<unsigned char>(s[i + 2]) & 0x3F);
      len = 3;
    } else if ((b >> 3) == 0x1E && i + 3 < s.size()) {
      cp = (b & 0x07) << 18 | (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12 |
           (static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6 |
           (static_cast<unsigned char>(s[i + 3]) & 0x3F);
      len = 4;
    } else {
      cp = 0xFFFD;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void o_append(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Covers exactly the character classes the randomized corpus draws from:
// full-width ASCII forms, ideographic space, ASCII upper case.
inline uint32_t o_fold(uint32_t cp) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) cp = cp - 0xFF01 + 0x21;
  if (cp == 0x3000) cp = 0x20;
  if (cp >= 'A' && cp <= 'Z') cp += 32;
  return cp;
}

inline bool o_digit(uint32_t cp) { return cp >= '0' && cp <= '9'; }
inline bool o_cjk(uint32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}
inline bool o_alpha(uint32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// ---------------------------------------------------------------------------
// KM reference oracle: a naive re-derivation of the keyword-match semantics

struct OracleKeyword {
  bool numeric = false;
  std::string normalized;
};

inline const std::vector<std::string>& oracle_suffixes() {
  static const std::vector<std::string> s = {"亿元", "万元", "元", "万人", "吨"};
  return s;
}

inline const std::set<std::string>& oracle_stopwords() {
  static const std::set<std::string> s = {
      "the", "a", "an", "of", "to", "in", "on", "at", "is", "are", "was", "were",
      "and", "or", "for", "with", "that", "this", "from", "by", "as", "be", "been",
      "it", "its",
      "以及", "或者", "但是", "因为", "所以", "如果", "对于", "关于",
      "什么", "哪些", "怎么", "如何", "多少", "这个", "那个", "还是", "并且",
  };
  return s;
}

inline std::vector<OracleKeyword> oracle_keywords(const std::string& gold) {
  std::vector<uint32_t> cps = o_decode(gold);
  // width fold only; case folding happens per term token
  for (auto& cp : cps) {
    if (cp >= 0xFF01 && cp <= 0xFF5E) cp = cp - 0xFF01 + 0x21;
    if (cp == 0x3000) cp = 0x20;
  }

  std::vector<std::vector<uint32_t>> suffixes;
  for (const auto& s : oracle_suffixes()) suffixes.push_back(o_decode(s));
  std::sort(suffixes.begin(), suffixes.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::vector<OracleKeyword> out;
  std::set<std::pair<bool, std::string>> seen;
  auto emit = [&](bool numeric, std::string norm) {
    if (norm.empty()) return;
    if (seen.emplace(numeric, norm).second) out.push_back({numeric, std::move(norm)});
  };

  const size_t n = cps.size();
  size_t i = 0;
  while (i < n) {
    if (o_digit(cps[i])) {
      std::string norm;
      bool dot = false;
      size_t j = i;
      while (j < n) {
        if (o_digit(cps[j])) {
          norm += static_cast<char>(cps[j]);
          ++j;
        } else if (cps[j] == ',' && j + 1 < n && o_digit(cps[j + 1])) {
          ++j;
        } else if (cps[j] == '.' && !dot && j + 1 < n && o_digit(cps[j + 1])) {
          dot = true;
          norm += '.';
          ++j;
        } else {
          break;
        }
      }
      if (j < n && cps[j] == '%') ++j;
      for (const auto& suf : suffixes) {
        if (j + suf.size() <= n &&
            std::equal(suf.begin(), suf.end(), cps.begin() + static_cast<long>(j))) {
          j += suf.size();
          break;
        }
      }
      emit(true, std::move(norm));
      i = j;
    } else if (o_cjk(cps[i])) {
      size_t j = i;
      while (j < n && o_cjk(cps[j])) ++j;
      if (j - i >= 2) {
        std::string norm;
        for (size_t k = i; k < j; ++k) o_append(norm, o_fold(cps[k]));
        if (!oracle_stopwords().count(norm)) emit(false, std::move(norm));
      }
      i = j;
    } else if (o_alpha(cps[i])) {
      size_t j = i;
      while (j < n && o_alpha(cps[j])) ++j;
      if (j - i >= 2) {
        std::string norm;
        for (size_t k = i; k < j; ++k) o_append(norm, o_fold(cps[k]));
        if (!oracle_stopwords().count(norm)) emit(false, std::move(norm));
      }
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

inline std::string oracle_canonical(const std::string& text) {
  std::vector<uint32_t> cps = o_decode(text);
  for (auto& cp : cps) cp = o_fold(cp);
  std::string out;
  for (size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == ',' && i > 0 && i + 1 < cps.size() && o_digit(cps[i - 1]) &&
        o_digit(cps[i + 1])) {
      continue;
    }
    o_append(out, cps[i]);
  }
  return out;
}

inline bool oracle_numeric_occurs(const std::string& haystack, const std::string& needle) {
  auto boundary = [](char b) { return (b >= '0' && b <= '9') || b == '.'; };
  for (size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + 1)) {
    bool left = pos == 0 || !boundary(haystack[pos - 1]);
    size_t end = pos + needle.size();
    bool right = end >= haystack.size() || !boundary(haystack[end]);
    if (left && right) return true;
  }
  return false;
}

inline bool oracle_km(const std::string& gold, const std::string& candidate) {
  std::vector<OracleKeyword> kws = oracle_keywords(gold);
  if (kws.empty()) return false;
  std::string canon = oracle_canonical(candidate);
  for (const OracleKeyword& kw : kws) {
    bool found = kw.numeric ? oracle_numeric_occurs(canon, kw.normalized)
                            : canon.find(kw.normalized) != std::string::npos;
    if (!found) return false;
  }
  return true;
}

inline bool oracle_clkm(const std::string& gold, const std::string& candidate,
                        const std::map<std::string, std::vector<std::string>>& lexicon) {
  std::vector<OracleKeyword> kws = oracle_keywords(gold);
  if (kws.empty()) return false;
  std::string canon = oracle_canonical(candidate);
  for (const OracleKeyword& kw : kws) {
    bool found = kw.numeric ? oracle_numeric_occurs(canon, kw.normalized)
                            : canon.find(kw.normalized) != std::string::npos;
    if (!found && !kw.numeric) {
      auto it = lexicon.find(kw.normalized);
      if (it != lexicon.end()) {
        for (const std::string& eq : it->second) {
          if (canon.find(oracle_canonical(eq)) != std::string::npos) {
            found = true;
            break;
          }
        }
      }
    }
    if (!found) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// randomized (gold, candidate) pair corpus for the metric property tests

struct KmPairGenerator {
  std::mt19937_64 gen;

  explicit KmPairGenerator(uint64_t seed) : gen(seed) {}

  size_t pick(size_t n) { return static_cast<size_t>(gen() % n); }

  std::string cjk_term() {
    static const std::vector<std::string> pool = {
        "国内生产总值", "粮食产量", "工业增加值", "固定资产投资", "社会消费",
        "进出口", "财政收入", "城镇居民", "同比增长", "比上年下降",
        "第一产业", "采矿业", "制造业", "房地产开发", "货物周转量",
        "什么",  // stopword
    };
    return pool[pick(pool.size())];
  }

  std::string latin_term() {
    static const std::vector<std::string> pool = {
        "GDP",  "growth", "Coal", "output", "Beijing", "index",
        "rate", "Value",  "THE",  "of",  // stopwords once folded
        "x",                             // below the length floor
    };
    return pool[pick(pool.size())];
  }

  std::string number() {
    std::string digits = std::to_string(1 + gen() % 99999);
    std::string body = digits;
    if (digits.size() > 3 && pick(2) == 0) {
      // insert a thousands separator
      body.insert(digits.size() - 3, ",");
    }
    if (pick(2) == 0) body += "." + std::to_string(gen() % 10);
    switch (pick(4)) {
      case 0: body += "%"; break;
      case 1: body += oracle_suffixes()[pick(oracle_suffixes().size())]; break;
      default: break;
    }
    if (pick(6) == 0) {
      // full-width digits exercise width folding
      std::string wide;
      for (uint32_t cp : o_decode(body)) {
        if (cp >= '0' && cp <= '9') cp = cp - '0' + 0xFF10;
        o_append(wide, cp);
      }
      body = wide;
    }
    return body;
  }

  std::string separator() {
    static const std::vector<std::string> pool = {" ", "，", "、", ", ", "。", "（", "）"};
    return pool[pick(pool.size())];
  }

  std::string token() {
    switch (pick(3)) {
      case 0: return cjk_term();
      case 1: return latin_term();
      default: return number();
    }
  }

  // Returns (gold, candidate). Candidates range from verbatim echoes through
  // reorderings, digit-adjacent traps, and unrelated junk.
  std::pair<std::string, std::string> next() {
    size_t n_tokens = 1 + pick(4);
    std::vector<std::string> tokens;
    std::string gold;
    for (size_t i = 0; i < n_tokens; ++i) {
      std::string t = token();
      if (i > 0) gold += separator();
      gold += t;
      tokens.push_back(std::move(t));
    }

    std::string candidate;
    switch (pick(6)) {
      case 0:  // verbatim echo with filler
        candidate = "据报告，" + gold + " 等内容。";
        break;
      case 1: {  // reordered tokens
        for (size_t i = tokens.size(); i > 0; --i) {
          candidate += tokens[i - 1] + separator();
        }
        break;
      }
      case 2: {  // drop one token
        size_t drop = pick(tokens.size());
        for (size_t i = 0; i < tokens.size(); ++i) {
          if (i != drop) candidate += tokens[i] + " ";
        }
        break;
      }
      case 3: {  // digit-adjacency trap: glue an extra digit onto every token
        for (const std::string& t : tokens) candidate += "1" + t + " ";
        break;
      }
      case 4:  // unrelated
        candidate = "全文无关内容 nothing here 12345678901";
        break;
      default: {  // echo with case changes
        for (const std::string& t : tokens) {
          std::string upper;
          for (char c : t) {
            upper += (c >= 'a' && c <= 'z') ? static_cast<char>(c - 32) : c;
          }
          candidate += upper + "；";
        }
        break;
      }
    }
    return {gold, candidate};
  }
};

// ---------------------------------------------------------------------------
// ingest conservation oracle: scan-based table model, built independently of
// the ingest parser

struct OracleCell {
  bool th = false;
  int colspan = 1;
  int rowspan = 1;
  std::string text;
};

struct OracleRow {
  bool head = false;
  std::vector<OracleCell> cells;
};

struct OracleTable {
  std::vector<OracleRow> rows;
};

namespace detail {

inline std::string o_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

inline std::string o_decode_entities(const std::string& text) {
  static const std::map<std::string, std::string> named = {
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"},
  };
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out += text[i++];
      continue;
    }
    size_t semi = text.find(';', i);
    if (semi == std::string::npos || semi - i > 12) {
      out += text[i++];
      continue;
    }
    std::string body = text.substr(i + 1, semi - i - 1);
    if (!body.empty() && body[0] == '#') {
      uint32_t cp = 0;
      bool ok = body.size() > 1;
      if (body.size() > 2 && (body[1] == 'x' || body[1] == 'X')) {
        for (size_t k = 2; k < body.size() && ok; ++k) {
          char c = body[k];
          int digit = (c >= '0' && c <= '9')   ? c - '0'
                      : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                      : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                               : -1;
          if (digit < 0) ok = false;
          cp = cp * 16 + static_cast<uint32_t>(digit < 0 ? 0 : digit);
        }
      } else {
        for (size_t k = 1; k < body.size() && ok; ++k) {
          if (body[k] < '0' || body[k] > '9') ok = false;
          cp = cp * 10 + static_cast<uint32_t>(body[k] - '0');
        }
      }
      if (ok && cp > 0 && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF)) {
        o_append(out, cp);
        i = semi + 1;
        continue;
      }
      out += text[i++];
      continue;
    }
    auto it = named.find(body);
    if (it != named.end()) {
      out += it->second;
      i = semi + 1;
      continue;
    }
    out += text[i++];
  }
  return out;
}

inline std::string o_collapse(const std::string& text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

struct OracleTag {
  size_t begin = 0;   // position of '<'
  size_t end = 0;     // one past '>'
  bool closing = false;
  std::string name;   // lowercase
  std::string raw;    // full tag text
};

inline bool next_tag(const std::string& html, size_t from, OracleTag& tag) {
  size_t lt = html.find('<', from);
  while (lt != std::string::npos) {
    if (html.compare(lt, 4, "<!--") == 0) {
      size_t close = html.find("-->", lt);
      lt = html.find('<', close == std::string::npos ? html.size() : close + 3);
      continue;
    }
    size_t gt = html.find('>', lt);
    if (gt == std::string::npos) return false;
    size_t p = lt + 1;
    bool closing = p < html.size() && html[p] == '/';
    if (closing) ++p;
    size_t name_end = p;
    while (name_end < gt && html[name_end] != ' ' && html[name_end] != '\t' &&
           html[name_end] != '\n' && html[name_end] != '\r' && html[name_end] != '/') {
      ++name_end;
    }
    tag.begin = lt;
    tag.end = gt + 1;
    tag.closing = closing;
    tag.name = o_lower(std::string_view(html).substr(p, name_end - p));
    tag.raw = html.substr(lt, gt + 1 - lt);
    return true;
  }
  return false;
}

inline int o_span_attr(const std::string& raw_tag, const std::string& attr) {
  std::string lower = o_lower(raw_tag);
  size_t pos = lower.find(attr);
  if (pos == std::string::npos) return 1;
  pos = lower.find('=', pos);
  if (pos == std::string::npos) return 1;
  ++pos;
  while (pos < lower.size() && (lower[pos] == ' ' || lower[pos] == '"' || lower[pos] == '\'')) {
    ++pos;
  }
  int value = 0;
  bool any = false;
  while (pos < lower.size() && lower[pos] >= '0' && lower[pos] <= '9') {
    value = value * 10 + (lower[pos] - '0');
    any = true;
    ++pos;
  }
  if (pos < lower.size() && lower[pos] != '"' && lower[pos] != '\'' &&
      lower[pos] != ' ' && lower[pos] != '>' && lower[pos] != '/') {
    return 1;  // non-numeric value
  }
  if (!any || value < 1) return 1;
  return value;
}

}  // namespace detail

// Extracts every outermost table in document order as rows of cells. The
// fixtures avoid tables nested inside cells and tables inside skipped
// containers, so a flat scan is an exact model.
inline std::vector<OracleTable> oracle_scan_tables(const std::string& html) {
  using namespace detail;
  std::vector<OracleTable> tables;
  size_t pos = 0;
  OracleTag tag;
  while (next_tag(html, pos, tag)) {
    if (tag.name != "table" || tag.closing) {
      pos = tag.end;
      continue;
    }
    OracleTable table;
    bool in_head = false;
    bool in_caption = false;
    OracleCell* open_cell = nullptr;
    std::string cell_text;
    size_t cursor = tag.end;
    int depth = 1;

    auto close_cell = [&]() {
      if (open_cell != nullptr) {
        open_cell->text = o_collapse(o_decode_entities(cell_text));
        open_cell = nullptr;
      }
      cell_text.clear();
    };

    OracleTag t;
    while (depth > 0 && next_tag(html, cursor, t)) {
      if (open_cell != nullptr && depth == 1 && !in_caption) {
        cell_text += html.substr(cursor, t.begin - cursor);
      }
      cursor = t.end;
      if (t.name == "table") {
        depth += t.closing ? -1 : 1;
        if (depth == 0) {
          close_cell();
          break;
        }
        continue;
      }
      if (depth > 1) continue;
      if (t.name == "caption") {
        close_cell();
        in_caption = !t.closing;
        continue;
      }
      if (in_caption) continue;
      if (t.name == "thead" || t.name == "tbody" || t.name == "tfoot") {
        close_cell();
        in_head = (t.name == "thead" && !t.closing);
        continue;
      }
      if (t.name == "tr") {
        close_cell();
        if (!t.closing) table.rows.push_back(OracleRow{in_head, {}});
        continue;
      }
      if (t.name == "td" || t.name == "th") {
        close_cell();
        if (!t.closing && !table.rows.empty()) {
          OracleCell cell;
          cell.th = t.name == "th";
          cell.colspan = std::min(o_span_attr(t.raw, "colspan"), 1000);
          cell.rowspan = o_span_attr(t.raw, "rowspan");
          table.rows.back().cells.push_back(cell);
          open_cell = &table.rows.back().cells.back();
        }
        continue;
      }
      // inline markup inside the cell: contributes no text of its own
    }
    close_cell();
    tables.push_back(std::move(table));
    pos = cursor;
  }
  return tables;
}

// Multiset of data-cell texts: expand the grid, apply the header rule
// (literal th / thead row; first-row fallback when no header exists), and
// keep the text of every non-header cell.
inline std::vector<std::string> oracle_data_cells(const OracleTable& table) {
  const int total_rows = static_cast<int>(table.rows.size());
  std::vector<std::vector<int>> grid(static_cast<size_t>(total_rows));
  struct Placed {
    std::string text;
    bool header = false;
    int anchor_row = 0;
  };
  std::vector<Placed> cells;

  auto slot = [&](int r, int c) -> int& {
    auto& row = grid[static_cast<size_t>(r)];
    if (static_cast<size_t>(c) >= row.size()) row.resize(static_cast<size_t>(c) + 1, -1);
    return row[static_cast<size_t>(c)];
  };

  for (int r = 0; r < total_rows; ++r) {
    int c = 0;
    for (const OracleCell& cell : table.rows[static_cast<size_t>(r)].cells) {
      while (slot(r, c) != -1) ++c;
      int colspan = cell.colspan;
      int rowspan = std::min(cell.rowspan, total_rows - r);
      int id = static_cast<int>(cells.size());
      cells.push_back({cell.text, cell.th || table.rows[static_cast<size_t>(r)].head, r});
      for (int rr = r; rr < r + rowspan; ++rr) {
        for (int cc = c; cc < c + colspan; ++cc) slot(rr, cc) = id;
      }
      c += colspan;
    }
  }

  bool any_header = false;
  for (const Placed& p : cells) any_header |= p.header;
  if (!any_header) {
    for (Placed& p : cells) {
      if (p.anchor_row == 0) p.header = true;
    }
  }

  std::vector<std::string> out;
  for (const Placed& p : cells) {
    if (!p.header) out.push_back(p.text);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// answer-type digit oracle: ASCII digits or full-width digits (U+FF10-FF19,
// i.e. the UTF-8 bytes EF BC 90..99)

inline bool oracle_has_digit(const std::string& answer) {
  for (size_t i = 0; i < answer.size(); ++i) {
    unsigned char b = static_cast<unsigned char>(answer[i]);
    if (b >= '0' && b <= '9') return true;
    if (b == 0xEF && i + 2 < answer.size() &&
        static_cast<unsigned char>(answer[i + 1]) == 0xBC) {
      unsigned char third = static_cast<unsigned char>(answer[i + 2]);
      if (third >= 0x90 && third <= 0x99) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// the 12-question mock corpus (all six modality combinations, twice each)

struct MockCorpus {
  fs::path corpus_json;
  fs::path qa_jsonl;
  std::vector<aed::QAPair> pairs;
  aed::Document doc;
};

inline MockCorpus build_mock_corpus(const fs::path& root) {
  fs::path assets = root / "assets";
  fs::create_directories(assets);
  write_png(assets / "img1.png", 'a');
  write_png(assets / "img2.png", 'b');
  write_ocr_sidecar(assets / "img1.png", {"能源产量趋势", "煤炭 coal", "2024"});
  write_ocr_sidecar(assets / "img2.png", {"投资增速变化", "房地产开发"});

  aed::Document doc;
  doc.id = "report1";
  doc.source_url = "http://example.test/report1.html";
  doc.markdown =
      "# 经济运行情况\n\n"
      "全区规模以上工业增加值同比增长5.9%，其中制造业增长6.5%。"
      "粮食总产量1,412.5万吨。城镇新增就业35万人。\n\n"
      "table1\n\n"
      "table2\n\n"
      "img1\n\n"
      "img2\n";
  {
    aed::TableRecord t1;
    t1.tag = "table1";
    t1.caption = "能源产品产量";
    t1.html_source =
        "<table><tr><th>产品</th><th>产量</th></tr>"
        "<tr><th>原煤</th><td>3,650万吨</td></tr>"
        "<tr><th>原油</th><td>1,712万吨</td></tr></table>";
    t1.tuples = {{"原煤", "产量", "3,650万吨"}, {"原油", "产量", "1,712万吨"}};
    doc.tables.push_back(std::move(t1));

    aed::TableRecord t2;
    t2.tag = "table2";
    t2.caption = "固定资产投资";
    t2.html_source =
        "<table><tr><th>领域</th><th>增速</th></tr>"
        "<tr><th>基础设施</th><td>5.8%</td></tr>"
        "<tr><th>制造业</th><td>9.0%</td></tr></table>";
    t2.tuples = {{"基础设施", "增速", "5.8%"}, {"制造业", "增速", "9.0%"}};
    doc.tables.push_back(std::move(t2));
  }
  doc.charts.push_back({"img1", assets / "img1.png", "http://example.test/img1.png"});
  doc.charts.push_back({"img2", assets / "img2.png", ""});

  MockCorpus out;
  out.corpus_json = aed::ingest::build_manifest({doc}, root / "corpus");
  out.doc = doc;

  using aed::ModalityRef;
  struct Spec {
    const char* id;
    const char* question;
    const char* answer;
    std::vector<ModalityRef> modalities;
  };
  std::vector<Spec> specs = {
      {"q01", "规模以上工业增加值增长了多少？", "同比增长5.9%", {ModalityRef::text()}},
      {"q02", "粮食总产量是多少？", "1,412.5万吨", {ModalityRef::text()}},
      {"q03", "原煤产量是多少？", "3,650万吨", {ModalityRef::table(1)}},
      {"q04", "制造业投资增速是多少？", "增速9.0%", {ModalityRef::table(2)}},
      {"q05", "能源产量趋势图反映了哪种产品？", "煤炭 coal", {ModalityRef::chart(1)}},
      {"q06", "投资增速变化图涉及哪个行业？", "房地产开发", {ModalityRef::chart(2)}},
      {"q07", "城镇新增就业与原油产量分别是多少？", "35万人和1,712万吨",
       {ModalityRef::text(), ModalityRef::table(1)}},
      {"q08", "制造业增加值及其投资增速各是多少？", "增长6.5%，投资增速9.0%",
       {ModalityRef::text(), ModalityRef::table(2)}},
      {"q09", "正文与首张图表共同对应的能源话题是什么？", "能源产量趋势",
       {ModalityRef::text(), ModalityRef::chart(1)}},
      {"q10", "第二张图与正文共同提到的领域是什么？", "房地产开发投资",
       {ModalityRef::text(), ModalityRef::chart(2)}},
      {"q11", "原油产量与能源趋势图各说明什么？", "原油1,712万吨",
       {ModalityRef::table(1), ModalityRef::chart(1)}},
      {"q12", "投资表与投资图共同关注的增速是多少？", "基础设施5.8%",
       {ModalityRef::table(2), ModalityRef::chart(2)}},
  };
  for (const Spec& s : specs) {
    aed::QAPair pair;
    pair.id = s.id;
    pair.doc_id = "report1";
    pair.question = s.question;
    pair.gold_answer = s.answer;
    pair.modalities = s.modalities;
    out.pairs.push_back(std::move(pair));
  }
  out.qa_jsonl = root / "qa.jsonl";
  aed::save_qa_file(out.qa_jsonl, out.pairs);
  return out;
}

}  // namespace testsupport
