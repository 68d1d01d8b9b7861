#include "aed/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aed/unicode.hpp"

namespace aed::ingest {
namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// entity decoding

const std::map<std::string, std::string, std::less<>>& named_entities() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"amp", "&"},    {"lt", "<"},      {"gt", ">"},      {"quot", "\""},
      {"apos", "'"},   {"nbsp", " "},    {"ensp", " "},    {"emsp", " "},
      {"thinsp", " "}, {"mdash", "—"}, {"ndash", "–"},
      {"ldquo", "“"}, {"rdquo", "”"}, {"lsquo", "‘"},
      {"rsquo", "’"}, {"hellip", "…"}, {"middot", "·"},
      {"times", "×"}, {"divide", "÷"}, {"plusmn", "±"},
      {"deg", "°"},   {"copy", "©"},   {"reg", "®"},
      {"permil", "‰"}, {"yen", "¥"},
  };
  return table;
}

// Decodes character references; unknown ones pass through verbatim.
std::string decode_entities(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '&') {
      out += raw[i++];
      continue;
    }
    size_t semi = raw.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out += raw[i++];
      continue;
    }
    std::string_view body = raw.substr(i + 1, semi - i - 1);
    if (!body.empty() && body[0] == '#') {
      std::string_view digits = body.substr(1);
      int base = 10;
      if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
        base = 16;
        digits = digits.substr(1);
      }
      char32_t cp = 0;
      bool ok = !digits.empty();
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') {
          v = c - '0';
        } else if (base == 16 && c >= 'a' && c <= 'f') {
          v = c - 'a' + 10;
        } else if (base == 16 && c >= 'A' && c <= 'F') {
          v = c - 'A' + 10;
        } else {
          ok = false;
          break;
        }
        cp = cp * static_cast<char32_t>(base) + static_cast<char32_t>(v);
        if (cp > 0x10FFFF) {
          ok = false;
          break;
        }
      }
      if (ok && cp != 0 && !(cp >= 0xD800 && cp <= 0xDFFF)) {
        uni::append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
      out += raw[i++];
      continue;
    }
    auto it = named_entities().find(body);
    if (it != named_entities().end()) {
      out += it->second;
      i = semi + 1;
      continue;
    }
    out += raw[i++];
  }
  return out;
}

// ---------------------------------------------------------------------------
// lenient HTML parsing into an arena tree

struct RawNode {
  bool is_text = false;
  std::string tag;   // lowercase, empty for text nodes
  std::string text;  // decoded, text nodes only
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<int> children;
  size_t src_begin = 0;
  size_t src_end = 0;
};

bool is_void_element(std::string_view tag) {
  static const std::set<std::string, std::less<>> voids = {
      "area", "base", "br",    "col",  "embed",  "hr",    "img",
      "input", "link", "meta", "param", "source", "track", "wbr"};
  return voids.count(tag) > 0;
}

bool is_raw_text_element(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "textarea" || tag == "title";
}

bool is_block_opener(std::string_view tag) {
  static const std::set<std::string, std::less<>> blocks = {
      "address", "article", "aside",  "blockquote", "div",    "dl",
      "fieldset", "figure", "footer", "form",       "h1",     "h2",
      "h3",      "h4",      "h5",     "h6",         "header", "hr",
      "main",    "ol",      "p",      "pre",        "section", "table",
      "ul"};
  return blocks.count(tag) > 0;
}

class HtmlParser {
 public:
  explicit HtmlParser(std::string_view html) : src_(html) {
    arena_.push_back(RawNode{});  // index 0: synthetic root
    arena_[0].tag = "#root";
    arena_[0].src_end = src_.size();
    open_ = {0};
  }

  std::vector<RawNode> parse() {
    size_t i = 0;
    while (i < src_.size()) {
      if (src_[i] != '<') {
        size_t lt = src_.find('<', i);
        if (lt == std::string_view::npos) lt = src_.size();
        add_text(src_.substr(i, lt - i), i);
        i = lt;
        continue;
      }
      if (src_.compare(i, 4, "<!--") == 0) {
        size_t end = src_.find("-->", i + 4);
        i = (end == std::string_view::npos) ? src_.size() : end + 3;
        continue;
      }
      if (i + 1 < src_.size() && (src_[i + 1] == '!' || src_[i + 1] == '?')) {
        size_t gt = src_.find('>', i);
        i = (gt == std::string_view::npos) ? src_.size() : gt + 1;
        continue;
      }
      if (i + 1 < src_.size() && src_[i + 1] == '/') {
        i = parse_end_tag(i);
        continue;
      }
      if (i + 1 < src_.size() && is_name_start(src_[i + 1])) {
        i = parse_start_tag(i);
        continue;
      }
      // stray '<' as text
      add_text(src_.substr(i, 1), i);
      ++i;
    }
    while (open_.size() > 1) pop_open(src_.size());
    return std::move(arena_);
  }

 private:
  static bool is_name_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  }
  static bool is_name_char(char c) {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == ':';
  }
  static bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
  }
  static std::string lowered(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }

  const std::string& top_tag() const { return arena_[open_.back()].tag; }

  void pop_open(size_t end_pos) {
    arena_[open_.back()].src_end = end_pos;
    open_.pop_back();
  }

  void add_text(std::string_view raw, size_t pos) {
    if (raw.empty()) return;
    RawNode node;
    node.is_text = true;
    node.text = decode_entities(raw);
    node.src_begin = pos;
    node.src_end = pos + raw.size();
    int id = static_cast<int>(arena_.size());
    arena_.push_back(std::move(node));
    arena_[static_cast<size_t>(open_.back())].children.push_back(id);
  }

  // Implicit end tags, the handful of rules real pages rely on.
  void auto_close(const std::string& incoming) {
    auto top_is = [&](std::initializer_list<std::string_view> tags) {
      if (open_.size() <= 1) return false;
      const std::string& t = top_tag();
      return std::find(tags.begin(), tags.end(), t) != tags.end();
    };
    if (is_block_opener(incoming) || incoming == "li" || incoming == "tr" ||
        incoming == "td" || incoming == "th" || incoming == "thead" ||
        incoming == "tbody" || incoming == "tfoot" || incoming == "caption") {
      while (top_is({"p"})) pop_open(cursor_);
    }
    if (incoming == "li") {
      while (top_is({"li"})) pop_open(cursor_);
    } else if (incoming == "td" || incoming == "th") {
      while (top_is({"td", "th"})) pop_open(cursor_);
    } else if (incoming == "tr") {
      while (top_is({"td", "th", "tr"})) pop_open(cursor_);
    } else if (incoming == "thead" || incoming == "tbody" || incoming == "tfoot") {
      while (top_is({"td", "th", "tr", "thead", "tbody", "tfoot", "caption"}))
        pop_open(cursor_);
    } else if (incoming == "option") {
      while (top_is({"option"})) pop_open(cursor_);
    }
  }

  size_t parse_start_tag(size_t lt) {
    size_t i = lt + 1;
    size_t name_begin = i;
    while (i < src_.size() && is_name_char(src_[i])) ++i;
    std::string tag = lowered(src_.substr(name_begin, i - name_begin));

    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    while (i < src_.size() && src_[i] != '>') {
      if (is_ws(src_[i])) {
        ++i;
        continue;
      }
      if (src_[i] == '/') {
        if (i + 1 < src_.size() && src_[i + 1] == '>') self_closing = true;
        ++i;
        continue;
      }
      size_t attr_begin = i;
      while (i < src_.size() && !is_ws(src_[i]) && src_[i] != '=' &&
             src_[i] != '>' && src_[i] != '/') {
        ++i;
      }
      std::string name = lowered(src_.substr(attr_begin, i - attr_begin));
      std::string value;
      while (i < src_.size() && is_ws(src_[i])) ++i;
      if (i < src_.size() && src_[i] == '=') {
        ++i;
        while (i < src_.size() && is_ws(src_[i])) ++i;
        if (i < src_.size() && (src_[i] == '"' || src_[i] == '\'')) {
          char quote = src_[i++];
          size_t vb = i;
          while (i < src_.size() && src_[i] != quote) ++i;
          value = decode_entities(src_.substr(vb, i - vb));
          if (i < src_.size()) ++i;
        } else {
          size_t vb = i;
          while (i < src_.size() && !is_ws(src_[i]) && src_[i] != '>') ++i;
          value = decode_entities(src_.substr(vb, i - vb));
        }
      }
      if (!name.empty()) attrs.emplace_back(std::move(name), std::move(value));
    }
    size_t after = (i < src_.size()) ? i + 1 : src_.size();

    cursor_ = lt;
    auto_close(tag);

    RawNode node;
    node.tag = tag;
    node.attrs = std::move(attrs);
    node.src_begin = lt;
    node.src_end = after;
    int id = static_cast<int>(arena_.size());
    arena_.push_back(std::move(node));
    arena_[static_cast<size_t>(open_.back())].children.push_back(id);

    if (self_closing || is_void_element(tag)) return after;

    if (is_raw_text_element(tag)) {
      // consume raw content up to the matching end tag, no nesting
      std::string close = "</" + tag;
      size_t pos = after;
      size_t found = std::string_view::npos;
      while (pos < src_.size()) {
        size_t cand = find_ci(pos, close);
        if (cand == std::string_view::npos) break;
        size_t e = cand + close.size();
        while (e < src_.size() && src_[e] != '>') ++e;
        found = cand;
        pos = (e < src_.size()) ? e + 1 : src_.size();
        break;
      }
      size_t content_end = (found == std::string_view::npos) ? src_.size() : found;
      if (content_end > after) {
        RawNode text;
        text.is_text = true;
        text.text = std::string(src_.substr(after, content_end - after));
        text.src_begin = after;
        text.src_end = content_end;
        int tid = static_cast<int>(arena_.size());
        arena_.push_back(std::move(text));
        arena_[static_cast<size_t>(id)].children.push_back(tid);
      }
      arena_[static_cast<size_t>(id)].src_end = pos > after ? pos : src_.size();
      return (found == std::string_view::npos) ? src_.size() : pos;
    }

    open_.push_back(id);
    return after;
  }

  size_t find_ci(size_t from, std::string_view needle) const {
    if (needle.empty()) return from;
    for (size_t i = from; i + needle.size() <= src_.size(); ++i) {
      size_t j = 0;
      for (; j < needle.size(); ++j) {
        char a = src_[i + j];
        char b = needle[j];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
        if (a != b) break;
      }
      if (j == needle.size()) return i;
    }
    return std::string_view::npos;
  }

  size_t parse_end_tag(size_t lt) {
    size_t i = lt + 2;
    size_t name_begin = i;
    while (i < src_.size() && is_name_char(src_[i])) ++i;
    std::string tag = lowered(src_.substr(name_begin, i - name_begin));
    size_t gt = src_.find('>', i);
    size_t after = (gt == std::string_view::npos) ? src_.size() : gt + 1;
    if (tag.empty()) return after;

    int match = -1;
    for (size_t d = open_.size(); d-- > 1;) {
      if (arena_[static_cast<size_t>(open_[d])].tag == tag) {
        match = static_cast<int>(d);
        break;
      }
    }
    if (match < 0) return after;  // stray end tag
    while (static_cast<int>(open_.size()) - 1 > match) pop_open(lt);
    pop_open(after);
    return after;
  }

  std::string_view src_;
  std::vector<RawNode> arena_;
  std::vector<int> open_;
  size_t cursor_ = 0;  // position of the tag currently being opened
};

struct Dom {
  std::vector<RawNode> nodes;
  const RawNode& root() const { return nodes[0]; }
  const RawNode& at(int id) const { return nodes[static_cast<size_t>(id)]; }
};

Dom parse_html(std::string_view html) {
  HtmlParser parser(html);
  return Dom{parser.parse()};
}

const std::string* find_attr(const RawNode& node, std::string_view name) {
  for (const auto& [k, v] : node.attrs) {
    if (k == name) return &v;
  }
  return nullptr;
}

bool subtree_skipped(const std::string& tag) {
  static const std::set<std::string, std::less<>> skip = {
      "script", "style",  "head",   "nav",    "noscript", "template",
      "iframe", "object", "svg",    "form",   "button",   "select",
      "input",  "footer", "aside"};
  return skip.count(tag) > 0;
}

// ---------------------------------------------------------------------------
// text collection

void collapse_append(std::string& out, std::string_view decoded) {
  for (char c : decoded) {
    bool ws = (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f');
    if (ws) {
      if (!out.empty() && out.back() != ' ' && out.back() != '\n') out += ' ';
    } else {
      out += c;
    }
  }
}

void trim_inline(std::string& s) {
  size_t b = s.find_first_not_of(" \n");
  if (b == std::string::npos) {
    s.clear();
    return;
  }
  size_t e = s.find_last_not_of(" \n");
  s = s.substr(b, e - b + 1);
}

void collect_text(const Dom& dom, const RawNode& node, std::string& out) {
  if (node.is_text) {
    collapse_append(out, node.text);
    return;
  }
  if (subtree_skipped(node.tag)) return;
  if (node.tag == "br") {
    if (!out.empty()) out += ' ';
    return;
  }
  for (int child : node.children) collect_text(dom, dom.at(child), out);
}

std::string inline_text(const Dom& dom, const RawNode& node) {
  std::string out;
  collect_text(dom, node, out);
  trim_inline(out);
  return out;
}

// ---------------------------------------------------------------------------
// table flattening

struct GridCell {
  std::string text;
  bool header = false;
};

struct TableGrid {
  std::vector<GridCell> cells;
  // grid[r][c] indexes into cells, -1 when the slot is empty
  std::vector<std::vector<int>> grid;
  std::vector<int> anchor_row;  // per cell
  std::vector<int> anchor_col;
  std::vector<int> span_cols;
  std::vector<bool> from_th;  // literal <th> or <thead> membership
};

int parse_span(const RawNode& cell, std::string_view name, int max_value) {
  const std::string* raw = find_attr(cell, name);
  if (raw == nullptr) return 1;
  int value = 0;
  for (char c : *raw) {
    if (c < '0' || c > '9') {
      value = 0;
      break;
    }
    value = value * 10 + (c - '0');
    if (value > 10000) break;
  }
  if (value < 1) return 1;
  return std::min(value, max_value);
}

// Collects <tr> rows in order, tracking which come from <thead>.
void collect_rows(const Dom& dom, const RawNode& table,
                  std::vector<std::pair<int, bool>>& rows) {
  for (int cid : table.children) {
    const RawNode& child = dom.at(cid);
    if (child.is_text) continue;
    if (child.tag == "tr") {
      rows.emplace_back(cid, false);
    } else if (child.tag == "thead" || child.tag == "tbody" ||
               child.tag == "tfoot") {
      bool in_head = child.tag == "thead";
      for (int gid : child.children) {
        const RawNode& grand = dom.at(gid);
        if (!grand.is_text && grand.tag == "tr") rows.emplace_back(gid, in_head);
      }
    }
  }
}

TableGrid build_grid(const Dom& dom, const RawNode& table) {
  std::vector<std::pair<int, bool>> rows;
  collect_rows(dom, table, rows);

  TableGrid out;
  out.grid.assign(rows.size(), {});
  int total_rows = static_cast<int>(rows.size());

  auto slot = [&](int r, int c) -> int& {
    auto& row = out.grid[static_cast<size_t>(r)];
    if (static_cast<size_t>(c) >= row.size()) row.resize(static_cast<size_t>(c) + 1, -1);
    return row[static_cast<size_t>(c)];
  };

  for (int r = 0; r < total_rows; ++r) {
    const RawNode& tr = dom.at(rows[static_cast<size_t>(r)].first);
    bool in_head = rows[static_cast<size_t>(r)].second;
    int c = 0;
    for (int cid : tr.children) {
      const RawNode& cell = dom.at(cid);
      if (cell.is_text || (cell.tag != "td" && cell.tag != "th")) continue;
      while (slot(r, c) != -1) ++c;
      int colspan = parse_span(cell, "colspan", 1000);
      int rowspan = parse_span(cell, "rowspan", total_rows - r);
      int id = static_cast<int>(out.cells.size());
      out.cells.push_back(GridCell{inline_text(dom, cell), false});
      out.anchor_row.push_back(r);
      out.anchor_col.push_back(c);
      out.span_cols.push_back(colspan);
      out.from_th.push_back(cell.tag == "th" || in_head);
      for (int rr = r; rr < r + rowspan; ++rr) {
        for (int cc = c; cc < c + colspan; ++cc) slot(rr, cc) = id;
      }
      c += colspan;
    }
  }

  bool any_header = false;
  for (size_t i = 0; i < out.cells.size(); ++i) {
    if (out.from_th[i]) {
      out.cells[i].header = true;
      any_header = true;
    }
  }
  if (!any_header) {
    // no <th>/<thead> anywhere: first row acts as the header row
    for (size_t i = 0; i < out.cells.size(); ++i) {
      if (out.anchor_row[i] == 0) out.cells[i].header = true;
    }
  }
  return out;
}

std::vector<CellTuple> tuples_from_grid(const TableGrid& g) {
  int total_rows = static_cast<int>(g.grid.size());

  // header rows: every occupied slot holds a header cell
  std::vector<int> header_rows;
  for (int r = 0; r < total_rows; ++r) {
    bool occupied = false;
    bool all_header = true;
    for (int id : g.grid[static_cast<size_t>(r)]) {
      if (id < 0) continue;
      occupied = true;
      if (!g.cells[static_cast<size_t>(id)].header) all_header = false;
    }
    if (occupied && all_header) header_rows.push_back(r);
  }

  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += '/';
      out += p;
    }
    return out;
  };

  std::vector<CellTuple> tuples;
  for (size_t id = 0; id < g.cells.size(); ++id) {
    if (g.cells[id].header) continue;
    int r = g.anchor_row[id];
    int c = g.anchor_col[id];

    std::vector<std::string> row_parts;
    std::set<int> row_seen;
    for (int cc = 0; cc < static_cast<int>(g.grid[static_cast<size_t>(r)].size()); ++cc) {
      int other = g.grid[static_cast<size_t>(r)][static_cast<size_t>(cc)];
      if (other < 0 || !g.cells[static_cast<size_t>(other)].header) continue;
      if (!row_seen.insert(other).second) continue;
      if (!g.cells[static_cast<size_t>(other)].text.empty())
        row_parts.push_back(g.cells[static_cast<size_t>(other)].text);
    }

    std::vector<std::string> col_parts;
    std::set<int> col_seen;
    for (int cc = c; cc < c + g.span_cols[id]; ++cc) {
      for (int hr : header_rows) {
        if (hr >= r) continue;
        if (static_cast<size_t>(cc) >= g.grid[static_cast<size_t>(hr)].size()) continue;
        int other = g.grid[static_cast<size_t>(hr)][static_cast<size_t>(cc)];
        if (other < 0 || !g.cells[static_cast<size_t>(other)].header) continue;
        if (!col_seen.insert(other).second) continue;
        if (!g.cells[static_cast<size_t>(other)].text.empty())
          col_parts.push_back(g.cells[static_cast<size_t>(other)].text);
      }
    }

    tuples.push_back(CellTuple{join(row_parts), join(col_parts), g.cells[id].text});
  }
  return tuples;
}

std::vector<CellTuple> tuples_from_table_node(const Dom& dom, const RawNode& table) {
  return tuples_from_grid(build_grid(dom, table));
}

// ---------------------------------------------------------------------------
// markdown rendering

struct RenderState {
  std::vector<std::string> blocks;
  std::string current;
  Document* doc = nullptr;
  IngestReport* report = nullptr;
  std::string_view source;
  const std::filesystem::path* asset_dir = nullptr;

  void flush() {
    trim_inline(current);
    if (!current.empty()) blocks.push_back(current);
    current.clear();
  }
  void push_block(std::string block) {
    flush();
    blocks.push_back(std::move(block));
  }
};

std::string url_basename(std::string_view url) {
  std::string_view s = url;
  size_t cut = s.find_first_of("?#");
  if (cut != std::string_view::npos) s = s.substr(0, cut);
  size_t slash = s.find_last_of('/');
  if (slash != std::string_view::npos) s = s.substr(slash + 1);
  return std::string(s);
}

bool looks_decorative(const RawNode& img) {
  auto declared = [&](std::string_view name) -> std::optional<int> {
    const std::string* raw = find_attr(img, name);
    if (raw == nullptr) return std::nullopt;
    int value = 0;
    bool any = false;
    for (char c : *raw) {
      if (c >= '0' && c <= '9') {
        value = value * 10 + (c - '0');
        any = true;
      } else if (c == 'p' || c == 'x' || c == '%') {
        break;
      } else {
        return std::nullopt;
      }
    }
    if (!any) return std::nullopt;
    return value;
  };
  auto w = declared("width");
  auto h = declared("height");
  if (w && *w < 64) return true;
  if (h && *h < 64) return true;
  return false;
}

void handle_img(RenderState& st, const RawNode& img) {
  const std::string* src = find_attr(img, "src");
  if (src == nullptr || src->empty()) return;
  if (src->rfind("data:", 0) == 0) {
    st.report->warnings.push_back("skipped inline data URI image");
    return;
  }
  if (looks_decorative(img)) return;

  int index = static_cast<int>(st.doc->charts.size()) + 1;
  ChartRef chart;
  chart.tag = "img" + std::to_string(index);
  std::string base = url_basename(*src);
  if (base.empty()) {
    st.report->warnings.push_back("image with unusable src skipped: " + *src);
    return;
  }
  chart.local_path = (*st.asset_dir / base).string();
  if (src->rfind("http://", 0) == 0 || src->rfind("https://", 0) == 0) {
    chart.remote_url = *src;
  }
  std::error_code ec;
  if (!std::filesystem::is_regular_file(chart.local_path, ec)) {
    st.report->warnings.push_back("MissingAsset: " + chart.tag + " expects " +
                                  chart.local_path.string());
  }
  st.doc->charts.push_back(std::move(chart));
  st.push_block(st.doc->charts.back().tag);
}

void handle_table(RenderState& st, const Dom& dom, const RawNode& table) {
  int index = static_cast<int>(st.doc->tables.size()) + 1;
  TableRecord record;
  record.tag = "table" + std::to_string(index);
  record.html_source = std::string(
      st.source.substr(table.src_begin, table.src_end - table.src_begin));
  for (int cid : table.children) {
    const RawNode& child = dom.at(cid);
    if (!child.is_text && child.tag == "caption") {
      std::string cap = inline_text(dom, child);
      if (!cap.empty()) record.caption = cap;
      break;
    }
  }
  record.tuples = tuples_from_table_node(dom, table);
  st.doc->tables.push_back(std::move(record));
  st.push_block(st.doc->tables.back().tag);
}

void render_node(RenderState& st, const Dom& dom, const RawNode& node);

void render_children(RenderState& st, const Dom& dom, const RawNode& node) {
  for (int child : node.children) render_node(st, dom, dom.at(child));
}

void render_list(RenderState& st, const Dom& dom, const RawNode& list, bool ordered) {
  st.flush();
  std::vector<std::string> lines;
  int counter = 0;
  std::vector<std::pair<const RawNode*, bool>> pending_media;
  for (int cid : list.children) {
    const RawNode& li = dom.at(cid);
    if (li.is_text || li.tag != "li") continue;
    // media inside list items is hoisted after the list block; its content
    // must not leak into the item line
    std::string text;
    std::function<void(const RawNode&)> scan = [&](const RawNode& n) {
      if (n.is_text) {
        collapse_append(text, n.text);
        return;
      }
      if (subtree_skipped(n.tag)) return;
      if (n.tag == "table") {
        pending_media.emplace_back(&n, true);
        return;
      }
      if (n.tag == "img") {
        pending_media.emplace_back(&n, false);
        return;
      }
      if (n.tag == "br") {
        if (!text.empty()) text += ' ';
        return;
      }
      for (int g : n.children) scan(dom.at(g));
    };
    scan(li);
    trim_inline(text);
    if (text.empty()) continue;
    ++counter;
    std::string marker = ordered ? std::to_string(counter) + ". " : std::string("- ");
    lines.push_back(marker + text);
  }
  if (!lines.empty()) {
    std::string block;
    for (size_t i = 0; i < lines.size(); ++i) {
      if (i > 0) block += '\n';
      block += lines[i];
    }
    st.blocks.push_back(std::move(block));
  }
  for (auto& [node_ptr, is_table] : pending_media) {
    if (is_table) {
      handle_table(st, dom, *node_ptr);
    } else {
      handle_img(st, *node_ptr);
    }
  }
}

void render_node(RenderState& st, const Dom& dom, const RawNode& node) {
  if (node.is_text) {
    collapse_append(st.current, node.text);
    return;
  }
  const std::string& tag = node.tag;
  if (subtree_skipped(tag)) return;

  if (tag == "table") {
    handle_table(st, dom, node);
    return;
  }
  if (tag == "img") {
    handle_img(st, node);
    return;
  }
  if (tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6') {
    st.flush();
    std::string text = inline_text(dom, node);
    if (!text.empty()) {
      st.blocks.push_back(std::string(static_cast<size_t>(tag[1] - '0'), '#') +
                          " " + text);
    }
    return;
  }
  if (tag == "ul" || tag == "ol") {
    render_list(st, dom, node, tag == "ol");
    return;
  }
  if (tag == "br") {
    if (!st.current.empty()) st.current += '\n';
    return;
  }
  if (tag == "hr") {
    st.flush();
    return;
  }
  if (tag == "li" || tag == "p" || tag == "div" || tag == "section" ||
      tag == "article" || tag == "main" || tag == "header" ||
      tag == "figure" || tag == "figcaption" || tag == "blockquote" ||
      tag == "pre" || tag == "dl" || tag == "dt" || tag == "dd" ||
      tag == "address" || tag == "fieldset" || tag == "center" ||
      tag == "body" || tag == "html" || tag == "#root" || tag == "tr" ||
      tag == "td" || tag == "th" || tag == "caption") {
    st.flush();
    render_children(st, dom, node);
    st.flush();
    return;
  }
  // anything else renders inline
  render_children(st, dom, node);
}

}  // namespace

// ---------------------------------------------------------------------------

IngestResult html_to_document(std::string_view html, const std::string& doc_id,
                              const std::filesystem::path& asset_dir) {
  Dom dom = parse_html(html);

  IngestResult result;
  result.doc.id = doc_id;
  result.report.doc_id = doc_id;

  RenderState st;
  st.doc = &result.doc;
  st.report = &result.report;
  st.source = html;
  st.asset_dir = &asset_dir;

  render_node(st, dom, dom.root());
  st.flush();

  std::string markdown;
  for (size_t i = 0; i < st.blocks.size(); ++i) {
    if (i > 0) markdown += "\n\n";
    markdown += st.blocks[i];
  }
  if (!markdown.empty()) markdown += '\n';
  result.doc.markdown = std::move(markdown);

  if (result.doc.markdown.empty() && result.doc.tables.empty() &&
      result.doc.charts.empty()) {
    throw UnparseableHtml("no document content recovered for '" + doc_id + "'");
  }

  normalize_text_fields(result.doc);
  result.report.tables_found = static_cast<int>(result.doc.tables.size());
  result.report.charts_found = static_cast<int>(result.doc.charts.size());
  return result;
}

std::vector<CellTuple> table_html_to_tuples(std::string_view table_html) {
  Dom dom = parse_html(table_html);
  const RawNode* table = nullptr;
  for (int cid : dom.root().children) {
    const RawNode& child = dom.at(cid);
    if (child.is_text) {
      std::string t = child.text;
      trim_inline(t);
      if (!t.empty()) throw NotATable("leading content is not a <table> element");
      continue;
    }
    table = &child;
    break;
  }
  if (table == nullptr || table->tag != "table") {
    throw NotATable("root element is not <table>");
  }
  std::vector<CellTuple> tuples = tuples_from_table_node(dom, *table);
  for (CellTuple& t : tuples) {
    t.row_label = uni::nfc(t.row_label);
    t.col_label = uni::nfc(t.col_label);
    t.value = uni::nfc(t.value);
  }
  return tuples;
}

namespace {

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

json tuples_to_json(const std::vector<CellTuple>& tuples) {
  json arr = json::array();
  for (const CellTuple& t : tuples) {
    arr.push_back({{"row", t.row_label}, {"col", t.col_label}, {"value", t.value}});
  }
  return arr;
}

std::vector<CellTuple> tuples_from_json(const json& arr) {
  std::vector<CellTuple> out;
  for (const json& item : arr) {
    out.push_back(CellTuple{item.at("row").get<std::string>(),
                            item.at("col").get<std::string>(),
                            item.at("value").get<std::string>()});
  }
  return out;
}

}  // namespace

std::filesystem::path build_manifest(const std::vector<Document>& docs,
                                     const std::filesystem::path& out_dir) {
  std::vector<std::string> violations;
  for (const Document& doc : docs) {
    for (const std::string& v : validate_document(doc)) {
      violations.push_back(doc.id + ": " + v);
    }
  }
  if (!violations.empty()) {
    throw ValidationFailed("corpus validation failed", std::move(violations));
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create output dir: " + out_dir.string());

  json manifest;
  manifest["documents"] = json::array();
  for (const Document& doc : docs) {
    std::string stem = sanitize_id(doc.id);
    std::string md_name = stem + ".md";
    write_file(out_dir / md_name, doc.markdown);

    json entry;
    entry["id"] = doc.id;
    entry["source_url"] = doc.source_url;
    entry["markdown_path"] = md_name;
    entry["tables"] = json::array();
    for (const TableRecord& table : doc.tables) {
      std::string html_name = stem + "." + table.tag + ".html";
      std::string tuples_name = stem + "." + table.tag + ".json";
      write_file(out_dir / html_name, table.html_source);
      write_file(out_dir / tuples_name, tuples_to_json(table.tuples).dump(2) + "\n");
      json t;
      t["tag"] = table.tag;
      t["caption"] = table.caption ? json(*table.caption) : json(nullptr);
      t["html_path"] = html_name;
      t["tuples_path"] = tuples_name;
      entry["tables"].push_back(std::move(t));
    }
    entry["charts"] = json::array();
    for (const ChartRef& chart : doc.charts) {
      entry["charts"].push_back({{"tag", chart.tag},
                                 {"image_path", chart.local_path.string()},
                                 {"image_url", chart.remote_url}});
    }
    manifest["documents"].push_back(std::move(entry));
  }

  std::filesystem::path manifest_path = out_dir / "corpus.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

std::vector<Document> load_manifest(const std::filesystem::path& corpus_json) {
  std::string raw = read_file(corpus_json);
  json manifest;
  try {
    manifest = json::parse(raw);
  } catch (const json::exception& e) {
    throw IoFailure("corpus manifest is not valid JSON: " + std::string(e.what()));
  }
  std::filesystem::path base = corpus_json.parent_path();

  std::vector<Document> docs;
  try {
    for (const json& entry : manifest.at("documents")) {
      Document doc;
      doc.id = entry.at("id").get<std::string>();
      doc.source_url = entry.value("source_url", std::string());
      doc.markdown = read_file(base / entry.at("markdown_path").get<std::string>());
      for (const json& t : entry.at("tables")) {
        TableRecord table;
        table.tag = t.at("tag").get<std::string>();
        if (t.contains("caption") && !t.at("caption").is_null()) {
          table.caption = t.at("caption").get<std::string>();
        }
        table.html_source = read_file(base / t.at("html_path").get<std::string>());
        json tj;
        try {
          tj = json::parse(read_file(base / t.at("tuples_path").get<std::string>()));
        } catch (const json::exception& e) {
          throw IoFailure("tuples file is not valid JSON: " + std::string(e.what()));
        }
        table.tuples = tuples_from_json(tj);
        doc.tables.push_back(std::move(table));
      }
      for (const json& c : entry.at("charts")) {
        ChartRef chart;
        chart.tag = c.at("tag").get<std::string>();
        chart.local_path = c.at("image_path").get<std::string>();
        chart.remote_url = c.value("image_url", std::string());
        doc.charts.push_back(std::move(chart));
      }
      docs.push_back(std::move(doc));
    }
  } catch (const json::exception& e) {
    throw IoFailure("corpus manifest missing fields: " + std::string(e.what()));
  }
  return docs;
}

}  // namespace aed::ingest
