#include "aed/backends.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aed/unicode.hpp"

namespace aed::backends {
namespace {

using json = nlohmann::json;

class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count > 0 ? count : 1) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int count_;
};

struct SemGuard {
  explicit SemGuard(Semaphore& sem) : sem_(sem) { sem_.acquire(); }
  ~SemGuard() { sem_.release(); }
  SemGuard(const SemGuard&) = delete;
  SemGuard& operator=(const SemGuard&) = delete;
  Semaphore& sem_;
};

std::string truncate_for_message(std::string_view s, size_t limit = 200) {
  if (s.size() <= limit) return std::string(s);
  size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut)) + "...";
}

std::string base64_encode(std::string_view bytes) {
  static const char alphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= bytes.size()) {
    uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += alphabet[(n >> 6) & 63];
    out += alphabet[n & 63];
    i += 3;
  }
  size_t rest = bytes.size() - i;
  if (rest == 1) {
    uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += alphabet[(n >> 18) & 63];
    out += alphabet[(n >> 12) & 63];
    out += alphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string sniff_mime(std::string_view bytes) {
  if (bytes.size() >= 4 && bytes.compare(0, 4, "\x89PNG") == 0) return "image/png";
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8) {
    return "image/jpeg";
  }
  if (bytes.size() >= 4 && bytes.compare(0, 4, "GIF8") == 0) return "image/gif";
  return "image/png";
}

std::string file_basename(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

std::string system_text(const AgentProfile& profile) {
  std::string out = profile.role_description;
  if (!profile.output_format_instructions.empty()) {
    if (!out.empty()) out += "\n\n";
    out += profile.output_format_instructions;
  }
  return out;
}

json build_chat_body(const std::string& model, const ChatRequest& req,
                     const ImageData* image) {
  json messages = json::array();
  std::string sys = system_text(req.profile);
  if (!sys.empty()) messages.push_back({{"role", "system"}, {"content", sys}});

  int last_user = -1;
  for (size_t i = 0; i < req.messages.size(); ++i) {
    if (req.messages[i].role == "user") last_user = static_cast<int>(i);
  }
  if (image != nullptr && last_user < 0) {
    throw InvalidRequest("vision request carries no user message");
  }
  for (size_t i = 0; i < req.messages.size(); ++i) {
    const ChatMessage& m = req.messages[i];
    if (image != nullptr && static_cast<int>(i) == last_user) {
      json parts = json::array();
      parts.push_back({{"type", "text"}, {"text", m.content}});
      std::string url = "data:" + sniff_mime(image->bytes) + ";base64," +
                        base64_encode(image->bytes);
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
      messages.push_back({{"role", m.role}, {"content", std::move(parts)}});
    } else {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
  }
  return json{{"model", model}, {"messages", std::move(messages)},
              {"temperature", req.temperature}};
}

std::string parse_chat_content(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw MalformedResponse("chat response is not JSON: " + truncate_for_message(body));
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw MalformedResponse("chat response lacks choices[]");
  }
  const json& msg = j["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content") ||
      !msg["message"]["content"].is_string()) {
    throw MalformedResponse("chat response lacks choices[0].message.content");
  }
  return msg["message"]["content"].get<std::string>();
}

EmbeddingVector parse_embedding(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw MalformedResponse("embedding response is not JSON: " +
                            truncate_for_message(body));
  }
  if (!j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
      !j["data"][0].contains("embedding") || !j["data"][0]["embedding"].is_array()) {
    throw MalformedResponse("embedding response lacks data[0].embedding");
  }
  EmbeddingVector vec;
  for (const json& v : j["data"][0]["embedding"]) {
    if (!v.is_number()) throw MalformedResponse("embedding value is not a number");
    vec.values.push_back(v.get<double>());
  }
  if (vec.values.empty()) throw MalformedResponse("embedding vector is empty");
  return vec;
}

std::vector<OcrToken> parse_ocr_tokens(const json& arr) {
  if (!arr.is_array()) throw MalformedResponse("OCR response is not an array");
  std::vector<OcrToken> tokens;
  for (const json& item : arr) {
    OcrToken token;
    if (!item.contains("text") || !item["text"].is_string() ||
        !item.contains("bbox") || !item["bbox"].is_array() ||
        item["bbox"].size() != 4 || !item.contains("score") ||
        !item["score"].is_number()) {
      throw MalformedResponse("OCR token missing text/bbox/score");
    }
    token.text = item["text"].get<std::string>();
    for (size_t i = 0; i < 4; ++i) {
      const json& point = item["bbox"][i];
      if (!point.is_array() || point.size() != 2 || !point[0].is_number() ||
          !point[1].is_number()) {
        throw MalformedResponse("OCR bbox point malformed");
      }
      token.bbox[i][0] = point[0].get<double>();
      token.bbox[i][1] = point[1].get<double>();
      if (!std::isfinite(token.bbox[i][0]) || !std::isfinite(token.bbox[i][1])) {
        throw MalformedResponse("OCR bbox point not finite");
      }
    }
    token.confidence = item["score"].get<double>();
    if (!(token.confidence >= 0.0 && token.confidence <= 1.0)) {
      throw MalformedResponse("OCR confidence outside [0,1]");
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with /
};

ParsedUrl parse_url(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw TransportError("endpoint URL lacks scheme: " + url);
  }
  size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

httplib::Headers auth_headers(const HttpOptions& opt) {
  httplib::Headers headers;
  if (!opt.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + opt.api_key);
  }
  return headers;
}

std::string post_with_retry(const HttpOptions& opt, const std::string& body,
                            const std::string& content_type) {
  ParsedUrl url = parse_url(opt.url);
  int attempt = 0;
  for (;;) {
    httplib::Client client(url.base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    auto res = client.Post(url.path, auth_headers(opt), body, content_type);
    if (res && res->status >= 200 && res->status < 300) return res->body;

    std::string reason = res ? "HTTP " + std::to_string(res->status)
                             : "connection failed (" + httplib::to_string(res.error()) + ")";
    bool transient = !res || res->status >= 500 || res->status == 429 ||
                     res->status == 408;
    if (!transient) {
      throw TransportError(reason + " from " + opt.url);
    }
    if (attempt >= opt.max_retries) {
      throw TransportError(reason + " from " + opt.url + " after " +
                           std::to_string(attempt + 1) + " attempts");
    }
    std::this_thread::sleep_for(
        std::chrono::milliseconds(static_cast<long>(opt.retry_base_ms) << attempt));
    ++attempt;
  }
}

// canonical request forms used by capture and replay
json chat_request_key(const ChatRequest& req) {
  json messages = json::array();
  std::string sys = system_text(req.profile);
  if (!sys.empty()) messages.push_back({{"role", "system"}, {"content", sys}});
  for (const ChatMessage& m : req.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return json{{"messages", std::move(messages)}, {"temperature", req.temperature}};
}

json vision_request_key(const ChatRequest& req, const ImageData& image) {
  json key = chat_request_key(req);
  key["image"] = file_basename(image.name);
  key["image_size"] = image.bytes.size();
  return key;
}

json embed_request_key(const std::string& text) { return json{{"input", text}}; }

json ocr_request_key(const ImageData& image) {
  return json{{"image", file_basename(image.name)}, {"image_size", image.bytes.size()}};
}

uint64_t fnv1a(std::string_view bytes) {
  uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace

// ---------------------------------------------------------------------------

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("embedding dimensions differ");
  }
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) {
    throw InvalidRequest("chat request has no messages");
  }
  for (const ChatMessage& m : req.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw InvalidRequest("unknown message role: " + m.role);
    }
  }
  if (req.temperature < 0) {
    throw InvalidRequest("temperature must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// HTTP backends

struct HttpChatBackend::Impl {
  HttpOptions opt;
  Semaphore sem;
  explicit Impl(HttpOptions o) : opt(std::move(o)), sem(opt.max_in_flight) {}
};

HttpChatBackend::HttpChatBackend(HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}
HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::chat(const ChatRequest& req) {
  validate_request(req);
  json body = build_chat_body(impl_->opt.model, req, nullptr);
  SemGuard guard(impl_->sem);
  return parse_chat_content(
      post_with_retry(impl_->opt, body.dump(), "application/json"));
}

std::string HttpChatBackend::vision_chat(const ChatRequest& req, const ImageData& image) {
  validate_request(req);
  json body = build_chat_body(impl_->opt.model, req, &image);
  SemGuard guard(impl_->sem);
  return parse_chat_content(
      post_with_retry(impl_->opt, body.dump(), "application/json"));
}

struct HttpEmbedBackend::Impl {
  HttpOptions opt;
  Semaphore sem;
  explicit Impl(HttpOptions o) : opt(std::move(o)), sem(opt.max_in_flight) {}
};

HttpEmbedBackend::HttpEmbedBackend(HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}
HttpEmbedBackend::~HttpEmbedBackend() = default;

EmbeddingVector HttpEmbedBackend::embed(const std::string& text) {
  if (text.empty()) throw EmptyInput("embed requires non-empty text");
  json body{{"model", impl_->opt.model}, {"input", text}};
  SemGuard guard(impl_->sem);
  return parse_embedding(
      post_with_retry(impl_->opt, body.dump(), "application/json"));
}

struct HttpOcrBackend::Impl {
  HttpOptions opt;
  Semaphore sem;
  explicit Impl(HttpOptions o) : opt(std::move(o)), sem(opt.max_in_flight) {}
};

HttpOcrBackend::HttpOcrBackend(HttpOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}
HttpOcrBackend::~HttpOcrBackend() = default;

std::vector<OcrToken> HttpOcrBackend::ocr(const ImageData& image) {
  SemGuard guard(impl_->sem);
  std::string body =
      post_with_retry(impl_->opt, image.bytes, "application/octet-stream");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw MalformedResponse("OCR response is not JSON: " + truncate_for_message(body));
  }
  return parse_ocr_tokens(j);
}

// ---------------------------------------------------------------------------
// mocks

void ScriptedChatBackend::add_exact(std::string prompt, std::string reply) {
  rules_.push_back(Rule{true, std::move(prompt), std::move(reply)});
}

void ScriptedChatBackend::add_contains(std::string needle, std::string reply) {
  rules_.push_back(Rule{false, std::move(needle), std::move(reply)});
}

std::string ScriptedChatBackend::lookup(const ChatRequest& req) {
  validate_request(req);
  const std::string* key = &req.messages.back().content;
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == "user") {
      key = &it->content;
      break;
    }
  }
  for (const Rule& rule : rules_) {
    bool matched = rule.exact ? (*key == rule.needle)
                              : (key->find(rule.needle) != std::string::npos);
    if (matched) return rule.reply;
  }
  throw MockMiss("no scripted reply for prompt: \"" + truncate_for_message(*key) + "\"");
}

std::string ScriptedChatBackend::chat(const ChatRequest& req) {
  chat_calls_.fetch_add(1);
  return lookup(req);
}

std::string ScriptedChatBackend::vision_chat(const ChatRequest& req, const ImageData&) {
  vision_calls_.fetch_add(1);
  return lookup(req);
}

std::string CallbackChatBackend::chat(const ChatRequest& req) {
  validate_request(req);
  if (!chat_fn_) throw MockMiss("no chat callback installed");
  return chat_fn_(req);
}

std::string CallbackChatBackend::vision_chat(const ChatRequest& req,
                                             const ImageData& image) {
  validate_request(req);
  if (vision_fn_) return vision_fn_(req, image);
  if (chat_fn_) return chat_fn_(req);
  throw MockMiss("no vision callback installed");
}

EmbeddingVector TrigramEmbedBackend::embed(const std::string& text) {
  if (text.empty()) throw EmptyInput("embed requires non-empty text");
  std::vector<char32_t> cps = uni::decode_utf8(text);

  EmbeddingVector vec;
  vec.values.assign(kDims, 0.0);
  auto bump = [&](size_t begin, size_t len) {
    std::string bytes;
    for (size_t k = 0; k < len; ++k) uni::append_utf8(bytes, cps[begin + k]);
    vec.values[fnv1a(bytes) % kDims] += 1.0;
  };
  if (cps.size() < 3) {
    bump(0, cps.size());
  } else {
    for (size_t i = 0; i + 3 <= cps.size(); ++i) bump(i, 3);
  }
  double norm = 0;
  for (double v : vec.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (double& v : vec.values) v /= norm;
  }
  return vec;
}

std::vector<OcrToken> SidecarOcrBackend::ocr(const ImageData& image) {
  std::string sidecar = image.name + ".ocr.json";
  std::ifstream in(sidecar, std::ios::binary);
  if (!in) throw MissingFixture("no OCR sidecar: " + sidecar);
  std::ostringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::exception&) {
    throw MalformedResponse("OCR sidecar is not JSON: " + sidecar);
  }
  return parse_ocr_tokens(j);
}

// ---------------------------------------------------------------------------
// transcripts

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path)
    : path_(path.string()) {
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open transcript for writing: " + path_);
}

void TranscriptWriter::record(const std::string& kind, const std::string& request_json,
                              const std::string& response_json) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to transcript: " + path_);
  json line{{"kind", kind}, {"request", json::parse(request_json)},
            {"response", json::parse(response_json)}};
  out << line.dump() << "\n";
}

TranscriptReplay::TranscriptReplay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open transcript: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw std::runtime_error("transcript line is not JSON: " + truncate_for_message(line));
    }
    std::string key = j.at("kind").get<std::string>() + "\n" + j.at("request").dump();
    queues_[key].push_back(j.at("response").dump());
  }
}

std::string TranscriptReplay::take(const std::string& kind,
                                   const std::string& request_json) {
  std::string key = kind + "\n" + json::parse(request_json).dump();
  std::lock_guard lock(mutex_);
  auto it = queues_.find(key);
  if (it != queues_.end() && !it->second.empty()) {
    std::string response = std::move(it->second.front());
    it->second.pop_front();
    last_[key] = response;
    return response;
  }
  auto lit = last_.find(key);
  if (lit != last_.end()) return lit->second;
  throw MockMiss("transcript has no entry for " + kind +
                 " request: " + truncate_for_message(request_json));
}

namespace {

class RecordingChat : public ChatBackend, public VisionBackend {
 public:
  RecordingChat(std::shared_ptr<ChatBackend> chat_inner,
                std::shared_ptr<VisionBackend> vision_inner,
                std::shared_ptr<TranscriptWriter> writer)
      : chat_(std::move(chat_inner)), vision_(std::move(vision_inner)),
        writer_(std::move(writer)) {}

  std::string chat(const ChatRequest& req) override {
    std::string out = chat_->chat(req);
    writer_->record("chat", chat_request_key(req).dump(), json{{"text", out}}.dump());
    return out;
  }
  std::string vision_chat(const ChatRequest& req, const ImageData& image) override {
    std::string out = vision_->vision_chat(req, image);
    writer_->record("vision", vision_request_key(req, image).dump(),
                    json{{"text", out}}.dump());
    return out;
  }

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<VisionBackend> vision_;
  std::shared_ptr<TranscriptWriter> writer_;
};

class RecordingEmbed : public EmbedBackend {
 public:
  RecordingEmbed(std::shared_ptr<EmbedBackend> inner,
                 std::shared_ptr<TranscriptWriter> writer)
      : inner_(std::move(inner)), writer_(std::move(writer)) {}
  EmbeddingVector embed(const std::string& text) override {
    EmbeddingVector out = inner_->embed(text);
    writer_->record("embed", embed_request_key(text).dump(),
                    json{{"embedding", out.values}}.dump());
    return out;
  }

 private:
  std::shared_ptr<EmbedBackend> inner_;
  std::shared_ptr<TranscriptWriter> writer_;
};

class RecordingOcr : public OcrBackend {
 public:
  RecordingOcr(std::shared_ptr<OcrBackend> inner,
               std::shared_ptr<TranscriptWriter> writer)
      : inner_(std::move(inner)), writer_(std::move(writer)) {}
  std::vector<OcrToken> ocr(const ImageData& image) override {
    std::vector<OcrToken> tokens = inner_->ocr(image);
    json arr = json::array();
    for (const OcrToken& t : tokens) {
      json bbox = json::array();
      for (const auto& p : t.bbox) bbox.push_back({p[0], p[1]});
      arr.push_back({{"text", t.text}, {"bbox", std::move(bbox)}, {"score", t.confidence}});
    }
    writer_->record("ocr", ocr_request_key(image).dump(),
                    json{{"tokens", std::move(arr)}}.dump());
    return tokens;
  }

 private:
  std::shared_ptr<OcrBackend> inner_;
  std::shared_ptr<TranscriptWriter> writer_;
};

class ReplayChat : public ChatBackend, public VisionBackend {
 public:
  explicit ReplayChat(std::shared_ptr<TranscriptReplay> replay)
      : replay_(std::move(replay)) {}
  std::string chat(const ChatRequest& req) override {
    validate_request(req);
    return text_of(replay_->take("chat", chat_request_key(req).dump()));
  }
  std::string vision_chat(const ChatRequest& req, const ImageData& image) override {
    validate_request(req);
    return text_of(replay_->take("vision", vision_request_key(req, image).dump()));
  }

 private:
  static std::string text_of(const std::string& response_json) {
    json j = json::parse(response_json);
    if (!j.contains("text") || !j["text"].is_string()) {
      throw MalformedResponse("replayed chat response lacks text");
    }
    return j["text"].get<std::string>();
  }
  std::shared_ptr<TranscriptReplay> replay_;
};

class ReplayEmbed : public EmbedBackend {
 public:
  explicit ReplayEmbed(std::shared_ptr<TranscriptReplay> replay)
      : replay_(std::move(replay)) {}
  EmbeddingVector embed(const std::string& text) override {
    if (text.empty()) throw EmptyInput("embed requires non-empty text");
    json j = json::parse(replay_->take("embed", embed_request_key(text).dump()));
    if (!j.contains("embedding") || !j["embedding"].is_array()) {
      throw MalformedResponse("replayed embedding lacks values");
    }
    EmbeddingVector out;
    for (const json& v : j["embedding"]) out.values.push_back(v.get<double>());
    return out;
  }

 private:
  std::shared_ptr<TranscriptReplay> replay_;
};

class ReplayOcr : public OcrBackend {
 public:
  explicit ReplayOcr(std::shared_ptr<TranscriptReplay> replay)
      : replay_(std::move(replay)) {}
  std::vector<OcrToken> ocr(const ImageData& image) override {
    json j = json::parse(replay_->take("ocr", ocr_request_key(image).dump()));
    if (!j.contains("tokens")) throw MalformedResponse("replayed OCR lacks tokens");
    return parse_ocr_tokens(j["tokens"]);
  }

 private:
  std::shared_ptr<TranscriptReplay> replay_;
};

std::shared_ptr<ChatBackend> wrap_chat(std::shared_ptr<ChatBackend> inner,
                                       std::shared_ptr<TranscriptWriter> writer) {
  if (!inner) return nullptr;
  return std::make_shared<RecordingChat>(std::move(inner), nullptr, writer);
}

}  // namespace

BackendSet with_capture(BackendSet inner, std::shared_ptr<TranscriptWriter> writer) {
  BackendSet out;
  out.allocator = wrap_chat(inner.allocator, writer);
  out.text_expert = wrap_chat(inner.text_expert, writer);
  out.table_expert = wrap_chat(inner.table_expert, writer);
  out.decision = wrap_chat(inner.decision, writer);
  if (inner.vision) {
    out.vision = std::make_shared<RecordingChat>(nullptr, inner.vision, writer);
  }
  if (inner.embedder) {
    out.embedder = std::make_shared<RecordingEmbed>(inner.embedder, writer);
  }
  if (inner.ocr) {
    out.ocr = std::make_shared<RecordingOcr>(inner.ocr, writer);
  }
  return out;
}

BackendSet replay_backends(std::shared_ptr<TranscriptReplay> replay) {
  BackendSet out;
  auto chat = std::make_shared<ReplayChat>(replay);
  out.allocator = chat;
  out.text_expert = chat;
  out.table_expert = chat;
  out.decision = chat;
  out.vision = std::make_shared<ReplayChat>(replay);
  out.embedder = std::make_shared<ReplayEmbed>(replay);
  out.ocr = std::make_shared<ReplayOcr>(replay);
  return out;
}

}  // namespace aed::backends
