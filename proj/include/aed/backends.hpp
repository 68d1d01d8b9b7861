#pragma once
// Chat, vision-chat, embedding, and OCR clients: HTTP implementations with a
// fixed wire protocol, deterministic in-process mocks, and transcript
// capture/replay wrappers.

#include <array>
#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "aed/core.hpp"

namespace aed::backends {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  AgentProfile profile;  // sent as the system message
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

// Image payload plus the path it came from; mocks and transcripts key on the
// name, the HTTP backends send the bytes.
struct ImageData {
  std::string bytes;
  std::string name;
};

struct OcrToken {
  std::string text;
  std::array<std::array<double, 2>, 4> bbox{};
  double confidence = 0.0;
};

struct EmbeddingVector {
  std::vector<double> values;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// ---------------------------------------------------------------------------
// errors

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedResponse : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A mock with no scripted reply for the incoming prompt.
struct MockMiss : MalformedResponse {
  using MalformedResponse::MalformedResponse;
};
struct EmptyInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MissingFixture : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidRequest : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Throws InvalidRequest before any I/O: empty message list, unknown role,
// or negative temperature.
void validate_request(const ChatRequest& req);

// ---------------------------------------------------------------------------
// interfaces

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string chat(const ChatRequest& req) = 0;
};

class VisionBackend {
 public:
  virtual ~VisionBackend() = default;
  virtual std::string vision_chat(const ChatRequest& req, const ImageData& image) = 0;
};

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
};

class OcrBackend {
 public:
  virtual ~OcrBackend() = default;
  virtual std::vector<OcrToken> ocr(const ImageData& image) = 0;
};

// Everything the engine needs, one slot per role.
struct BackendSet {
  std::shared_ptr<ChatBackend> allocator;
  std::shared_ptr<ChatBackend> text_expert;
  std::shared_ptr<ChatBackend> table_expert;
  std::shared_ptr<ChatBackend> decision;
  std::shared_ptr<VisionBackend> vision;
  std::shared_ptr<EmbedBackend> embedder;
  std::shared_ptr<OcrBackend> ocr;
};

// ---------------------------------------------------------------------------
// HTTP clients (chat-completions wire shape)

struct HttpOptions {
  std::string url;      // full endpoint, e.g. http://host:8080/v1/chat/completions
  std::string model;
  std::string api_key;  // optional; sent as Bearer token when set
  int max_retries = 3;
  int retry_base_ms = 100;
  int max_in_flight = 4;
};

class HttpChatBackend : public ChatBackend, public VisionBackend {
 public:
  explicit HttpChatBackend(HttpOptions options);
  ~HttpChatBackend() override;
  std::string chat(const ChatRequest& req) override;
  std::string vision_chat(const ChatRequest& req, const ImageData& image) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpEmbedBackend : public EmbedBackend {
 public:
  explicit HttpEmbedBackend(HttpOptions options);
  ~HttpEmbedBackend() override;
  EmbeddingVector embed(const std::string& text) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpOcrBackend : public OcrBackend {
 public:
  explicit HttpOcrBackend(HttpOptions options);
  ~HttpOcrBackend() override;
  std::vector<OcrToken> ocr(const ImageData& image) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// mocks

// Replies are keyed on the last user message. Rules are tried in insertion
// order; no match raises MockMiss naming the prompt.
class ScriptedChatBackend : public ChatBackend, public VisionBackend {
 public:
  void add_exact(std::string prompt, std::string reply);
  void add_contains(std::string needle, std::string reply);

  std::string chat(const ChatRequest& req) override;
  std::string vision_chat(const ChatRequest& req, const ImageData& image) override;

  int chat_calls() const { return chat_calls_.load(); }
  int vision_calls() const { return vision_calls_.load(); }

 private:
  struct Rule {
    bool exact;
    std::string needle;
    std::string reply;
  };
  std::string lookup(const ChatRequest& req);
  std::vector<Rule> rules_;
  std::atomic<int> chat_calls_{0};
  std::atomic<int> vision_calls_{0};
};

class CallbackChatBackend : public ChatBackend, public VisionBackend {
 public:
  using ChatFn = std::function<std::string(const ChatRequest&)>;
  using VisionFn = std::function<std::string(const ChatRequest&, const ImageData&)>;
  explicit CallbackChatBackend(ChatFn chat_fn, VisionFn vision_fn = nullptr)
      : chat_fn_(std::move(chat_fn)), vision_fn_(std::move(vision_fn)) {}
  std::string chat(const ChatRequest& req) override;
  std::string vision_chat(const ChatRequest& req, const ImageData& image) override;

 private:
  ChatFn chat_fn_;
  VisionFn vision_fn_;
};

// Character-trigram hashing into 256 dimensions, L2-normalized. Pure and
// deterministic across platforms.
class TrigramEmbedBackend : public EmbedBackend {
 public:
  static constexpr size_t kDims = 256;
  EmbeddingVector embed(const std::string& text) override;
};

// Reads `{image path}.ocr.json` next to the image file.
class SidecarOcrBackend : public OcrBackend {
 public:
  std::vector<OcrToken> ocr(const ImageData& image) override;
};

// ---------------------------------------------------------------------------
// transcript capture / replay (JSON Lines of {kind, request, response})

class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path);
  void record(const std::string& kind, const std::string& request_json,
              const std::string& response_json);

 private:
  std::mutex mutex_;
  std::string path_;
};

class TranscriptReplay {
 public:
  explicit TranscriptReplay(const std::filesystem::path& path);
  // Pops the next recorded response for this request; the final entry is
  // reused once a queue is exhausted.
  std::string take(const std::string& kind, const std::string& request_json);

 private:
  std::mutex mutex_;
  std::map<std::string, std::deque<std::string>> queues_;
  std::map<std::string, std::string> last_;
};

// Wraps a full BackendSet so every call is recorded to, or served from, a
// transcript file.
BackendSet with_capture(BackendSet inner, std::shared_ptr<TranscriptWriter> writer);
BackendSet replay_backends(std::shared_ptr<TranscriptReplay> replay);

}  // namespace aed::backends
