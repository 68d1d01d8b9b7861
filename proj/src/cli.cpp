#include "aed/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI/CLI.hpp>
#include <nlohmann/json.hpp>

#include "aed/agents.hpp"
#include "aed/ingest.hpp"

namespace aed::cli {
namespace {

using json = nlohmann::json;

std::string trimmed(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

void write_text_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void emit_error_json(const std::string& message) {
  std::cerr << json{{"error", message}}.dump() << "\n";
}

// Runs a command body and maps exceptions onto the exit-code contract.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    emit_error_json(e.what());
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    emit_error_json(e.what());
    return kExitConfigError;
  } catch (const backends::TransportError& e) {
    emit_error_json(e.what());
    return kExitBackendError;
  } catch (const DataError& e) {
    emit_error_json(e.what());
    return kExitDataError;
  } catch (const ingest::ValidationFailed& e) {
    std::string message = e.what();
    for (const std::string& v : e.violations) message += "; " + v;
    emit_error_json(message);
    return kExitDataError;
  } catch (const std::exception& e) {
    emit_error_json(e.what());
    return kExitDataError;
  }
}

// ---------------------------------------------------------------------------
// config

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "' wants a boolean, got '" + value + "'");
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' wants a number, got '" + value + "'");
  }
}

long long parse_int(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' wants an integer, got '" + value + "'");
  }
}

void set_all_chat_endpoints(EngineConfig& engine, const std::string& url) {
  engine.allocator.endpoint = url;
  engine.decision.endpoint = url;
  engine.text_expert.endpoint = url;
  engine.table_expert.endpoint = url;
  if (engine.vision.endpoint.empty()) engine.vision.endpoint = url;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "api_key" || key == "apikey" || key == "aed_api_key") {
    throw ConfigError("api_key is not accepted in config files; set AED_API_KEY instead");
  }
  if (key == "threshold") {
    cfg.engine.activation_threshold = parse_real(value, key);
  } else if (key == "concurrency") {
    cfg.engine.max_concurrency = static_cast<int>(parse_int(value, key));
  } else if (key == "chart_top_k") {
    cfg.engine.chart_top_k = static_cast<int>(parse_int(value, key));
  } else if (key == "ocr_all_charts") {
    cfg.engine.ocr_all_charts = parse_bool(value, key);
  } else if (key == "max_retries") {
    cfg.engine.max_retries = static_cast<int>(parse_int(value, key));
  } else if (key == "chat_url") {
    set_all_chat_endpoints(cfg.engine, value);
  } else if (key == "vision_url") {
    cfg.engine.vision.endpoint = value;
  } else if (key == "embed_url") {
    cfg.engine.embedding.endpoint = value;
  } else if (key == "ocr_url") {
    cfg.engine.ocr.endpoint = value;
  } else if (key == "chat_model") {
    cfg.engine.allocator.model = value;
    cfg.engine.decision.model = value;
    cfg.engine.text_expert.model = value;
    cfg.engine.table_expert.model = value;
  } else if (key == "vision_model") {
    cfg.engine.vision.model = value;
  } else if (key == "embed_model") {
    cfg.engine.embedding.model = value;
  } else if (key == "corpus") {
    cfg.corpus_path = value;
  } else if (key == "qa") {
    cfg.qa_path = value;
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "lexicon") {
    cfg.lexicon_path = value;
  } else if (key == "stopwords") {
    cfg.stopwords_path = value;
  } else if (key == "unit_suffixes") {
    cfg.unit_suffixes_path = value;
  } else if (key == "mock") {
    cfg.mock_mode = value;
  } else if (key == "capture") {
    cfg.capture_path = value;
  } else if (key == "replay") {
    cfg.replay_path = value;
  } else if (key == "seed") {
    cfg.qa_gen.seed = static_cast<uint64_t>(parse_int(value, key));
  } else if (key == "manual_ratio") {
    cfg.qa_gen.manual_ratio = parse_real(value, key);
  } else if (key == "pairs_per_text") {
    cfg.qa_gen.pairs_per_text = static_cast<int>(parse_int(value, key));
  } else if (key == "pairs_per_table") {
    cfg.qa_gen.pairs_per_table = static_cast<int>(parse_int(value, key));
  } else if (key == "pairs_per_chart") {
    cfg.qa_gen.pairs_per_chart = static_cast<int>(parse_int(value, key));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

// ---------------------------------------------------------------------------
// mock backends

const QAPair* find_pair_in_prompt(const std::vector<QAPair>& qa, const std::string& prompt) {
  for (const QAPair& pair : qa) {
    if (!pair.question.empty() && prompt.find(pair.question) != std::string::npos) {
      return &pair;
    }
  }
  return nullptr;
}

std::string last_user_content(const backends::ChatRequest& req) {
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return req.messages.empty() ? std::string() : req.messages.back().content;
}

std::string allocation_line(const ModalityRef& m, const char* prob) {
  switch (m.kind) {
    case Modality::Text:
      return std::string("P(text)=") + prob;
    case Modality::Table:
      return "P(table_" + std::to_string(m.index) + ")=" + prob;
    case Modality::Chart:
      return "P(img_" + std::to_string(m.index) + ")=" + prob;
    case Modality::Unanswerable:
      break;
  }
  return {};
}

std::string first_candidate_tag(const std::string& decision_prompt) {
  size_t open = decision_prompt.find("- [");
  if (open == std::string::npos) return {};
  size_t close = decision_prompt.find(']', open);
  if (close == std::string::npos) return {};
  return decision_prompt.substr(open + 3, close - open - 3);
}

backends::BackendSet make_gold_mocks(std::shared_ptr<std::vector<QAPair>> qa) {
  backends::BackendSet set;
  auto allocator_fn = [qa](const backends::ChatRequest& req) -> std::string {
    std::string prompt = last_user_content(req);
    const QAPair* pair = find_pair_in_prompt(*qa, prompt);
    if (pair == nullptr) {
      throw backends::MockMiss("gold allocator: no qa question found in prompt");
    }
    std::string reply;
    for (const ModalityRef& m : pair->modalities) {
      if (!reply.empty()) reply += "\n";
      reply += allocation_line(m, "0.9");
    }
    return reply;
  };
  auto expert_fn = [qa](const backends::ChatRequest& req) -> std::string {
    const QAPair* pair = find_pair_in_prompt(*qa, last_user_content(req));
    if (pair == nullptr) {
      throw backends::MockMiss("gold expert: no qa question found in prompt");
    }
    return "ANSWER: " + pair->gold_answer + "\nCONFIDENCE: 0.9";
  };
  auto decision_fn = [](const backends::ChatRequest& req) -> std::string {
    std::string tag = first_candidate_tag(last_user_content(req));
    if (tag.empty()) {
      throw backends::MockMiss("gold decision: no candidate list in prompt");
    }
    return "MODALITY: " + tag + "\nANSWER: as picked";
  };

  set.allocator = std::make_shared<backends::CallbackChatBackend>(allocator_fn);
  auto expert = std::make_shared<backends::CallbackChatBackend>(expert_fn);
  set.text_expert = expert;
  set.table_expert = expert;
  set.vision = expert;
  set.decision = std::make_shared<backends::CallbackChatBackend>(decision_fn);
  set.embedder = std::make_shared<backends::TrigramEmbedBackend>();
  set.ocr = std::make_shared<backends::SidecarOcrBackend>();
  return set;
}

backends::BackendSet make_garbage_mocks() {
  backends::BackendSet set;
  set.allocator = std::make_shared<backends::CallbackChatBackend>(
      [](const backends::ChatRequest&) { return "P(text)=0.9"; });
  auto expert = std::make_shared<backends::CallbackChatBackend>(
      [](const backends::ChatRequest&) { return "ANSWER: zzzqxv\nCONFIDENCE: 0.1"; });
  set.text_expert = expert;
  set.table_expert = expert;
  set.vision = expert;
  set.decision = std::make_shared<backends::CallbackChatBackend>(
      [](const backends::ChatRequest& req) -> std::string {
        std::string tag = first_candidate_tag(last_user_content(req));
        if (tag.empty()) {
          throw backends::MockMiss("garbage decision: no candidate list in prompt");
        }
        return "MODALITY: " + tag + "\nANSWER: as picked";
      });
  set.embedder = std::make_shared<backends::TrigramEmbedBackend>();
  set.ocr = std::make_shared<backends::SidecarOcrBackend>();
  return set;
}

backends::HttpOptions http_options(const BackendRole& role, const RunConfig& cfg) {
  backends::HttpOptions opt;
  opt.url = role.endpoint;
  opt.model = role.model;
  opt.api_key = env_or_empty("AED_API_KEY");
  opt.max_retries = cfg.engine.max_retries;
  opt.max_in_flight = cfg.engine.max_concurrency;
  return opt;
}

// ---------------------------------------------------------------------------
// shared run plumbing

struct Corpus {
  std::vector<Document> docs;
  std::map<std::string, const Document*> by_id;
};

Corpus load_corpus(const RunConfig& cfg) {
  if (cfg.corpus_path.empty()) {
    throw ConfigError("no corpus given; pass --corpus or set corpus in the config");
  }
  Corpus corpus;
  try {
    corpus.docs = ingest::load_manifest(cfg.corpus_path);
  } catch (const ingest::IoFailure& e) {
    throw DataError(e.what());
  }
  std::vector<std::string> violations;
  for (const Document& doc : corpus.docs) {
    for (const std::string& v : validate_document(doc)) {
      violations.push_back(doc.id + ": " + v);
    }
    corpus.by_id[doc.id] = &doc;
  }
  if (!violations.empty()) {
    std::string what = "corpus failed validation:";
    for (const std::string& v : violations) what += " " + v + ";";
    throw DataError(what);
  }
  return corpus;
}

std::vector<QAPair> load_qa(const RunConfig& cfg, std::vector<std::string>* errors) {
  if (cfg.qa_path.empty()) {
    throw ConfigError("no qa file given; pass --qa or set qa in the config");
  }
  try {
    return load_qa_file(cfg.qa_path, errors);
  } catch (const ParseError& e) {
    throw DataError(e.what());
  }
}

template <typename Fn>
void parallel_for(size_t n, int concurrency, Fn&& fn) {
  size_t workers = std::max<size_t>(
      1, std::min<size_t>(static_cast<size_t>(std::max(1, concurrency)), n));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

struct QuestionOutcome {
  std::optional<FinalAnswer> answer;
  std::optional<agents::Trace> trace;
  std::string error;
};

void write_reports(const RunConfig& cfg, const std::string& stem,
                   const std::vector<QAPair>& qa,
                   const std::vector<QuestionOutcome>& outcomes,
                   const std::vector<std::string>& extra_failures) {
  std::filesystem::create_directories(cfg.out_dir);

  std::ostringstream predictions;
  std::ostringstream traces;
  std::map<std::string, std::string> pred_map;
  json failures = json::array();
  for (const std::string& f : extra_failures) {
    failures.push_back({{"id", nullptr}, {"error", f}});
  }
  for (size_t i = 0; i < qa.size(); ++i) {
    const QAPair& pair = qa[i];
    const QuestionOutcome& outcome = outcomes[i];
    if (outcome.answer) {
      pred_map[pair.id] = outcome.answer->answer;
      predictions << json{{"id", pair.id},
                          {"doc_id", pair.doc_id},
                          {"question", pair.question},
                          {"answer", outcome.answer->answer},
                          {"modality", outcome.answer->selected_modality.tag()}}
                         .dump()
                  << "\n";
    } else {
      failures.push_back({{"id", pair.id}, {"error", outcome.error}});
    }
    if (outcome.trace) {
      traces << json{{"id", pair.id}, {"trace", agents::to_json(*outcome.trace, false)}}
                    .dump()
             << "\n";
    }
  }

  metrics::EvalReport report =
      metrics::evaluate_corpus(pred_map, qa, lexicon_for(cfg), keyword_config_for(cfg));

  write_text_file(cfg.out_dir / (stem + "_predictions.jsonl"), predictions.str());
  write_text_file(cfg.out_dir / (stem + "_traces.jsonl"), traces.str());

  json report_json{{"method", "aed"},
                   {"report", metrics::to_json(report)},
                   {"failures", std::move(failures)}};
  write_text_file(cfg.out_dir / (stem + "_report.json"), report_json.dump(2) + "\n");

  std::string md = metrics::to_markdown(report);
  write_text_file(cfg.out_dir / (stem + "_report.md"), md);
  std::cout << md;
  size_t failure_count = report_json["failures"].size();
  if (failure_count > 0) {
    std::cout << "failures: " << failure_count << " (see " << stem << "_report.json)\n";
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// config surface

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.engine.allocator.model = "gpt-3.5-turbo-0125";
  cfg.engine.decision.model = "gpt-3.5-turbo-0125";
  cfg.engine.text_expert.model = "gpt-3.5-turbo-0125";
  cfg.engine.table_expert.model = "gpt-3.5-turbo-0125";
  cfg.engine.vision.model = "gpt-4-vision-preview";
  cfg.engine.embedding.model = "text-embedding-3-large";
  return cfg;
}

void parse_config_file(RunConfig& cfg, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not `key = value`: " + t);
    }
    std::string key = trimmed(t.substr(0, eq));
    std::string value = trimmed(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    apply_config_entry(cfg, key, value);
  }
}

void apply_env_overrides(RunConfig& cfg) {
  std::string chat_url = env_or_empty("AED_CHAT_URL");
  if (!chat_url.empty()) {
    set_all_chat_endpoints(cfg.engine, chat_url);
    cfg.engine.vision.endpoint = chat_url;
  }
  std::string embed_url = env_or_empty("AED_EMBED_URL");
  if (!embed_url.empty()) cfg.engine.embedding.endpoint = embed_url;
  std::string ocr_url = env_or_empty("AED_OCR_URL");
  if (!ocr_url.empty()) cfg.engine.ocr.endpoint = ocr_url;
}

metrics::KeywordConfig keyword_config_for(const RunConfig& cfg) {
  metrics::KeywordConfig kw = metrics::KeywordConfig::defaults();
  if (!cfg.unit_suffixes_path.empty()) kw.load_unit_suffixes(cfg.unit_suffixes_path);
  if (!cfg.stopwords_path.empty()) kw.load_stopwords(cfg.stopwords_path);
  return kw;
}

metrics::Lexicon lexicon_for(const RunConfig& cfg) {
  if (cfg.lexicon_path.empty()) return metrics::Lexicon{};
  return metrics::Lexicon::load_tsv(cfg.lexicon_path);
}

backends::BackendSet build_backends(const RunConfig& cfg, const std::vector<QAPair>* qa) {
  backends::BackendSet set;
  if (!cfg.replay_path.empty()) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(cfg.replay_path, ec)) {
      throw backends::TransportError("replay transcript not found: " +
                                     cfg.replay_path.string());
    }
    auto replay = std::make_shared<backends::TranscriptReplay>(cfg.replay_path);
    return backends::replay_backends(replay);
  }

  if (cfg.mock_mode == "gold") {
    if (qa == nullptr) {
      throw ConfigError("--mock gold needs a qa file to echo from");
    }
    set = make_gold_mocks(std::make_shared<std::vector<QAPair>>(*qa));
  } else if (cfg.mock_mode == "garbage") {
    set = make_garbage_mocks();
  } else if (!cfg.mock_mode.empty()) {
    throw ConfigError("unknown mock mode: " + cfg.mock_mode + " (want gold|garbage)");
  } else {
    if (cfg.engine.allocator.endpoint.empty()) {
      throw ConfigError(
          "no chat endpoint configured; set AED_CHAT_URL or chat_url in the config, "
          "or run with --mock");
    }
    set.allocator = std::make_shared<backends::HttpChatBackend>(
        http_options(cfg.engine.allocator, cfg));
    set.decision = std::make_shared<backends::HttpChatBackend>(
        http_options(cfg.engine.decision, cfg));
    set.text_expert = std::make_shared<backends::HttpChatBackend>(
        http_options(cfg.engine.text_expert, cfg));
    set.table_expert = std::make_shared<backends::HttpChatBackend>(
        http_options(cfg.engine.table_expert, cfg));
    if (!cfg.engine.vision.endpoint.empty()) {
      set.vision = std::make_shared<backends::HttpChatBackend>(
          http_options(cfg.engine.vision, cfg));
    }
    if (!cfg.engine.embedding.endpoint.empty()) {
      set.embedder = std::make_shared<backends::HttpEmbedBackend>(
          http_options(cfg.engine.embedding, cfg));
    }
    if (!cfg.engine.ocr.endpoint.empty()) {
      set.ocr = std::make_shared<backends::HttpOcrBackend>(
          http_options(cfg.engine.ocr, cfg));
    }
  }

  if (!cfg.capture_path.empty()) {
    auto writer = std::make_shared<backends::TranscriptWriter>(cfg.capture_path);
    set = backends::with_capture(std::move(set), writer);
  }
  return set;
}

// ---------------------------------------------------------------------------
// commands

int cmd_ingest(const RunConfig& cfg, const std::filesystem::path& input_dir,
               const std::filesystem::path& asset_dir) {
  return guarded([&]() -> int {
    std::error_code ec;
    if (!std::filesystem::is_directory(input_dir, ec)) {
      throw DataError("input dir does not exist: " + input_dir.string());
    }
    std::vector<std::filesystem::path> pages;
    for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      if (ext == ".html" || ext == ".htm") pages.push_back(entry.path());
    }
    std::sort(pages.begin(), pages.end());

    std::vector<Document> docs;
    json doc_reports = json::array();
    json failures = json::array();
    for (const std::filesystem::path& page : pages) {
      std::ifstream in(page, std::ios::binary);
      if (!in) {
        failures.push_back({{"file", page.string()}, {"error", "cannot read file"}});
        continue;
      }
      std::ostringstream buf;
      buf << in.rdbuf();
      std::string doc_id = page.stem().string();
      try {
        ingest::IngestResult result =
            ingest::html_to_document(buf.str(), doc_id, asset_dir);
        std::vector<std::string> violations = validate_document(result.doc);
        if (!violations.empty()) {
          std::string joined;
          for (const std::string& v : violations) {
            if (!joined.empty()) joined += "; ";
            joined += v;
          }
          failures.push_back({{"file", page.string()}, {"error", joined}});
          continue;
        }
        doc_reports.push_back({{"doc_id", result.report.doc_id},
                               {"tables", result.report.tables_found},
                               {"charts", result.report.charts_found},
                               {"warnings", result.report.warnings}});
        std::cout << "ingested " << doc_id << ": " << result.report.tables_found
                  << " tables, " << result.report.charts_found << " charts";
        if (!result.report.warnings.empty()) {
          std::cout << " (" << result.report.warnings.size() << " warnings)";
        }
        std::cout << "\n";
        docs.push_back(std::move(result.doc));
      } catch (const ingest::UnparseableHtml& e) {
        failures.push_back({{"file", page.string()}, {"error", e.what()}});
      }
    }

    std::filesystem::path manifest = ingest::build_manifest(docs, cfg.out_dir);
    json report{{"documents", std::move(doc_reports)}, {"failures", failures}};
    write_text_file(cfg.out_dir / "ingest_report.json", report.dump(2) + "\n");
    std::cout << "wrote " << manifest.string() << " with " << docs.size()
              << " documents\n";

    if (!failures.empty()) {
      std::cerr << json{{"failures", failures}}.dump() << "\n";
      return kExitDataError;
    }
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& cfg) {
  return guarded([&]() -> int {
    std::vector<std::string> violations = validate_engine_config(cfg.engine);
    if (!violations.empty()) {
      std::string what = "invalid config:";
      for (const std::string& v : violations) what += " " + v + ";";
      throw ConfigError(what);
    }

    Corpus corpus = load_corpus(cfg);
    std::vector<std::string> qa_errors;
    std::vector<QAPair> qa = load_qa(cfg, &qa_errors);

    backends::BackendSet set = build_backends(cfg, &qa);
    agents::Engine engine(cfg.engine, set);

    std::vector<QuestionOutcome> outcomes(qa.size());
    parallel_for(qa.size(), cfg.engine.max_concurrency, [&](size_t i) {
      const QAPair& pair = qa[i];
      auto it = corpus.by_id.find(pair.doc_id);
      if (it == corpus.by_id.end()) {
        outcomes[i].error = "unknown doc_id: " + pair.doc_id;
        return;
      }
      std::vector<std::string> qa_violations = validate_qa_pair(pair, *it->second);
      if (!qa_violations.empty()) {
        outcomes[i].error = qa_violations.front();
        return;
      }
      try {
        auto [answer, trace] = engine.answer_question(*it->second, pair.question);
        outcomes[i].answer = std::move(answer);
        outcomes[i].trace = std::move(trace);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    });

    write_reports(cfg, "eval", qa, outcomes, qa_errors);
    return kExitOk;
  });
}

int cmd_chart_eval(const RunConfig& cfg, bool no_rank) {
  return guarded([&]() -> int {
    std::vector<std::string> violations = validate_engine_config(cfg.engine);
    if (!violations.empty()) {
      std::string what = "invalid config:";
      for (const std::string& v : violations) what += " " + v + ";";
      throw ConfigError(what);
    }

    Corpus corpus = load_corpus(cfg);
    std::vector<std::string> qa_errors;
    std::vector<QAPair> all_qa = load_qa(cfg, &qa_errors);

    std::vector<QAPair> qa;
    for (const QAPair& pair : all_qa) {
      bool has_chart = std::any_of(pair.modalities.begin(), pair.modalities.end(),
                                   [](const ModalityRef& m) {
                                     return m.kind == Modality::Chart;
                                   });
      if (has_chart) qa.push_back(pair);
    }

    backends::BackendSet set = build_backends(cfg, &qa);
    agents::Engine engine(cfg.engine, set);

    std::vector<QuestionOutcome> outcomes(qa.size());
    parallel_for(qa.size(), cfg.engine.max_concurrency, [&](size_t i) {
      const QAPair& pair = qa[i];
      auto it = corpus.by_id.find(pair.doc_id);
      if (it == corpus.by_id.end()) {
        outcomes[i].error = "unknown doc_id: " + pair.doc_id;
        return;
      }
      const Document& doc = *it->second;
      std::vector<std::string> qa_violations = validate_qa_pair(pair, doc);
      if (!qa_violations.empty()) {
        outcomes[i].error = qa_violations.front();
        return;
      }
      try {
        ExpertAnswer expert;
        if (no_rank) {
          const ModalityRef* designated = nullptr;
          for (const ModalityRef& m : pair.modalities) {
            if (m.kind == Modality::Chart) {
              designated = &m;
              break;
            }
          }
          expert = engine.chart_direct(
              doc.charts[static_cast<size_t>(designated->index - 1)], pair.question);
        } else {
          expert = engine.chart_expert(doc.charts, pair.question, cfg.engine.chart_top_k);
        }
        outcomes[i].answer = FinalAnswer{expert.answer, expert.modality};
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    });

    write_reports(cfg, no_rank ? "chart_norank" : "chart", qa, outcomes, qa_errors);
    return kExitOk;
  });
}

int cmd_stats(const RunConfig& cfg) {
  return guarded([&]() -> int {
    std::vector<std::string> qa_errors;
    std::vector<QAPair> qa = load_qa(cfg, &qa_errors);
    for (const std::string& e : qa_errors) std::cerr << "qa " << e << "\n";

    int numerical = 0;
    std::map<std::string, int> combos;
    for (const QAPair& pair : qa) {
      if (metrics::classify_answer_type(pair.gold_answer) ==
          metrics::AnswerType::Numerical) {
        ++numerical;
      }
      bool has_text = false, has_table = false, has_chart = false;
      for (const ModalityRef& m : pair.modalities) {
        has_text |= m.kind == Modality::Text;
        has_table |= m.kind == Modality::Table;
        has_chart |= m.kind == Modality::Chart;
      }
      std::string combo;
      if (has_text) combo += "text";
      if (has_table) combo += combo.empty() ? "table" : "+table";
      if (has_chart) combo += combo.empty() ? "chart" : "+chart";
      if (combo.empty()) combo = "none";
      ++combos[combo];
    }

    int n = static_cast<int>(qa.size());
    int non_numerical = n - numerical;
    auto pct = [n](int k) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.1f",
                    n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / n);
      return std::string(buf);
    };
    std::cout << "questions: " << n << "\n";
    std::cout << "numerical: " << numerical << " (" << pct(numerical) << "%)\n";
    std::cout << "non_numerical: " << non_numerical << " (" << pct(non_numerical)
              << "%)\n";
    std::cout << "modality combinations:\n";
    static const char* kComboOrder[] = {"text",       "table",       "chart",
                                        "text+table", "text+chart",  "table+chart",
                                        "text+table+chart", "none"};
    for (const char* combo : kComboOrder) {
      auto it = combos.find(combo);
      if (it == combos.end()) continue;
      std::cout << "  " << combo << ": " << it->second << " (" << pct(it->second)
                << "%)\n";
      combos.erase(it);
    }
    for (const auto& [combo, count] : combos) {
      std::cout << "  " << combo << ": " << count << " (" << pct(count) << "%)\n";
    }
    return qa_errors.empty() ? kExitOk : kExitDataError;
  });
}

int cmd_qagen(const RunConfig& cfg) {
  return guarded([&]() -> int {
    std::vector<std::string> violations = validate_qagen_config(cfg.qa_gen);
    if (!violations.empty()) {
      std::string what = "invalid qagen config:";
      for (const std::string& v : violations) what += " " + v + ";";
      throw ConfigError(what);
    }
    Corpus corpus = load_corpus(cfg);

    // generation/judge backends ride the standard slots: text_expert is the
    // generator, decision is the judge
    backends::BackendSet set;
    if (!cfg.replay_path.empty() || cfg.mock_mode.empty()) {
      set = build_backends(cfg, nullptr);
    } else if (cfg.mock_mode == "gold" || cfg.mock_mode == "garbage") {
      bool flag_all = cfg.mock_mode == "garbage";
      auto generator_fn = [](const backends::ChatRequest& req) -> std::string {
        std::string prompt = last_user_content(req);
        int count = 2;
        for (size_t i = 0; i + 1 < prompt.size(); ++i) {
          if (prompt[i] >= '1' && prompt[i] <= '9' &&
              (i == 0 || prompt[i - 1] == ' ')) {
            count = prompt[i] - '0';
            break;
          }
        }
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : prompt) {
          h ^= c;
          h *= 1099511628211ull;
        }
        char tag[16];
        std::snprintf(tag, sizeof(tag), "%08llx",
                      static_cast<unsigned long long>(h & 0xFFFFFFFFull));
        std::string reply;
        for (int k = 1; k <= count; ++k) {
          reply += "Q: What is mock fact " + std::string(tag) + "-" +
                   std::to_string(k) + "?\n";
          reply += "A: value " + std::string(tag) + "-" + std::to_string(k) + "\n\n";
        }
        return reply;
      };
      auto judge_fn = [flag_all](const backends::ChatRequest&) -> std::string {
        return flag_all ? std::string("INVALID: mock flag") : std::string("VALID: ok");
      };
      set.text_expert = std::make_shared<backends::CallbackChatBackend>(generator_fn);
      set.vision = std::make_shared<backends::CallbackChatBackend>(generator_fn);
      set.decision = std::make_shared<backends::CallbackChatBackend>(judge_fn);
      if (!cfg.capture_path.empty()) {
        auto writer = std::make_shared<backends::TranscriptWriter>(cfg.capture_path);
        set = backends::with_capture(std::move(set), writer);
      }
    } else {
      throw ConfigError("unknown mock mode: " + cfg.mock_mode);
    }
    if (!set.text_expert) {
      throw ConfigError("no chat backend available for qa generation");
    }

    std::vector<QAPair> all_pairs;
    std::vector<std::string> warnings;
    std::map<std::string, std::string> markdown_by_id;
    for (const Document& doc : corpus.docs) {
      markdown_by_id[doc.id] = doc.markdown;
      qagen::GenerationResult generated = qagen::generate_qa_pairs(
          doc, cfg.qa_gen, *set.text_expert, set.vision.get());
      for (QAPair& pair : generated.pairs) all_pairs.push_back(std::move(pair));
      for (std::string& w : generated.warnings) warnings.push_back(std::move(w));
    }

    std::filesystem::create_directories(cfg.out_dir);
    save_qa_file(cfg.out_dir / "qa.jsonl", all_pairs);

    json report{{"generated", all_pairs.size()}, {"warnings", warnings}};
    if (all_pairs.empty()) {
      write_text_file(cfg.out_dir / "manual_queue.jsonl", "");
      write_text_file(cfg.out_dir / "flagged.jsonl", "");
      report["manual"] = 0;
      report["model_verified"] = 0;
      report["flagged"] = 0;
      report["errors"] = json::array();
      write_text_file(cfg.out_dir / "qagen_report.json", report.dump(2) + "\n");
      std::cout << "generated 0 pairs\n";
      return kExitOk;
    }

    if (!set.decision) {
      throw ConfigError("no chat backend available for the qa judge");
    }
    qagen::QualityCheckResult checked =
        qagen::quality_check(all_pairs, cfg.qa_gen, *set.decision, &markdown_by_id);

    std::ostringstream manual;
    for (const QAPair& pair : checked.manual_queue) {
      json entry = to_json(pair);
      entry["context"] = {{"corpus", cfg.corpus_path.string()}, {"doc_id", pair.doc_id}};
      manual << entry.dump() << "\n";
    }
    write_text_file(cfg.out_dir / "manual_queue.jsonl", manual.str());

    std::ostringstream flagged;
    for (size_t i = 0; i < checked.flagged.size(); ++i) {
      json entry = to_json(checked.flagged[i]);
      entry["reason"] = checked.flag_reasons[i];
      flagged << entry.dump() << "\n";
    }
    write_text_file(cfg.out_dir / "flagged.jsonl", flagged.str());

    report["manual"] = checked.manual_queue.size();
    report["model_verified"] = checked.model_verified.size();
    report["flagged"] = checked.flagged.size();
    report["errors"] = checked.errors;
    write_text_file(cfg.out_dir / "qagen_report.json", report.dump(2) + "\n");

    std::cout << "generated " << all_pairs.size() << " pairs: "
              << checked.manual_queue.size() << " to manual review, "
              << checked.model_verified.size() << " model-verified, "
              << checked.flagged.size() << " flagged\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"multimodal statistical-report QA toolkit"};
  app.require_subcommand(1);

  std::string config_file;
  std::string mock_mode;
  std::string out_dir;
  std::string capture_path;
  std::string replay_path;
  int concurrency = -1;
  double threshold = -1.0;

  app.add_option("--config", config_file, "config file (key = value lines)");
  app.add_option("--mock", mock_mode, "mock backend suite: gold|garbage");
  app.add_option("--concurrency", concurrency, "max questions in flight");
  app.add_option("--threshold", threshold, "expert activation threshold");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--replay", replay_path, "serve backend calls from a transcript");
  app.add_option("--capture", capture_path, "record backend calls to a transcript");

  std::string ingest_input;
  std::string ingest_assets;
  auto* ingest_cmd = app.add_subcommand("ingest", "convert HTML pages into a corpus");
  ingest_cmd->add_option("--input", ingest_input, "directory of .html pages")
      ->required();
  ingest_cmd->add_option("--assets", ingest_assets, "directory of chart images");
  ingest_cmd->fallthrough();

  std::string corpus_opt;
  std::string qa_opt;
  auto* eval_cmd = app.add_subcommand("eval", "answer a qa file over a corpus and score it");
  eval_cmd->add_option("--corpus", corpus_opt, "corpus.json path");
  eval_cmd->add_option("--qa", qa_opt, "qa jsonl path");
  eval_cmd->fallthrough();

  bool no_rank = false;
  std::string chart_corpus_opt;
  std::string chart_qa_opt;
  auto* chart_cmd =
      app.add_subcommand("chart-eval", "score the chart pipeline on chart questions");
  chart_cmd->add_flag("--no-rank", no_rank, "answer the labeled chart directly");
  chart_cmd->add_option("--corpus", chart_corpus_opt, "corpus.json path");
  chart_cmd->add_option("--qa", chart_qa_opt, "qa jsonl path");
  chart_cmd->fallthrough();

  std::string stats_qa_opt;
  auto* stats_cmd = app.add_subcommand("stats", "answer-type and modality statistics");
  stats_cmd->add_option("--qa", stats_qa_opt, "qa jsonl path");
  stats_cmd->fallthrough();

  std::string qagen_corpus_opt;
  auto* qagen_cmd = app.add_subcommand("qagen", "generate and quality-check qa pairs");
  qagen_cmd->add_option("--corpus", qagen_corpus_opt, "corpus.json path");
  qagen_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  RunConfig cfg = default_run_config();
  try {
    if (!config_file.empty()) parse_config_file(cfg, config_file);
  } catch (const ConfigError& e) {
    emit_error_json(e.what());
    return kExitConfigError;
  }
  apply_env_overrides(cfg);
  if (!mock_mode.empty()) cfg.mock_mode = mock_mode;
  if (concurrency >= 0) cfg.engine.max_concurrency = concurrency;
  if (threshold >= 0) cfg.engine.activation_threshold = threshold;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!capture_path.empty()) cfg.capture_path = capture_path;
  if (!replay_path.empty()) cfg.replay_path = replay_path;

  if (ingest_cmd->parsed()) {
    std::filesystem::path assets(ingest_assets.empty() ? ingest_input : ingest_assets);
    return cmd_ingest(cfg, ingest_input, assets);
  }
  if (eval_cmd->parsed()) {
    if (!corpus_opt.empty()) cfg.corpus_path = corpus_opt;
    if (!qa_opt.empty()) cfg.qa_path = qa_opt;
    return cmd_eval(cfg);
  }
  if (chart_cmd->parsed()) {
    if (!chart_corpus_opt.empty()) cfg.corpus_path = chart_corpus_opt;
    if (!chart_qa_opt.empty()) cfg.qa_path = chart_qa_opt;
    return cmd_chart_eval(cfg, no_rank);
  }
  if (stats_cmd->parsed()) {
    if (!stats_qa_opt.empty()) cfg.qa_path = stats_qa_opt;
    return cmd_stats(cfg);
  }
  if (qagen_cmd->parsed()) {
    if (!qagen_corpus_opt.empty()) cfg.corpus_path = qagen_corpus_opt;
    return cmd_qagen(cfg);
  }
  return kExitConfigError;
}

}  // namespace aed::cli
