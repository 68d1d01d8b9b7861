#pragma once
// Command-line surface: config file parsing, env overrides, backend wiring,
// run orchestration, and report emission.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "aed/backends.hpp"
#include "aed/core.hpp"
#include "aed/metrics.hpp"
#include "aed/qagen.hpp"

namespace aed::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit codes, a stable contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitBackendError = 3;

struct RunConfig {
  EngineConfig engine;
  qagen::QaGenConfig qa_gen;

  std::filesystem::path corpus_path;
  std::filesystem::path qa_path;
  std::filesystem::path out_dir = "out";
  std::filesystem::path lexicon_path;
  std::filesystem::path stopwords_path;
  std::filesystem::path unit_suffixes_path;

  std::string mock_mode;  // "", "gold", "garbage"
  std::filesystem::path capture_path;
  std::filesystem::path replay_path;
};

// Fills role model names with the defaults used throughout.
RunConfig default_run_config();

// `key = value` lines, '#' comments. Unknown keys are rejected, and so is
// any api_key entry: credentials come only from AED_API_KEY.
void parse_config_file(RunConfig& cfg, const std::filesystem::path& file);

// AED_CHAT_URL, AED_EMBED_URL, AED_OCR_URL endpoint overrides. The API key
// is read from AED_API_KEY at backend construction and never stored in the
// config.
void apply_env_overrides(RunConfig& cfg);

metrics::KeywordConfig keyword_config_for(const RunConfig& cfg);
metrics::Lexicon lexicon_for(const RunConfig& cfg);

// Wires mock, replay, or HTTP backends per the config; wraps them with a
// transcript writer when capture is requested. Gold mocks echo the gold
// answers of `qa` and need it to be non-null.
backends::BackendSet build_backends(const RunConfig& cfg, const std::vector<QAPair>* qa);

int cmd_ingest(const RunConfig& cfg, const std::filesystem::path& input_dir,
               const std::filesystem::path& asset_dir);
int cmd_eval(const RunConfig& cfg);
int cmd_chart_eval(const RunConfig& cfg, bool no_rank);
int cmd_stats(const RunConfig& cfg);
int cmd_qagen(const RunConfig& cfg);

int run_cli(int argc, const char* const* argv);

}  // namespace aed::cli
