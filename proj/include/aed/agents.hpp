#pragma once
// The AED engine: allocation, expert activation, per-modality answering and
// decision synthesis for one (Document, question) pair.

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aed/backends.hpp"
#include "aed/core.hpp"

namespace aed::agents {

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct Trace {
  AllocationResult allocation;
  std::vector<ModalityRef> activated;
  std::vector<ExpertAnswer> expert_answers;
  std::string decision_prompt;  // empty when the decision stage was skipped
  std::string decision_reply;
  bool decision_skipped = false;
  std::vector<StageTiming> timings;
};

// Timings are emitted under "timings" and can be dropped for byte-stable
// comparisons.
nlohmann::json to_json(const Trace& trace, bool include_timings = true);

struct UnparseableAllocation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnparseableExpertReply : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoChartsActivated : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoUsableChart : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnparseableDecision : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownModalityChosen : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wraps any error escaping a pipeline stage with the stage name.
struct StageError : std::runtime_error {
  StageError(std::string stage_in, const std::string& what_in)
      : std::runtime_error(stage_in + ": " + what_in), stage(std::move(stage_in)) {}
  std::string stage;
};

// Agent profiles are fixed strings so scripted mocks and transcripts stay
// stable across runs.
AgentProfile allocator_profile();
AgentProfile text_expert_profile();
AgentProfile table_expert_profile();
AgentProfile chart_expert_profile();
AgentProfile decision_profile();
AgentProfile qa_generator_profile();
AgentProfile qa_judge_profile();

// Parses "P(text)=x / P(table_i)=x / P(img_j)=x" lines. Modalities of the
// document that the reply does not mention default to 0.
AllocationResult parse_allocation(const std::string& reply, const Document& doc);

// Parses the two-line "ANSWER: ... / CONFIDENCE: x" expert format.
// Confidence is clamped into [0,1].
std::pair<std::string, double> parse_expert_reply(const std::string& reply);

// Strict ">" against the threshold; order: text, tables ascending, charts
// ascending.
std::vector<ModalityRef> activated_experts(const AllocationResult& alloc, double tau);

class Engine {
 public:
  Engine(EngineConfig config, backends::BackendSet set);

  const EngineConfig& config() const { return config_; }

  AllocationResult allocate(const Document& doc, const std::string& question) const;

  ExpertAnswer text_expert(const std::string& doc_markdown, const std::string& question,
                           const AgentMemory* memory = nullptr) const;
  ExpertAnswer table_expert(const TableRecord& table, const std::string& question) const;

  // Full six-step chart workflow over the given candidate charts: OCR, CJK
  // aggregation, embedding, cosine ranking, vision call on the winner.
  ExpertAnswer chart_expert(const std::vector<ChartRef>& charts,
                            const std::string& question, int top_k) const;

  // Ablation path: vision call straight at one designated chart, no ranking.
  ExpertAnswer chart_direct(const ChartRef& chart, const std::string& question) const;

  FinalAnswer decide(const std::string& question,
                     const std::vector<ExpertAnswer>& expert_answers,
                     Trace* trace = nullptr) const;

  std::pair<FinalAnswer, Trace> answer_question(const Document& doc,
                                                const std::string& question) const;

 private:
  ExpertAnswer run_text_style_expert(const AgentProfile& profile,
                                     const std::string& user_content,
                                     ModalityRef modality,
                                     const std::string& source_tag,
                                     backends::ChatBackend& backend,
                                     const AgentMemory* memory) const;

  EngineConfig config_;
  backends::BackendSet backends_;
};

}  // namespace aed::agents
