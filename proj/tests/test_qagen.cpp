#include <doctest/doctest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "aed/backends.hpp"
#include "aed/core.hpp"
#include "aed/qagen.hpp"
#include "support.hpp"

namespace qg = aed::qagen;
namespace bk = aed::backends;
namespace ts = testsupport;
using aed::ModalityRef;
using aed::QAPair;

namespace {

std::vector<QAPair> numbered_pairs(int n, const std::string& doc_id = "doc") {
  std::vector<QAPair> pairs;
  for (int i = 0; i < n; ++i) {
    QAPair p;
    p.id = "q" + std::to_string(i);
    p.doc_id = doc_id;
    p.question = "问题 " + std::to_string(i) + " 是什么？";
    p.gold_answer = "答案 " + std::to_string(i);
    p.modalities = {ModalityRef::text()};
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::set<std::string> ids_of(const std::vector<QAPair>& pairs) {
  std::set<std::string> out;
  for (const auto& p : pairs) out.insert(p.id);
  return out;
}

}  // namespace

TEST_SUITE("qagen") {

TEST_CASE("validate_qagen_config") {
  qg::QaGenConfig cfg;
  CHECK(qg::validate_qagen_config(cfg).empty());
  cfg.pairs_per_table = -1;
  cfg.manual_ratio = 1.5;
  auto violations = qg::validate_qagen_config(cfg);
  CHECK(violations.size() == 2);
}

TEST_CASE("parse_qa_blocks") {
  SUBCASE("multiple blocks with noise between them") {
    auto blocks = qg::parse_qa_blocks(
        "Here you go:\nQ: 产量多少？\nA: 100吨\n\nsome filler\nQ: 增速？\n A: 5.9% ");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].first == "产量多少？");
    CHECK(blocks[0].second == "100吨");
    CHECK(blocks[1].second == "5.9%");
  }
  SUBCASE("dangling or misordered lines are rejected") {
    CHECK_THROWS_AS(qg::parse_qa_blocks("Q: 问题？"), qg::UnparseableGeneration);
    CHECK_THROWS_AS(qg::parse_qa_blocks("A: 答案"), qg::UnparseableGeneration);
    CHECK_THROWS_AS(qg::parse_qa_blocks("Q: 一\nQ: 二\nA: x"),
                    qg::UnparseableGeneration);
    CHECK_THROWS_AS(qg::parse_qa_blocks("no blocks at all"),
                    qg::UnparseableGeneration);
  }
}

TEST_CASE("generate_qa_pairs per modality with filtering") {
  aed::Document doc;
  doc.id = "d1";
  doc.markdown = "# 标题\n\n正文。\n\ntable1\n\nimg1\n";
  doc.tables.resize(1);
  doc.tables[0].tag = "table1";
  doc.tables[0].tuples = {{"煤炭", "2024", "12"}};
  doc.charts.resize(1);
  doc.charts[0].tag = "img1";
  doc.charts[0].local_path = "/nonexistent/img1.png";

  auto chat = std::make_shared<bk::CallbackChatBackend>(
      [](const bk::ChatRequest& req) -> std::string {
        const std::string& p = req.messages.back().content;
        if (p.find("webpage text") != std::string::npos) {
          return "Q: 全年增速是多少？\nA: 5.9%\n\n"
                 "Q: 经济增长了吗？\nA: 增长了\n\n"
                 "Q: 空答案？\nA: 是";
        }
        if (p.find("Table table1") != std::string::npos) {
          return "Q: 2024年煤炭产量？\nA: 12\n\n"
                 "Q: 重复答案问题？\nA: 5.9%";
        }
        FAIL("unexpected chat prompt");
        return "";
      });
  auto vision = std::make_shared<bk::ScriptedChatBackend>();
  vision->add_contains("img1", "Q: 图中趋势如何？\nA: 持续上升");

  qg::QaGenConfig cfg;
  auto result = qg::generate_qa_pairs(doc, cfg, *chat, vision.get());

  REQUIRE(result.pairs.size() == 3);
  CHECK(result.pairs[0].question == "全年增速是多少？");
  CHECK(result.pairs[0].modalities == std::vector<ModalityRef>{ModalityRef::text()});
  CHECK(result.pairs[1].gold_answer == "12");
  CHECK(result.pairs[1].modalities ==
        std::vector<ModalityRef>{ModalityRef::table(1)});
  CHECK(result.pairs[2].gold_answer == "持续上升");
  CHECK(result.pairs[2].modalities ==
        std::vector<ModalityRef>{ModalityRef::chart(1)});

  for (const auto& pair : result.pairs) {
    CHECK(pair.doc_id == "d1");
    CHECK(pair.id.rfind("d1:", 0) == 0);
  }
  CHECK(ids_of(result.pairs).size() == 3);

  int yes_no = 0, duplicates = 0;
  for (const auto& w : result.warnings) {
    yes_no += w.rfind("YesNoFiltered", 0) == 0;
    duplicates += w.rfind("DuplicateAnswer", 0) == 0;
  }
  CHECK(yes_no == 2);
  CHECK(duplicates == 1);
}

TEST_CASE("yes/no filtering catches answers and question shapes") {
  aed::Document doc;
  doc.id = "d2";
  doc.markdown = "text body\n";

  auto run_with_reply = [&](const std::string& reply) {
    bk::CallbackChatBackend chat([&](const bk::ChatRequest&) { return reply; });
    qg::QaGenConfig cfg;
    cfg.pairs_per_table = 0;
    cfg.pairs_per_chart = 0;
    return qg::generate_qa_pairs(doc, cfg, chat, nullptr);
  };

  CHECK(run_with_reply("Q: Is the GDP rising this year?\nA: rising").pairs.empty());
  CHECK(run_with_reply("Q: 去年经济增长了吗？\nA: 增长了").pairs.empty());
  CHECK(run_with_reply("Q: 如何评价？\nA: Yes.").pairs.empty());
  CHECK(run_with_reply("Q: 结论？\nA: 不对").pairs.empty());
  // similar shapes that must survive
  CHECK(run_with_reply("Q: What is the GDP?\nA: 126 trillion").pairs.size() == 1);
  CHECK(run_with_reply("Q: 增长率是多少？\nA: 5.9%").pairs.size() == 1);
}

TEST_CASE("generate_qa_pairs degraded inputs") {
  qg::QaGenConfig cfg;
  bk::CallbackChatBackend chat(
      [](const bk::ChatRequest&) -> std::string { return "Q: q?\nA: a1"; });

  SUBCASE("no markdown yields a warning instead of a text call") {
    aed::Document doc;
    doc.id = "empty";
    doc.charts.resize(1);
    doc.charts[0].tag = "img1";
    cfg.pairs_per_chart = 0;
    auto result = qg::generate_qa_pairs(doc, cfg, chat, nullptr);
    CHECK(result.pairs.empty());
    REQUIRE(result.warnings.size() >= 1);
    CHECK(result.warnings[0].rfind("NoText", 0) == 0);
  }
  SUBCASE("charts without a vision backend are skipped with a warning") {
    aed::Document doc;
    doc.id = "novision";
    doc.markdown = "body\n";
    doc.charts.resize(1);
    doc.charts[0].tag = "img1";
    auto result = qg::generate_qa_pairs(doc, cfg, chat, nullptr);
    CHECK(result.pairs.size() == 1);
    bool warned = false;
    for (const auto& w : result.warnings) {
      warned |= w.rfind("NoVisionBackend", 0) == 0;
    }
    CHECK(warned);
  }
  SUBCASE("negative counts are rejected") {
    aed::Document doc;
    doc.id = "d";
    doc.markdown = "x\n";
    cfg.pairs_per_text = -1;
    CHECK_THROWS_AS(qg::generate_qa_pairs(doc, cfg, chat, nullptr),
                    std::invalid_argument);
  }
  SUBCASE("an unparseable generation propagates") {
    aed::Document doc;
    doc.id = "d";
    doc.markdown = "x\n";
    bk::CallbackChatBackend bad([](const bk::ChatRequest&) -> std::string {
      return "I refuse to answer in the requested format.";
    });
    CHECK_THROWS_AS(qg::generate_qa_pairs(doc, cfg, bad, nullptr),
                    qg::UnparseableGeneration);
  }
}

TEST_CASE("shuffled_indices is a reproducible permutation") {
  auto a = qg::shuffled_indices(50, 1234);
  auto b = qg::shuffled_indices(50, 1234);
  CHECK(a == b);

  std::vector<size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);

  CHECK(qg::shuffled_indices(50, 1235) != a);
  CHECK(qg::shuffled_indices(0, 7).empty());
  CHECK(qg::shuffled_indices(1, 7) == std::vector<size_t>{0});
}

TEST_CASE("quality_check partitions pairs between manual and judged") {
  auto pairs = numbered_pairs(100);
  qg::QaGenConfig cfg;
  cfg.manual_ratio = 0.25;
  cfg.seed = 7;

  auto judge = std::make_shared<bk::ScriptedChatBackend>();
  judge->add_contains("问题 13 ", "INVALID: asks for opinion");
  judge->add_contains("问题 77 ", "INVALID: not grounded");
  judge->add_contains("Judge this pair", "VALID: looks fine");

  auto result = qg::quality_check(pairs, cfg, *judge);
  CHECK(result.manual_queue.size() == 25);
  CHECK(result.model_verified.size() == 75);
  CHECK(result.errors.empty());

  // disjoint and exhaustive partition
  std::set<std::string> manual_ids = ids_of(result.manual_queue);
  std::set<std::string> verified_ids = ids_of(result.model_verified);
  CHECK(manual_ids.size() == 25);
  CHECK(verified_ids.size() == 75);
  std::set<std::string> all;
  all.insert(manual_ids.begin(), manual_ids.end());
  all.insert(verified_ids.begin(), verified_ids.end());
  CHECK(all == ids_of(pairs));

  // flagged pairs are the judged INVALID subset, reasons run parallel
  REQUIRE(result.flagged.size() == result.flag_reasons.size());
  for (size_t i = 0; i < result.flagged.size(); ++i) {
    CHECK(verified_ids.count(result.flagged[i].id) == 1);
    CHECK_FALSE(result.flag_reasons[i].empty());
  }
  size_t expect_flagged = 0;
  expect_flagged += verified_ids.count("q13");
  expect_flagged += verified_ids.count("q77");
  CHECK(result.flagged.size() == expect_flagged);

  SUBCASE("same seed reproduces the same sample") {
    auto again = qg::quality_check(pairs, cfg, *judge);
    CHECK(ids_of(again.manual_queue) == manual_ids);
  }
  SUBCASE("a different seed samples differently") {
    qg::QaGenConfig other = cfg;
    other.seed = 8;
    auto again = qg::quality_check(pairs, other, *judge);
    CHECK(ids_of(again.manual_queue) != manual_ids);
  }
}

TEST_CASE("quality_check edge ratios and the ceil rule") {
  auto judge_ok = std::make_shared<bk::CallbackChatBackend>(
      [](const bk::ChatRequest&) -> std::string { return "VALID: ok"; });
  qg::QaGenConfig cfg;

  SUBCASE("ratio 0 sends everything to the judge") {
    cfg.manual_ratio = 0.0;
    auto result = qg::quality_check(numbered_pairs(10), cfg, *judge_ok);
    CHECK(result.manual_queue.empty());
    CHECK(result.model_verified.size() == 10);
  }
  SUBCASE("ratio 1 never calls the judge") {
    cfg.manual_ratio = 1.0;
    auto counting = std::make_shared<bk::ScriptedChatBackend>();
    auto result = qg::quality_check(numbered_pairs(10), cfg, *counting);
    CHECK(result.manual_queue.size() == 10);
    CHECK(result.model_verified.empty());
    CHECK(counting->chat_calls() == 0);
  }
  SUBCASE("manual count rounds up") {
    cfg.manual_ratio = 0.21;
    auto result = qg::quality_check(numbered_pairs(10), cfg, *judge_ok);
    CHECK(result.manual_queue.size() == 3);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(qg::quality_check({}, cfg, *judge_ok), std::invalid_argument);
  }
}

TEST_CASE("quality_check tolerates judge failures per pair") {
  qg::QaGenConfig cfg;
  cfg.manual_ratio = 0.0;
  auto pairs = numbered_pairs(4);

  SUBCASE("a throwing judge becomes an error entry") {
    bk::CallbackChatBackend flaky([](const bk::ChatRequest& req) -> std::string {
      if (req.messages.back().content.find("问题 2 ") != std::string::npos) {
        throw bk::TransportError("socket mishap");
      }
      return "VALID: ok";
    });
    auto result = qg::quality_check(pairs, cfg, flaky);
    CHECK(result.model_verified.size() == 4);
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].find("q2") != std::string::npos);
    CHECK(result.errors[0].find("judge call failed") != std::string::npos);
    CHECK(result.flagged.empty());
  }
  SUBCASE("a verdict-free reply becomes an error entry") {
    bk::CallbackChatBackend vague(
        [](const bk::ChatRequest&) -> std::string { return "hard to say really"; });
    auto result = qg::quality_check(pairs, cfg, vague);
    CHECK(result.errors.size() == 4);
    CHECK(result.flagged.empty());
  }
  SUBCASE("document markdown is attached to judge prompts when provided") {
    std::string seen;
    bk::CallbackChatBackend capture([&](const bk::ChatRequest& req) -> std::string {
      seen = req.messages.back().content;
      return "VALID: ok";
    });
    std::map<std::string, std::string> material = {{"doc", "# 文档内容\n"}};
    qg::quality_check(pairs, cfg, capture, &material);
    CHECK(seen.find("Material:\n# 文档内容") != std::string::npos);
    CHECK(seen.find("Judge this pair.") != std::string::npos);
  }
}

}  // TEST_SUITE
