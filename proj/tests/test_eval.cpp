// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "httplib.h"
#include "helpers.hpp"
#include "todgen/backend.hpp"
#include "todgen/errors.hpp"
#include "todgen/eval.hpp"
#include "todgen/graph.hpp"
#include "todgen/rng.hpp"

using namespace todgen;
using todgen::testing::asset;

namespace {

const std::vector<IntentLabel> kEcommerceIntents = {
    "search_product", "suggest_product", "generic_product_query", "user_clarifies",
    "more_results",   "select_i",        "show_attributes",       "acknowledge",
    "open_domain_qa", "product_qa",      "chitchat",              "show_cart",
    "buy_cart",       "add_to_cart",     "remove_from_cart",      "compare_products",
    "delivery_address", "remove_from_comparison", "add_for_comparison"};

/// Independent trigram-cosine oracle (string keyed, no hashing).
double trigram_cosine(const std::string& a, const std::string& b) {
  auto grams = [](const std::string& text) {
    std::string s = TrigramEmbedding::normalize(text);
    std::map<std::string, double> counts;
    if (s.size() < 3) {
      if (!s.empty()) counts[s] = 1.0;
      return counts;
    }
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) counts[s.substr(i, 3)] += 1.0;
    return counts;
  };
  auto ga = grams(a);
  auto gb = grams(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, c] : ga) {
    na += c * c;
    auto it = gb.find(g);
    if (it != gb.end()) dot += c * it->second;
  }
  for (const auto& [g, c] : gb) nb += c * c;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

class FailingProvider : public EmbeddingProvider {
 public:
  Embedding embed(const std::string&) const override {
    raise(ErrorCode::EmbedderError, "wired to fail");
  }
};

}  // namespace

TEST_CASE("normalize_intent maps ADD TO CART onto add_to_cart") {
  std::set<IntentLabel> canonical(kEcommerceIntents.begin(), kEcommerceIntents.end());
  CHECK(normalize_intent("ADD TO CART", canonical) == "add_to_cart");
}

TEST_CASE("normalize_intent is idempotent on every bundled canonical label") {
  for (const char* domain : {"recipe", "ecommerce"}) {
    TransitionGraph graph = load_graph(asset(std::string(domain) + "/graph.json"));
    std::set<IntentLabel> canonical = graph.intent_labels();
    for (const IntentLabel& label : canonical) {
      CHECK(normalize_intent(label, canonical) == label);
    }
  }
}

TEST_CASE("select_i_add_to_cart resolves to add_to_cart, agreeing with the cosine oracle") {
  const std::string raw = "select_i_add_to_cart";
  std::string oracle_best;
  double oracle_score = -1.0;
  for (const IntentLabel& label : kEcommerceIntents) {
    const double score = trigram_cosine(raw, label);
    if (score > oracle_score ||
        (score == oracle_score && label < oracle_best)) {
      oracle_score = score;
      oracle_best = label;
    }
  }
  CHECK(oracle_best == "add_to_cart");
  std::set<IntentLabel> canonical(kEcommerceIntents.begin(), kEcommerceIntents.end());
  CHECK(normalize_intent(raw, canonical) == oracle_best);
}

TEST_CASE("lexical normalization is invariant to case and underscore-vs-space") {
  std::set<IntentLabel> canonical(kEcommerceIntents.begin(), kEcommerceIntents.end());
  for (const std::string raw :
       {"add_to_cart", "ADD_TO_CART", "Add To Cart", "  add   to cart "}) {
    CHECK(normalize_intent(raw, canonical) == "add_to_cart");
  }
}

TEST_CASE("failed primary embedder falls back to the lexical provider") {
  FailingProvider failing;
  std::set<IntentLabel> canonical(kEcommerceIntents.begin(), kEcommerceIntents.end());
  CHECK(normalize_intent("ADD TO CART", canonical, &failing) == "add_to_cart");
}

TEST_CASE("remote embedding provider speaks the embeddings JSON shape") {
  httplib::Server server;
  server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body);
    const std::string text = body["input"][0].get<std::string>();
    // toy embedding: 2-dimensional, direction depends on the first byte
    double x = text.empty() || text[0] < 'n' ? 1.0 : 0.0;
    nlohmann::json reply = {
        {"data", {{{"embedding", {x * 3.0, (1.0 - x) * 3.0}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteEmbedding provider("http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings",
                           "toy-model");
  Embedding apple = provider.embed("apple");
  Embedding zebra = provider.embed("zebra");
  CHECK(dot(apple, apple) == doctest::Approx(1.0));  // unit-normalized
  CHECK(dot(apple, zebra) == doctest::Approx(0.0));

  // Nearest neighbor through the remote provider.
  CHECK(normalize_intent("apricot", {"avocado", "zucchini"}, &provider) == "avocado");

  server.stop();
  thread.join();
}

TEST_CASE("ties break lexicographically") {
  // Identical normalized forms: both candidates tie at cosine 1.
  IntentNormalizer normalizer({"b_label", "a_label"});
  // "a label" and "b label" differ; craft a tie with duplicate-normalizing labels
  IntentNormalizer dup({"same label", "same_label"});
  CHECK(dup.normalize("SAME LABEL") == "same label");  // space < underscore after sort
  CHECK(normalizer.normalize("a_label") == "a_label");
}

TEST_CASE("intent metrics: perfect and disjoint predictions") {
  std::vector<IntentLabel> gold = {"a", "b", "c"};
  IntentMetrics perfect = intent_metrics(gold, gold);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  std::vector<IntentLabel> wrong = {"b", "c", "a"};
  IntentMetrics zero = intent_metrics(gold, wrong);
  CHECK(zero.accuracy == 0.0);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);
}

TEST_CASE("intent metrics match the hand-computed 10-turn fixture") {
  std::vector<IntentLabel> gold = {"a", "a", "a", "a", "b", "b", "b", "c", "c", "c"};
  std::vector<IntentLabel> pred = {"a", "a", "a", "b", "b", "b", "c", "c", "c", "a"};
  // By hand: 7 matches; micro TP=7, FP=3, FN=3.
  IntentMetrics metrics = intent_metrics(gold, pred);
  CHECK(metrics.accuracy == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(metrics.precision == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(metrics.recall == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(metrics.f1 == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("micro P = R = F1 = accuracy on random single-label fixtures") {
  SplitMix64 rng(77);
  const std::vector<IntentLabel> labels = {"u", "v", "w", "x"};
  for (int round = 0; round < 20; ++round) {
    std::vector<IntentLabel> gold, pred;
    const std::size_t n = 1 + rng.next_index(40);
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(labels[rng.next_index(labels.size())]);
      pred.push_back(labels[rng.next_index(labels.size())]);
    }
    IntentMetrics metrics = intent_metrics(gold, pred);
    CHECK(metrics.precision == doctest::Approx(metrics.accuracy).epsilon(1e-12));
    CHECK(metrics.recall == doctest::Approx(metrics.accuracy).epsilon(1e-12));
    CHECK(metrics.f1 == doctest::Approx(metrics.accuracy).epsilon(1e-12));
  }
}

TEST_CASE("intent metrics reject mismatched lengths") {
  try {
    intent_metrics({"a"}, {"a", "b"});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

TEST_CASE("slot metrics: identical maps score 1") {
  std::vector<std::map<std::string, std::string>> turns = {
      {{"query", "pancake"}, {"i", "2"}}};
  SlotMetrics metrics = slot_metrics(turns, turns);
  CHECK(metrics.precision == 1.0);
  CHECK(metrics.recall == 1.0);
  CHECK(metrics.f1 == 1.0);
}

TEST_CASE("slot value variations get zero credit under exact matching") {
  std::vector<std::map<std::string, std::string>> gold = {{{"query", "pancake"}}};
  std::vector<std::map<std::string, std::string>> pred = {{{"query", "pancake recipe"}}};
  SlotMetrics metrics = slot_metrics(gold, pred);
  CHECK(metrics.precision == 0.0);
  CHECK(metrics.recall == 0.0);
  CHECK(metrics.f1 == 0.0);
}

TEST_CASE("slot metrics match the hand-enumerated 5-turn fixture") {
  std::vector<std::map<std::string, std::string>> gold = {
      {{"query", "pancake"}},
      {{"query", "pancake"}},
      {{"i", "2"}, {"title", "Apple Pie"}},
      {},
      {{"title", "Apple  Pie"}},
  };
  std::vector<std::map<std::string, std::string>> pred = {
      {{"query", "pancake"}},
      {{"query", "pancake recipe"}},
      {{"i", "2"}},
      {{"duration", "5 minutes"}},
      {{"title", "apple pie"}},
  };
  // Pairs by hand: TP = 3 (t1 query, t3 i, t5 title via normalization),
  // FP = 2 (t2 query variant, t4 duration), FN = 2 (t2 query, t3 title).
  SlotMetrics metrics = slot_metrics(gold, pred);
  CHECK(metrics.precision == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(metrics.recall == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(metrics.f1 == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("slot normalization lowercases, trims and collapses whitespace") {
  CHECK(normalize_slot_value("  Apple   PIE  ") == "apple pie");
}

TEST_CASE("confusion matrix: perfect agreement is diagonal") {
  std::vector<IntentLabel> gold = {"x", "y", "z", "x"};
  ConfusionMatrix matrix = confusion_matrix(gold, gold, {"x", "y", "z"});
  CHECK(matrix.at("x", "x") == 2);
  CHECK(matrix.at("y", "y") == 1);
  CHECK(matrix.at("x", "y") == 0);
}

TEST_CASE("confusion matrix: single disagreeing pair") {
  ConfusionMatrix matrix = confusion_matrix({"a"}, {"b"}, {"a", "b"});
  CHECK(matrix.at("a", "b") == 1);
  CHECK(matrix.at("a", "a") == 0);
}

TEST_CASE("confusion matrix matches the 20-turn hand tally and row sums") {
  std::vector<IntentLabel> gold = {"x", "x", "x", "x", "x", "x", "y", "y", "y", "y",
                                   "y", "y", "y", "z", "z", "z", "z", "z", "x", "y"};
  std::vector<IntentLabel> pred = {"x", "x", "x", "y", "y", "z", "y", "y", "y", "y",
                                   "x", "x", "z", "z", "z", "z", "x", "y", "x", "y"};
  ConfusionMatrix matrix = confusion_matrix(gold, pred, {"x", "y", "z"});
  const std::vector<std::vector<long>> expected = {{4, 2, 1}, {2, 5, 1}, {1, 1, 3}};
  CHECK(matrix.counts == expected);
  std::map<IntentLabel, long> gold_counts;
  for (const IntentLabel& g : gold) ++gold_counts[g];
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    long row_sum = 0;
    for (long c : matrix.counts[i]) row_sum += c;
    CHECK(row_sum == gold_counts[matrix.labels[i]]);
  }
  const std::string csv = matrix.to_csv();
  CHECK(csv.find("gold\\pred,x,y,z") != std::string::npos);
  CHECK(csv.find("x,4,2,1") != std::string::npos);
}

TEST_CASE("confusion matrix rejects labels outside the label set") {
  try {
    confusion_matrix({"a"}, {"mystery"}, {"a", "b"});
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
  }
}

TEST_CASE("self-BLEU of identical sentences is 1") {
  std::vector<std::string> utterances(5, "hello there my friend");
  CHECK(self_bleu(utterances) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("self-BLEU of vocabulary-disjoint sentences is 0") {
  CHECK(self_bleu({"alpha beta gamma delta", "one two three four"}) == 0.0);
}

TEST_CASE("self-BLEU matches the brute-force oracle on the 3-sentence fixture") {
  const std::vector<std::string> fixture = {
      "the cat sat on the mat", "the cat ate the fish", "a dog sat on the mat"};
  // Frozen from an independent implementation (clipped counts, uniform 1..4
  // weights, closest-length brevity penalty).
  CHECK(std::abs(self_bleu(fixture) - 0.370802609208656) < 1e-9);
}

TEST_CASE("self-BLEU is order-invariant and duplication does not decrease it") {
  const std::vector<std::string> base = {
      "make the sauce first", "whisk the eggs gently", "the sauce needs salt"};
  std::vector<std::string> shuffled = {base[2], base[0], base[1]};
  CHECK(self_bleu(base) == doctest::Approx(self_bleu(shuffled)).epsilon(1e-12));

  std::vector<std::string> doubled = base;
  doubled.insert(doubled.end(), base.begin(), base.end());
  CHECK(self_bleu(doubled) >= self_bleu(base));
  CHECK(self_bleu(base) >= 0.0);
  CHECK(self_bleu(base) <= 1.0);
}

TEST_CASE("self-BLEU needs at least two utterances") {
  try {
    self_bleu({"only one"});
    FAIL("expected TooFewUtterances");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewUtterances);
  }
}

TEST_CASE("judge parses plain and embedded digits") {
  MockBackend two({{"*", "2", false, ""}});
  CHECK(judge_relevance(two, {}, "candidate", "reference") == 2);
  MockBackend embedded({{"*", "The answer is: 1", false, ""}});
  CHECK(judge_relevance(embedded, {}, "candidate", "reference") == 1);
}

TEST_CASE("unparseable judgments raise after one retry") {
  MockBackend vague({{"*", "maybe", false, ""}});
  try {
    judge_relevance(vague, {}, "candidate", "reference");
    FAIL("expected UnparseableJudgment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnparseableJudgment);
  }
  CHECK(vague.request_count() == 2);
}

TEST_CASE("aggregate_ratings: majority wins, ties take the lowest") {
  CHECK(aggregate_ratings({2, 2, 1}) == 2);
  CHECK(aggregate_ratings({2, 1}) == 1);
  CHECK(aggregate_ratings({0, 1, 2}) == 0);
}

TEST_CASE("aggregate_ratings never invents labels and rejects empty input") {
  SplitMix64 rng(3);
  for (int round = 0; round < 50; ++round) {
    std::vector<int> ratings;
    const std::size_t n = 1 + rng.next_index(7);
    for (std::size_t i = 0; i < n; ++i) ratings.push_back(static_cast<int>(rng.next_index(3)));
    const int winner = aggregate_ratings(ratings);
    CHECK(std::find(ratings.begin(), ratings.end(), winner) != ratings.end());
  }
  try {
    aggregate_ratings({});
    FAIL("expected EmptyRatings");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRatings);
  }
}

TEST_CASE("kappa is 1 for identical sequences with several labels") {
  std::vector<int> labels = {0, 1, 2, 1, 0, 2, 2};
  CHECK(cohens_kappa(labels, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kappa on contingency [[20,5],[10,15]] equals 0.4 to 10 decimals") {
  // Closed form, verified independently: p_o = 35/50 = 0.7,
  // p_e = (25*30 + 25*20) / 2500 = 0.5, kappa = (0.7 - 0.5) / 0.5 = 0.4.
  std::vector<int> a, b;
  auto add = [&](int label_a, int label_b, int count) {
    for (int i = 0; i < count; ++i) {
      a.push_back(label_a);
      b.push_back(label_b);
    }
  };
  add(0, 0, 20);
  add(0, 1, 5);
  add(1, 0, 10);
  add(1, 1, 15);
  CHECK(std::abs(cohens_kappa(a, b) - 0.4000000000) < 1e-10);
}

TEST_CASE("kappa is symmetric") {
  std::vector<int> a = {0, 0, 1, 2, 1, 0, 2};
  std::vector<int> b = {0, 1, 1, 2, 0, 0, 1};
  CHECK(cohens_kappa(a, b) == doctest::Approx(cohens_kappa(b, a)).epsilon(1e-12));
}

TEST_CASE("independent labelers have near-zero kappa in expectation") {
  // Alternating vs constant has kappa exactly 0 (p_o = p_e = 0.5).
  std::vector<int> alternating, constant;
  for (int i = 0; i < 50; ++i) {
    alternating.push_back(i % 2);
    constant.push_back(1);
  }
  CHECK(cohens_kappa(alternating, constant) == doctest::Approx(0.0).epsilon(1e-12));

  // Alternating vs uniformly random, averaged over repetitions, is ~0 too.
  SplitMix64 rng(123);
  double total = 0.0;
  const int repetitions = 1000;
  for (int round = 0; round < repetitions; ++round) {
    std::vector<int> a, b;
    for (int i = 0; i < 50; ++i) {
      a.push_back(i % 2);
      b.push_back(static_cast<int>(rng.next_index(2)));
    }
    total += cohens_kappa(a, b);
  }
  CHECK(std::abs(total / repetitions) < 0.05);
}

TEST_CASE("kappa reaches 1 only for identical sequences (with >= 2 labels)") {
  SplitMix64 rng(9);
  for (int round = 0; round < 50; ++round) {
    std::vector<int> a, b;
    for (int i = 0; i < 30; ++i) {
      a.push_back(static_cast<int>(rng.next_index(3)));
      b.push_back(static_cast<int>(rng.next_index(3)));
    }
    b[rng.next_index(b.size())] = (a[0] + 1) % 3;  // force at least one disagreement
    if (a != b) CHECK(cohens_kappa(a, b) < 1.0);
  }
}

TEST_CASE("kappa of equal constant sequences is 1, different constants 0") {
  CHECK(cohens_kappa({1, 1, 1}, {1, 1, 1}) == 1.0);
  CHECK(cohens_kappa({1, 1, 1}, {2, 2, 2}) == 0.0);
}

TEST_CASE("kappa rejects mismatched lengths") {
  try {
    cohens_kappa({1}, {1, 2});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

TEST_CASE("dataset stats on a single two-turn conversation") {
  TrainingExample example;
  example.example_id = "e";
  SystemState sys_state{"greeting", {}, {}};
  SystemState usr_state{"bye", {}, {}};
  example.turns.push_back({TurnRole::System, "hello out there", sys_state});
  example.turns.push_back({TurnRole::User, "bye", usr_state});
  example.states.push_back(usr_state);
  std::vector<TrainingExample> examples{example};
  DatasetStats stats = dataset_stats(examples);
  CHECK(stats.utterances_per_conversation.mean == 2.0);
  CHECK(stats.utterances_per_conversation.sd == 0.0);
  CHECK(stats.tokens_per_system_utterance.mean == 3.0);
  CHECK(stats.tokens_per_user_utterance.mean == 1.0);
  CHECK(stats.tokens_per_conversation.mean == 4.0);
}

TEST_CASE("dataset stats recomputes against an independent pass") {
  SplitMix64 rng(31);
  std::vector<TrainingExample> examples;
  for (int e = 0; e < 20; ++e) {
    TrainingExample example;
    const std::size_t exchanges = 1 + rng.next_index(5);
    for (std::size_t t = 0; t < exchanges; ++t) {
      std::string sys_text, usr_text;
      for (std::size_t w = 0; w < 1 + rng.next_index(12); ++w) sys_text += "w ";
      for (std::size_t w = 0; w < 1 + rng.next_index(6); ++w) usr_text += "u ";
      SystemState s{"n", {}, {}};
      example.turns.push_back({TurnRole::System, sys_text, s});
      example.turns.push_back({TurnRole::User, usr_text, s});
      example.states.push_back(s);
    }
    examples.push_back(std::move(example));
  }
  DatasetStats stats = dataset_stats(examples);

  // Independent recomputation with plain accumulators.
  double total_utts = 0.0;
  std::vector<double> per_conv;
  for (const auto& example : examples) {
    double utts = 0.0;
    for (const auto& turn : example.turns) {
      if (turn.role == TurnRole::System || turn.role == TurnRole::User) utts += 1.0;
    }
    per_conv.push_back(utts);
    total_utts += utts;
  }
  const double mean = total_utts / static_cast<double>(examples.size());
  double var = 0.0;
  for (double v : per_conv) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(per_conv.size()));
  CHECK(stats.utterances_per_conversation.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(stats.utterances_per_conversation.sd == doctest::Approx(sd).epsilon(1e-12));
  CHECK(stats.tokens_per_system_utterance.sd >= 0.0);
  CHECK(stats.tokens_per_user_utterance.sd >= 0.0);
}

TEST_CASE("dataset stats rejects empty datasets") {
  try {
    dataset_stats({});
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}
