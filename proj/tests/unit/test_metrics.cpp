#include <doctest.h>

#include <algorithm>
#include <random>

#include "metric_oracle.hpp"
#include "slukit/error.hpp"
#include "slukit/metrics.hpp"

using namespace slukit::metrics;
using slukit::testing::oracle_counts;
using slukit::testing::oracle_spans;
using slukit::testing::perturb;
using slukit::testing::random_labels;

namespace {

std::vector<Span> spans(std::initializer_list<std::string> l) {
  const Labels v(l);
  return extract_spans(v);
}

}  // namespace

TEST_CASE("span extraction") {
  CHECK(spans({"O", "B-music-type", "I-music-type", "O"}) ==
        std::vector<Span>{{"music-type", 1, 2}});
  CHECK(spans({"B-a", "B-a"}) == std::vector<Span>{{"a", 0, 0}, {"a", 1, 1}});
  // conlleval counts one chunk here
  CHECK(spans({"I-x", "I-x"}) == std::vector<Span>{{"x", 0, 1}});
  CHECK(spans({"B-a", "I-b", "I-b", "O", "I-a"}) ==
        std::vector<Span>{{"a", 0, 0}, {"b", 1, 2}, {"a", 4, 4}});
  CHECK(spans({}).empty());
  CHECK(spans({"O", "O"}).empty());
}

TEST_CASE("slot f1") {
  const std::vector<Labels> gold{{"O", "B-a", "I-a", "O", "B-b"}};
  const std::vector<Labels> pred{{"O", "B-a", "I-a", "O", "O"}};
  auto s = slot_f1(gold, pred);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  CHECK(slot_f1(gold, gold).f1 == 1.0);

  const std::vector<Labels> g2{{"O", "O", "B-a", "I-a"}};
  const std::vector<Labels> p2{{"O", "O", "B-a", "O"}};
  CHECK(slot_f1(g2, p2).f1 == 0.0);

  const std::vector<Labels> empty{{"O"}};
  s = slot_f1(empty, empty);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);

  const std::vector<Labels> bad_g{{"O"}, {"O", "O"}};
  const std::vector<Labels> bad_p{{"O"}, {"O"}};
  try {
    slot_f1(bad_g, bad_p);
    FAIL("expected a contract error");
  } catch (const slukit::ContractError& e) {
    CHECK(std::string(e.what()).find("utterance 1") != std::string::npos);
  }
}

TEST_CASE("intent accuracy and macro f1") {
  const std::vector<IntentSet> ab{{"A", "B"}}, ba{{"B", "A"}};
  CHECK(intent_accuracy(ab, ba) == 1.0);
  const std::vector<IntentSet> g{{"A"}, {"B"}}, p{{"A"}, {"C"}};
  CHECK(intent_accuracy(g, p) == 0.5);
  CHECK(intent_accuracy(g, g) == 1.0);

  CHECK(intent_macro_f1(g, g) == 1.0);
  const std::vector<IntentSet> mg{{"A"}, {"A", "B"}}, mp{{"A"}, {"A"}};
  CHECK(intent_macro_f1(mg, mp) == 0.5);
  // C only ever predicted: F1 0 for C, A and B get 1 and 0.
  const std::vector<IntentSet> fg{{"A"}, {"B"}}, fp{{"A"}, {"C"}};
  CHECK(intent_macro_f1(fg, fp) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("exact match accuracy") {
  const std::vector<IntentSet> gi{{"A"}, {"B"}};
  const std::vector<Labels> gs{{"O", "B-a"}, {"B-b", "I-b"}};
  CHECK(exact_match_accuracy(gi, gi, gs, gs) == 1.0);
  const std::vector<Labels> one_wrong{{"O", "B-a"}, {"B-b", "O"}};
  CHECK(exact_match_accuracy(gi, gi, gs, one_wrong) == 0.5);
  const std::vector<IntentSet> pi{{"A"}, {"C"}};
  CHECK(exact_match_accuracy(gi, pi, gs, gs) == 0.5);

  // token match is stricter than span match
  const std::vector<IntentSet> one{{"A"}};
  const std::vector<Labels> g{{"B-a", "I-b"}}, p{{"B-a", "B-b"}};
  CHECK(exact_match_accuracy(one, one, g, p, SlotMatch::kToken) == 0.0);
  CHECK(exact_match_accuracy(one, one, g, p, SlotMatch::kSpan) == 1.0);
}

TEST_CASE("metric report json") {
  const std::vector<IntentSet> gi{{"A"}, {"B"}};
  const std::vector<IntentSet> pi{{"A"}, {"A"}};
  const std::vector<Labels> gs{{"O", "B-a"}, {"B-b", "I-b"}};
  const std::vector<Labels> ps{{"O", "B-a"}, {"B-b", "O"}};
  const auto r = compute_report(gi, pi, gs, ps);
  CHECK(r.slot_f1 == 0.5);
  CHECK(r.ema == 0.5);
  const auto j = r.to_json();
  CHECK(j.dump() ==
        nlohmann::ordered_json::parse(j.dump()).dump());
  CHECK(j.begin().key() == "slot_f1");
  CHECK(j.size() == 6);
  CHECK(MetricReport::from_json(nlohmann::json::parse(j.dump())) == r);
}

TEST_CASE("property: spans and slot f1 match the brute-force oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> utts(1, 8), len(0, 12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Labels> gold, pred;
    const std::size_t n = utts(rng);
    for (std::size_t u = 0; u < n; ++u) {
      gold.push_back(random_labels(len(rng), rng));
      pred.push_back(perturb(gold.back(), rng));
    }
    for (const auto& g : gold) {
      std::vector<slukit::testing::OracleSpan> mine;
      for (const auto& s : extract_spans(g)) mine.emplace_back(s.label, s.start, s.end);
      REQUIRE(mine == oracle_spans(g));
    }
    const auto c = oracle_counts(gold, pred);
    const auto s = slot_f1(gold, pred);
    REQUIRE(s.precision == (c.pred ? static_cast<double>(c.tp) / static_cast<double>(c.pred) : 0.0));
    REQUIRE(s.recall == (c.gold ? static_cast<double>(c.tp) / static_cast<double>(c.gold) : 0.0));
  }
}

TEST_CASE("property: metric invariants") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> utts(1, 10), len(1, 10);
  std::uniform_int_distribution<int> intent(0, 3);
  const std::vector<std::string> names{"A", "B", "C", "D"};
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = utts(rng);
    std::vector<Labels> gs, ps;
    std::vector<IntentSet> gi, pi;
    for (std::size_t u = 0; u < n; ++u) {
      gs.push_back(random_labels(len(rng), rng));
      ps.push_back(perturb(gs.back(), rng));
      gi.push_back({names[static_cast<std::size_t>(intent(rng))]});
      pi.push_back({names[static_cast<std::size_t>(intent(rng))]});
    }
    const auto r = compute_report(gi, pi, gs, ps);
    for (double v : {r.slot_f1, r.slot_precision, r.slot_recall, r.intent_accuracy,
                     r.intent_macro_f1, r.ema}) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
    const double hm = r.slot_precision + r.slot_recall == 0.0
                          ? 0.0
                          : 2 * r.slot_precision * r.slot_recall /
                                (r.slot_precision + r.slot_recall);
    REQUIRE(r.slot_f1 == hm);

    std::size_t sentence_ok = 0;
    for (std::size_t u = 0; u < n; ++u) sentence_ok += gs[u] == ps[u];
    REQUIRE(r.ema <= std::min(r.intent_accuracy, static_cast<double>(sentence_ok) / n));

    const auto self = compute_report(gi, gi, gs, gs);
    REQUIRE(self.ema == 1.0);
    bool any_span = false;
    for (const auto& g : gs) any_span = any_span || !extract_spans(g).empty();
    if (any_span) REQUIRE(self.slot_f1 == 1.0);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Labels> gs2, ps2;
    for (auto i : order) {
      gs2.push_back(gs[i]);
      ps2.push_back(ps[i]);
    }
    const auto a = slot_f1(gs, ps), b = slot_f1(gs2, ps2);
    REQUIRE(a.f1 == b.f1);
    REQUIRE(a.precision == b.precision);
  }
}
