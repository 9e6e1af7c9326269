#include <doctest.h>

#include <array>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "absa/baseline.hpp"
#include "absa/corpus.hpp"
#include "absa/errors.hpp"

using namespace absa;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(ABSA_FIXTURE_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

AspectInstance make(const std::string& aspect, Polarity p) {
    AspectInstance inst;
    inst.dataset_id = DatasetId::haad;
    inst.sentence_id = "s";
    inst.sentence_text = "text " + aspect;
    inst.aspect_text = aspect;
    inst.polarity = p;
    return inst;
}

}  // namespace

TEST_CASE("fit majorities on the haad fixture") {
    LabeledCorpus c = parse_haad(read_fixture("haad_mini_train.xml")).corpus;
    BaselineModel m = fit_baseline(c.instances);

    CHECK(m.global_majority == Polarity::positive);  // 4 pos vs 3 neg, unique max
    CHECK(m.per_aspect_majorities.size() == 7);
    CHECK(m.per_aspect_majorities.at("القصة") == Polarity::positive);
    CHECK(m.per_aspect_majorities.at("الرواية") == Polarity::conflict);
    CHECK(m.per_aspect_majorities.at("النهاية") == Polarity::negative);

    // One negative + one neutral observation tie; global frequency (neg 3 > neu 1)
    // breaks it, and the break is logged.
    CHECK(m.per_aspect_majorities.at("الكتاب") == Polarity::negative);
    REQUIRE(m.tie_break_trace.size() == 1);
    CHECK(m.tie_break_trace[0].aspect == "الكتاب");
    CHECK(m.tie_break_trace[0].chosen == Polarity::negative);
    REQUIRE(m.tie_break_trace[0].tied.size() == 2);
}

TEST_CASE("single-instance training set") {
    std::vector<AspectInstance> train = {make("الوحيد", Polarity::neutral)};
    BaselineModel m = fit_baseline(train);
    CHECK(m.global_majority == Polarity::neutral);
    CHECK(m.per_aspect_majorities.at("الوحيد") == Polarity::neutral);
    CHECK(m.tie_break_trace.empty());
}

TEST_CASE("brute-force majority example") {
    std::vector<AspectInstance> train = {
        make("A", Polarity::negative),
        make("A", Polarity::negative),
        make("A", Polarity::positive),
    };
    BaselineModel m = fit_baseline(train);
    CHECK(m.per_aspect_majorities.at("A") == Polarity::negative);
}

TEST_CASE("tie-break falls through to fixed label order") {
    // Two aspects, all four labels twice each: global counts all tie, so both the
    // global majority and each aspect majority resolve by fixed order.
    std::vector<AspectInstance> train;
    for (Polarity p : kAllPolarities) {
        train.push_back(make("X", p));
        train.push_back(make("Y", p));
    }
    BaselineModel m = fit_baseline(train);
    CHECK(m.global_majority == Polarity::positive);
    CHECK(m.per_aspect_majorities.at("X") == Polarity::positive);
    CHECK(m.per_aspect_majorities.at("Y") == Polarity::positive);
    // Global tie plus two aspect ties, all traced.
    CHECK(m.tie_break_trace.size() == 3);
    bool saw_global = false;
    for (const TieBreakRecord& r : m.tie_break_trace) {
        if (r.aspect == "<global>") {
            saw_global = true;
            CHECK(r.tied.size() == 4);
            CHECK(r.chosen == Polarity::positive);
        }
    }
    CHECK(saw_global);

    // Neutral/conflict-only tie: fixed order prefers neutral.
    std::vector<AspectInstance> nc = {make("Z", Polarity::neutral),
                                      make("Z", Polarity::conflict)};
    CHECK(fit_baseline(nc).per_aspect_majorities.at("Z") == Polarity::neutral);
}

TEST_CASE("fit rejects an empty training set") {
    std::vector<AspectInstance> none;
    CHECK_THROWS_AS(fit_baseline(none), ConfigError);
}

TEST_CASE("predict: lookup, fallback, determinism") {
    LabeledCorpus c = parse_haad(read_fixture("haad_mini_train.xml")).corpus;
    BaselineModel m = fit_baseline(c.instances);
    CHECK(predict_baseline(m, "القصة") == Polarity::positive);
    CHECK(predict_baseline(m, "شيء غير معروف") == Polarity::positive);  // global fallback
    CHECK(predict_baseline(m, "") == Polarity::positive);
    for (int i = 0; i < 5; ++i) {
        CHECK(predict_baseline(m, "النهاية") == Polarity::negative);
    }
}

TEST_CASE("predict normalizes the lookup key") {
    // Model keys are NFC; a decomposed query (alef + combining madda) must match the
    // composed key.
    std::vector<AspectInstance> train = {make("\xD8\xA2", Polarity::negative),
                                         make("q", Polarity::positive),
                                         make("q", Polarity::positive)};
    BaselineModel m = fit_baseline(train);
    CHECK(predict_baseline(m, "\xD8\xA7\xD9\x93") == Polarity::negative);
}

TEST_CASE("evaluate on the haad fixture test set") {
    LabeledCorpus train = parse_haad(read_fixture("haad_mini_train.xml")).corpus;
    LabeledCorpus test =
        parse_haad(read_fixture("haad_mini_test.xml"), SplitTag::test).corpus;
    BaselineModel m = fit_baseline(train.instances);
    BaselineEval ev = evaluate_baseline(m, test.instances);

    // Four of five right: الرواية is remembered as conflict but gold says neutral.
    CHECK(ev.total == 5);
    CHECK(ev.correct == 4);
    CHECK(ev.accuracy == doctest::Approx(0.8));
    CHECK(ev.per_class[0][0] == 2);  // positive correct
    CHECK(ev.per_class[1][0] == 2);  // positive support
    CHECK(ev.per_class[0][1] == 2);
    CHECK(ev.per_class[1][1] == 2);
    CHECK(ev.per_class[0][2] == 0);  // neutral correct
    CHECK(ev.per_class[1][2] == 1);
    CHECK(ev.per_class[1][3] == 0);  // no conflict instances in test
}

TEST_CASE("evaluate boundary cases") {
    std::vector<AspectInstance> train = {make("A", Polarity::positive)};
    BaselineModel m = fit_baseline(train);
    BaselineEval perfect = evaluate_baseline(m, train);
    CHECK(perfect.accuracy == doctest::Approx(1.0));

    std::vector<AspectInstance> none;
    CHECK_THROWS_AS(evaluate_baseline(m, none), ConfigError);
}

TEST_CASE("oracle equivalence on random small multisets") {
    std::mt19937 rng(20240814);
    const std::array<std::string, 8> aspects = {"a1", "a2", "a3", "a4",
                                                "a5", "a6", "a7", "a8"};
    for (int round = 0; round < 300; ++round) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<AspectInstance> train;
        for (std::size_t i = 0; i < n; ++i) {
            train.push_back(make(aspects[rng() % aspects.size()],
                                 static_cast<Polarity>(rng() % 4)));
        }
        BaselineModel m = fit_baseline(train);

        // Brute-force counts.
        std::map<std::string, std::array<std::size_t, 4>> per_aspect;
        std::array<std::size_t, 4> global{};
        for (const AspectInstance& inst : train) {
            ++per_aspect[inst.aspect_text][static_cast<std::size_t>(inst.polarity)];
            ++global[static_cast<std::size_t>(inst.polarity)];
        }

        // Every stored majority attains the maximal count; no aspect missing or extra.
        CHECK(m.per_aspect_majorities.size() == per_aspect.size());
        for (const auto& [aspect, counts] : per_aspect) {
            const std::size_t best = *std::max_element(counts.begin(), counts.end());
            auto it = m.per_aspect_majorities.find(aspect);
            REQUIRE(it != m.per_aspect_majorities.end());
            CHECK(counts[static_cast<std::size_t>(it->second)] == best);
        }
        const std::size_t gbest = *std::max_element(global.begin(), global.end());
        CHECK(global[static_cast<std::size_t>(m.global_majority)] == gbest);

        // evaluate agrees with a direct correctness count on a random test set.
        std::vector<AspectInstance> test;
        for (std::size_t i = 0; i < 20; ++i) {
            test.push_back(make(aspects[rng() % aspects.size()],
                                static_cast<Polarity>(rng() % 4)));
        }
        BaselineEval ev = evaluate_baseline(m, test);
        std::size_t manual = 0;
        for (const AspectInstance& inst : test) {
            if (predict_baseline(m, inst.aspect_text) == inst.polarity) ++manual;
        }
        CHECK(ev.correct == manual);
        CHECK(ev.accuracy ==
              doctest::Approx(static_cast<double>(manual) / static_cast<double>(20)));
    }
}

TEST_CASE("duplicating an existing observation never flips its majority away") {
    std::mt19937 rng(99);
    for (int round = 0; round < 100; ++round) {
        std::vector<AspectInstance> train;
        const std::size_t n = 2 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            train.push_back(make("W", static_cast<Polarity>(rng() % 4)));
        }
        BaselineModel before = fit_baseline(train);
        const Polarity winner = before.per_aspect_majorities.at("W");
        train.push_back(make("W", winner));
        BaselineModel after = fit_baseline(train);
        CHECK(after.per_aspect_majorities.at("W") == winner);
    }
}

TEST_CASE("model json round-trip") {
    LabeledCorpus c = parse_haad(read_fixture("haad_mini_train.xml")).corpus;
    BaselineModel m = fit_baseline(c.instances);
    const std::string text = m.to_json();
    BaselineModel back = BaselineModel::from_json(text, "mem");
    CHECK(back.per_aspect_majorities == m.per_aspect_majorities);
    CHECK(back.global_majority == m.global_majority);
    REQUIRE(back.tie_break_trace.size() == m.tie_break_trace.size());
    CHECK(back.tie_break_trace[0].aspect == m.tie_break_trace[0].aspect);
    CHECK(back.tie_break_trace[0].chosen == m.tie_break_trace[0].chosen);
    CHECK(back.tie_break_trace[0].tied == m.tie_break_trace[0].tied);

    CHECK_THROWS_AS(BaselineModel::from_json("{", "mem"), ParseError);
    CHECK_THROWS_AS(BaselineModel::from_json(R"({"global_majority":"upbeat"})", "mem"),
                    ParseError);
}
