#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pcfglab/errors.h"
#include "pcfglab/sampler.h"
#include "support.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace pcfglab;

namespace {

std::string slurp(const std::filesystem::path & p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

CorpusSpec trainOnly(std::size_t n, std::size_t min_len, std::size_t max_len, std::uint64_t seed) {
    CorpusSpec spec;
    spec.sentences = {n, 0, 0, 0};
    spec.min_len = min_len;
    spec.max_len = max_len;
    spec.seed = seed;
    return spec;
}

// Enough distinct strings for several disjoint splits.
Grammar richGrammar() {
    std::mt19937_64 rng(12);
    testing::RandomGrammarOptions o;
    o.terminals = 6;
    o.binary_mass = 0.45;
    const auto text = testing::randomGrammar(rng, o);
    return Grammar::fromText(text.rules, text.lexicon);
}

} // namespace

TEST_CASE("deterministic grammar") {
    const Grammar g = testing::g3();
    std::mt19937_64 rng(1);
    const auto d = sampleDerivation(g, rng);
    REQUIRE(d.has_value());
    REQUIRE(d->tokens.size() == 1);
    CHECK(g.symbols().terminal(d->tokens[0]) == "y");
    CHECK(g.symbols().nonterminal(d->tags[0]) == "X");
    CHECK(d->logp == 0.0);
    CHECK(formatDerivation(g, *d, CorpusFormat::Trees) == "(S (X y))");
}

TEST_CASE("derivation log-probability is the sum of its rules") {
    const Grammar g = testing::g2();
    std::mt19937_64 rng(8);
    for (int k = 0; k < 200; ++k) {
        const auto d = sampleDerivation(g, rng);
        if (!d) continue;
        const double n = static_cast<double>(d->tokens.size());
        CHECK(d->logp == doctest::Approx((n - 1) * std::log(0.3) + n * std::log(0.7)).epsilon(1e-12));
        CHECK(d->tree.size() == 2 * static_cast<std::size_t>(n) - 1 + static_cast<std::size_t>(n));
    }
}

TEST_CASE("G1 sentence frequencies") {
    const Grammar g = testing::g1();
    const Corpus corpus = generateCorpus(g, trainOnly(100000, 1, 25, 42));
    std::size_t ab = 0;
    for (const auto & d : corpus.split(Split::Train)) ab += surfaceString(g, d) == "a b";
    CHECK(std::abs(static_cast<double>(ab) / 100000.0 - 0.5) <= 0.02);
}

TEST_CASE("supercritical grammar hits the expansion cap") {
    const Grammar g = Grammar::fromText("S -> S S 0.9\n", "S x 0.1\n");
    std::mt19937_64 rng(3);
    int rejected = 0;
    for (int k = 0; k < 200; ++k) rejected += !sampleDerivation(g, rng, 50).has_value();
    CHECK(rejected > 0);

    Sampler sampler(g);
    const auto outcome = sampler.sample(rng, 10, std::numeric_limits<std::size_t>::max());
    CHECK((outcome.status == SampleStatus::DepthCap || outcome.status == SampleStatus::Ok));
}

TEST_CASE("length bounds") {
    const Grammar g1 = testing::g1();
    const Corpus c1 = generateCorpus(g1, trainOnly(10, 2, 2, 1));
    REQUIRE(c1.split(Split::Train).size() == 10);
    for (const auto & d : c1.split(Split::Train)) {
        const std::string s = surfaceString(g1, d);
        CHECK((s == "a b" || s == "a c"));
    }
    const Grammar g2 = testing::g2();
    const Corpus c2 = generateCorpus(g2, trainOnly(20, 3, 3, 9));
    for (const auto & d : c2.split(Split::Train)) CHECK(surfaceString(g2, d) == "x x x");
    CHECK(c2.report.splits[0].rejected_length > 0);
}

TEST_CASE("splits are disjoint") {
    const Grammar g1 = testing::g1();
    int seen = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CorpusSpec spec;
        spec.sentences = {1, 1, 0, 0};
        spec.seed = seed;
        const Corpus c = generateCorpus(g1, spec);
        const std::string train = surfaceString(g1, c.split(Split::Train)[0]);
        const std::string dev = surfaceString(g1, c.split(Split::Dev)[0]);
        CHECK(train != dev);
        if (train == "a b") {
            CHECK(dev == "a c");
            ++seen;
        }
    }
    CHECK(seen > 0);

    const Grammar g = richGrammar();
    CorpusSpec spec;
    spec.sentences = {300, 100, 100, 100};
    spec.min_len = 2;
    spec.max_len = 12;
    spec.seed = 5;
    const Corpus c = generateCorpus(g, spec);
    std::set<std::string> earlier;
    for (int s = 0; s < 4; ++s) {
        std::set<std::string> mine;
        for (const auto & d : c.splits[s]) {
            const std::string text = surfaceString(g, d);
            CHECK(earlier.count(text) == 0);
            mine.insert(text);
        }
        earlier.insert(mine.begin(), mine.end());
    }
}

TEST_CASE("impossible specs exhaust the budget") {
    const Grammar g1 = testing::g1();
    CorpusSpec spec;
    // 50 train sentences cover both strings, leaving nothing for dev.
    spec.sentences = {50, 1, 0, 0};
    spec.max_attempts_per_sentence = 1000;
    CHECK_THROWS_AS(generateCorpus(g1, spec), ExhaustedBudget);
    CHECK_THROWS_AS(generateCorpus(g1, trainOnly(5, 3, 3, 0)), ExhaustedBudget);
}

TEST_CASE("spec validation") {
    CorpusSpec spec;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec.sentences = {1, 0, 0, 0};
    spec.min_len = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec.min_len = 5;
    spec.max_len = 4;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec.max_len = 5;
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("output does not depend on the thread count") {
    const Grammar g = richGrammar();
    CorpusSpec spec;
    spec.sentences = {200, 50, 50, 50};
    spec.min_len = 1;
    spec.max_len = 10;
    spec.seed = 77;
    const Corpus one = generateCorpus(g, spec, 1);
    const Corpus four = generateCorpus(g, spec, 4);
    for (int s = 0; s < 4; ++s) {
        REQUIRE(one.splits[s].size() == four.splits[s].size());
        for (std::size_t i = 0; i < one.splits[s].size(); ++i) {
            CHECK(formatDerivation(g, one.splits[s][i], CorpusFormat::Trees) ==
                  formatDerivation(g, four.splits[s][i], CorpusFormat::Trees));
        }
    }
}

TEST_CASE("file formats and byte-identical reruns") {
    const Grammar g1 = testing::g1();
    CorpusSpec spec;
    spec.sentences = {20, 0, 0, 0};
    spec.seed = 7;
    const auto dir = std::filesystem::temp_directory_path() / "pcfglab_sampler_test";
    std::filesystem::remove_all(dir);
    const Corpus a = generateCorpus(g1, spec);
    const Corpus b = generateCorpus(g1, spec);
    for (auto f : {CorpusFormat::Tokens, CorpusFormat::Tagged, CorpusFormat::Trees}) {
        const auto pa = writeCorpus(g1, a, f, (dir / "a").string());
        const auto pb = writeCorpus(g1, b, f, (dir / "b").string());
        REQUIRE(pa.size() == 1);
        CHECK(slurp(pa[0]) == slurp(pb[0]));
    }
    const std::string tokens = slurp(dir / "a" / "train.txt");
    const std::string tagged = slurp(dir / "a" / "train.tagged");
    const std::string trees = slurp(dir / "a" / "train.trees");
    const std::string first = tokens.substr(0, tokens.find('\n'));
    CHECK((first == "a b" || first == "a c"));
    const std::string last = first.substr(2);
    CHECK(tagged.substr(0, tagged.find('\n')) == "a/A " + last + "/B");
    CHECK(trees.substr(0, trees.find('\n')) == "(S (A a) (B " + last + "))");
    CHECK(a.report.toJson() == b.report.toJson());
    std::filesystem::remove_all(dir);
}
