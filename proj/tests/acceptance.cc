// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include "pcfglab/corpus_stats.h"
#include "pcfglab/earley_prefix.h"
#include "pcfglab/inside_outside.h"
#include "pcfglab/lm_compare.h"
#include "pcfglab/sampler.h"
#include "pcfglab/scoring.h"
#include "support.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>

using namespace pcfglab;

namespace {

using Clock = std::chrono::steady_clock;

struct Fixture {
    std::string name;
    Grammar grammar;
    std::vector<std::vector<TerminalId>> sentences;
};

double seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

int failures = 0;

void report(const char * name, bool pass, const std::string & detail) {
    std::printf("%s [%s] %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char * f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// G1, G2, G3 and 20 random proper grammars of at most 30 rules, with 50
// sampled sentences each.
std::vector<Fixture> standardFixtures() {
    std::vector<Fixture> out;
    out.push_back({"G1", testing::g1(), {}});
    out.push_back({"G2", testing::g2(), {}});
    out.push_back({"G3", testing::g3(), {}});
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 20; ++k) {
        testing::RandomGrammarOptions o;
        o.nonterminals = 4 + static_cast<int>(rng() % 3);
        o.terminals = 3 + static_cast<int>(rng() % 3);
        o.binary_mass = 0.3 + 0.1 * static_cast<double>(rng() % 3);
        o.unary_mass = 0.15;
        o.max_rules = 30;
        const auto text = testing::randomGrammar(rng, o);
        out.push_back({"R" + std::to_string(k), Grammar::fromText(text.rules, text.lexicon), {}});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].sentences = testing::sampleSentences(out[i].grammar, 50, 1000 + i, 1, 12);
    }
    return out;
}

// Grammars of at most 20 rules whose strings beyond length 8 carry less
// than 1e-9 of the probability mass.
std::vector<Fixture> enumerableFixtures() {
    std::vector<Fixture> out;
    out.push_back({"G1", testing::g1(), {}});
    out.push_back({"G3", testing::g3(), {}});
    std::mt19937_64 rng(77);
    while (out.size() < 22) {
        testing::RandomGrammarOptions o;
        o.nonterminals = 3 + static_cast<int>(rng() % 2);
        o.terminals = 3;
        o.binary_mass = 0.02;
        o.unary_mass = 0.2 + 0.1 * static_cast<double>(rng() % 3);
        o.max_rules = 20;
        const auto text = testing::randomGrammar(rng, o);
        Grammar g = Grammar::fromText(text.rules, text.lexicon);
        // Only grammars whose strings beyond length 8 are negligible.
        if (testing::StringEnumeration(g, 8).tail() >= 1e-9) continue;
        out.push_back({"L" + std::to_string(out.size() - 2), std::move(g), {}});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].sentences = testing::sampleSentences(out[i].grammar, 20, 500 + i, 1, 8);
    }
    return out;
}

void maskedNormalization(const std::vector<Fixture> & fixtures) {
    const auto start = Clock::now();
    double worst = 0.0;
    std::size_t positions = 0;
    for (const Fixture & f : fixtures) {
        const ChartParser parser(f.grammar);
        for (const auto & s : f.sentences) {
            const Chart chart = parser.insideOutside(s);
            for (std::size_t i = 0; i < s.size(); ++i) {
                double mass = 0.0;
                for (double lp : parser.maskedFromChart(chart, i).logps) mass += std::exp(lp);
                worst = std::max(worst, std::abs(mass - 1.0));
                ++positions;
            }
        }
    }
    const double t = seconds(start);
    report("masked normalization", worst <= 1e-9 && t < 10.0,
           fmt("%zu positions over %zu grammars, max |sum-1| = %.3g, %.2f s", positions, fixtures.size(), worst, t));
}

void insideOutsideIdentity(const std::vector<Fixture> & fixtures) {
    double worst = 0.0;
    std::size_t positions = 0;
    for (const Fixture & f : fixtures) {
        const ChartParser parser(f.grammar);
        for (const auto & s : f.sentences) {
            const Chart chart = parser.insideOutside(s);
            for (std::size_t i = 0; i < s.size(); ++i) {
                std::vector<double> terms;
                for (std::size_t j = 0; j < f.grammar.numNonterminals(); ++j) {
                    const NonterminalId id{static_cast<SymbolId>(j)};
                    terms.push_back(chart.outsideBase(i, i + 1, id) + chart.insideBase(i, i + 1, id));
                }
                // Relative error of the probabilities.
                worst = std::max(worst, std::abs(std::expm1(logSumExp(terms) - chart.sentenceLogp())));
                ++positions;
            }
        }
    }
    report("inside-outside identity", worst <= 1e-9,
           fmt("%zu positions, max relative error %.3g", positions, worst));
}

void oracleEquivalence(const std::vector<Fixture> & standard, const std::vector<Fixture> & enumerable) {
    const auto start = Clock::now();
    double worst_masked = 0.0;
    std::size_t masked_checks = 0;
    std::size_t small_grammars = 0;
    auto check_masked = [&](const Fixture & f) {
        if (f.grammar.rules().size() > 20) return;
        ++small_grammars;
        const ChartParser parser(f.grammar);
        for (const auto & s : f.sentences) {
            for (std::size_t i = 0; i < s.size(); ++i) {
                const auto want = testing::bruteMasked(f.grammar, testing::ids(s), i);
                const auto got = parser.maskedDistribution(s, i);
                std::vector<double> dense(f.grammar.numTerminals(), 0.0);
                for (std::size_t k = 0; k < got.support.size(); ++k) dense[got.support[k].value] = std::exp(got.logps[k]);
                for (std::size_t v = 0; v < dense.size(); ++v) worst_masked = std::max(worst_masked, std::abs(dense[v] - want[v]));
                ++masked_checks;
            }
        }
    };
    for (const Fixture & f : standard) check_masked(f);
    for (const Fixture & f : enumerable) check_masked(f);

    // Prefix probabilities of every string of length <= 4 over each
    // grammar's vocabulary, against enumeration to length 8.
    double worst_prefix = 0.0;
    double worst_tail = 0.0;
    std::size_t prefix_checks = 0;
    for (const Fixture & f : enumerable) {
        const testing::StringEnumeration strings(f.grammar, 8);
        worst_tail = std::max(worst_tail, strings.tail());
        const PrefixParser parser(f.grammar);
        const std::size_t v = f.grammar.numTerminals();
        std::vector<int> prefix;
        std::function<void()> visit = [&] {
            if (!prefix.empty()) {
                const double want = strings.prefixMass(f.grammar.start().value, prefix);
                std::vector<TerminalId> ids;
                for (int t : prefix) ids.push_back(TerminalId{t});
                const double got = std::exp(parser.prefixLogprob(ids));
                // The true value lies in [want, want + tail].
                const double err = got < want ? want - got : std::max(0.0, got - want - strings.tail());
                // Relative for live prefixes, absolute for dead ones.
                worst_prefix = std::max(worst_prefix, want > 0.0 ? err / want : err);
                ++prefix_checks;
            }
            if (prefix.size() == 4) return;
            for (std::size_t t = 0; t < v; ++t) {
                prefix.push_back(static_cast<int>(t));
                visit();
                prefix.pop_back();
            }
        };
        visit();
    }
    // G2: every string is x^n, so P(prefix x^k) = 1 - sum_{n<k} P(x^n), a
    // finite enumeration with no tail.
    const Grammar g2 = testing::g2();
    const PrefixParser g2_parser(g2);
    for (std::size_t k = 1; k <= 12; ++k) {
        double below = 0.0;
        for (std::size_t n = 1; n < k; ++n) below += testing::bruteSentenceProb(g2, std::vector<int>(n, 0));
        const double want = 1.0 - below;
        const double got = std::exp(g2_parser.prefixLogprob(std::vector<TerminalId>(k, TerminalId{0})));
        worst_prefix = std::max(worst_prefix, std::abs(got - want) / want);
        ++prefix_checks;
    }
    const double t = seconds(start);
    const bool pass = worst_masked <= 1e-6 && worst_prefix <= 1e-6 && worst_tail < 1e-9 && t < 60.0;
    report("oracle equivalence", pass,
           fmt("masked: %zu positions on %zu grammars, max abs err %.3g; prefix: %zu prefixes, max rel err %.3g, "
               "max tail %.3g; %.2f s",
               masked_checks, small_grammars, worst_masked, prefix_checks, worst_prefix, worst_tail, t));
}

void chainIdentity(const std::vector<Fixture> & fixtures) {
    double worst_chain = 0.0;
    double worst_bound = 0.0;
    std::size_t sentences = 0;
    for (const Fixture & f : fixtures) {
        const PrefixParser parser(f.grammar);
        const ChartParser chart(f.grammar);
        for (const auto & s : f.sentences) {
            double sum = 0.0;
            for (const auto & c : parser.causalScores(s)) sum += c.logp;
            const double prefix = parser.prefixLogprob(s);
            worst_chain = std::max(worst_chain, std::abs(sum - prefix));
            const double inside = chart.inside(s).sentenceLogp();
            worst_bound = std::max(worst_bound, inside - prefix);
            ++sentences;
        }
    }
    report("chain identity", worst_chain <= 1e-9 && worst_bound <= 1e-12,
           fmt("%zu sentences, max |sum cond - prefix| = %.3g, max (inside - prefix) = %.3g", sentences, worst_chain,
               worst_bound));
}

void samplerConsistency() {
    const Grammar g1 = testing::g1();
    CorpusSpec spec;
    spec.sentences = {100000, 0, 0, 0};
    spec.min_len = 1;
    spec.max_len = 1000;
    spec.seed = 314;
    std::map<std::string, double> freq;
    const Corpus g1_corpus = generateCorpus(g1, spec);
    for (const auto & d : g1_corpus.split(Split::Train)) freq[surfaceString(g1, d)] += 1e-5;
    std::map<std::string, double> exact_g1;
    const testing::StringEnumeration g1_strings(g1, 2);
    for (const char * s : {"a b", "a c"}) {
        const std::vector<std::string> words{"a", std::string(1, s[2])};
        exact_g1[s] = g1_strings.prob(g1.start().value, testing::ids(g1.encode(words)));
    }
    double l1_g1 = 0.0;
    for (const auto & [s, p] : freq) l1_g1 += std::abs(p - (exact_g1.count(s) ? exact_g1[s] : 0.0));
    for (const auto & [s, p] : exact_g1) l1_g1 += freq.count(s) ? 0.0 : p;

    const Grammar g2 = testing::g2();
    spec.min_len = 1;
    spec.max_len = 3;
    spec.seed = 2718;
    std::map<std::size_t, double> by_len;
    const Corpus g2_corpus = generateCorpus(g2, spec);
    for (const auto & d : g2_corpus.split(Split::Train)) by_len[d.tokens.size()] += 1e-5;
    const testing::StringEnumeration g2_strings(g2, 3);
    std::vector<double> exact(4, 0.0);
    double z = 0.0;
    for (std::size_t n = 1; n <= 3; ++n) z += exact[n] = g2_strings.prob(0, std::vector<int>(n, 0));
    double l1_g2 = 0.0;
    for (std::size_t n = 1; n <= 3; ++n) l1_g2 += std::abs(by_len[n] - exact[n] / z);
    report("sampler consistency", l1_g1 < 0.01 && l1_g2 < 0.01 && by_len.size() == 3,
           fmt("G1 L1 = %.4g over 100k; G2 [1,3] L1 = %.4g over 100k (exact %.5f %.5f %.5f)", l1_g1, l1_g2,
               exact[1] / z, exact[2] / z, exact[3] / z));
}

void gibbsCheck() {
    const Grammar truth = testing::g2();
    CorpusSpec spec;
    spec.sentences = {10000, 0, 0, 0};
    spec.min_len = 1;
    spec.max_len = 100000;
    spec.seed = 99;
    const Corpus corpus = generateCorpus(truth, spec);
    const auto & sentences = corpus.split(Split::Train);
    std::size_t tokens = 0;
    for (const auto & d : sentences) tokens += d.tokens.size();

    // Corpus perplexity from full-sentence probabilities.
    auto corpus_ppl = [&](const Grammar & g) {
        const ChartParser parser(g);
        double total = 0.0;
        for (const auto & d : sentences) total += parser.inside(d.tokens).sentenceLogp();
        return std::exp(-total / static_cast<double>(tokens));
    };
    const double base = corpus_ppl(truth);

    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int wins = 0;
    double closest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
        const double a = 0.3 * std::exp2(u(rng));
        const double b = 0.7 * std::exp2(u(rng));
        const Grammar perturbed = Grammar::fromText("S -> S S " + testing::formatProb(a / (a + b)) + "\n",
                                                    "S x " + testing::formatProb(b / (a + b)) + "\n");
        const double ppl = corpus_ppl(perturbed);
        wins += ppl > base;
        closest = std::min(closest, ppl - base);
    }
    report("lower-bound optimality", wins == 10,
           fmt("%d/10 perturbations worse; true-grammar PPL %.6f over %zu tokens, smallest gap %.3g", wins, base,
               tokens, closest));
}

void zipfRecovery() {
    const auto start = Clock::now();
    int ok = 0;
    std::string fits;
    std::vector<double> w;
    for (int r = 1; r <= 1000; ++r) w.push_back(std::pow(r + 2.0, -1.5));
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::discrete_distribution<int> dist(w.begin(), w.end());
        std::mt19937_64 rng(seed);
        std::vector<std::uint64_t> counts(1000, 0);
        for (int k = 0; k < 200000; ++k) ++counts[dist(rng)];
        std::vector<RankFrequency> table;
        for (int r = 0; r < 1000; ++r) table.push_back({"w" + std::to_string(r), std::uint64_t(r + 1), counts[r]});
        const ZipfFit fit = fitZipfMandelbrot(table);
        ok += std::abs(fit.alpha - 1.5) <= 0.1 && std::abs(fit.beta - 2.0) <= 0.5;
        fits += fmt(" (%.3f, %.3f)", fit.alpha, fit.beta);
    }
    const double t = seconds(start);
    report("Zipf recovery", ok == 5 && t < 30.0, fmt("%d/5 seeds within tolerance; (alpha, beta):%s; %.2f s", ok,
                                                     fits.c_str(), t));
}

void relativePerplexityArithmetic() {
    const double masked = relativePerplexity(71.1, 63.9).ratio;
    const double causal = relativePerplexity(192.8, 183.1).ratio;
    report("relative perplexity", std::abs(masked - 1.1127) <= 1e-4 && std::abs(causal - 1.0530) <= 1e-4,
           fmt("71.1/63.9 = %.5f, 192.8/183.1 = %.5f", masked, causal));
}

// About 1,000 rules: 30 phrase symbols with 16 binary rules each, 20 unary
// rules, and 20 preterminals with 25 words each.
testing::GrammarText scaleGrammar() {
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> unit(0.2, 1.0);
    const int phrases = 30;
    const int tags = 20;
    auto child = [&] {
        // Mostly preterminals keeps the expected number of phrase children
        // per expansion below one.
        if (rng() % 100 < 30) return "P" + std::to_string(rng() % phrases);
        return "T" + std::to_string(rng() % tags);
    };
    testing::GrammarText text;
    text.rules = "!start P0\n";
    for (int p = 0; p < phrases; ++p) {
        std::vector<std::pair<std::string, std::string>> pairs;
        while (pairs.size() < 16) {
            std::pair<std::string, std::string> c{child(), child()};
            if (std::find(pairs.begin(), pairs.end(), c) == pairs.end()) pairs.push_back(c);
        }
        const bool unary = p < 20;
        std::vector<double> w(pairs.size() + unary);
        double z = 0.0;
        for (double & x : w) z += (x = unit(rng));
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            text.rules += "P" + std::to_string(p) + " -> " + pairs[k].first + " " + pairs[k].second + " " +
                          testing::formatProb(w[k] / z) + "\n";
        }
        if (unary) text.rules += "P" + std::to_string(p) + " -> T" + std::to_string(p % tags) + " " +
                                 testing::formatProb(w.back() / z) + "\n";
    }
    for (int t = 0; t < tags; ++t) {
        std::vector<double> w(25);
        double z = 0.0;
        for (double & x : w) z += (x = unit(rng));
        for (int k = 0; k < 25; ++k) {
            text.lexicon += "T" + std::to_string(t) + " w" + std::to_string(t * 25 + k) + " " +
                            testing::formatProb(w[k] / z) + "\n";
        }
    }
    return text;
}

void scaleSmoke() {
    const auto text = scaleGrammar();
    const Grammar g = Grammar::fromText(text.rules, text.lexicon);
    CorpusSpec spec;
    spec.sentences = {10000, 0, 0, 0};
    spec.min_len = 6;
    spec.max_len = 25;
    spec.seed = 8;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const Corpus corpus = generateCorpus(g, spec, hw);
    std::vector<TaggedSentence> sentences;
    std::size_t tokens = 0;
    for (const auto & d : corpus.split(Split::Train)) {
        TaggedSentence s;
        for (TerminalId t : d.tokens) s.tokens.push_back(g.symbols().terminal(t));
        tokens += s.tokens.size();
        sentences.push_back(std::move(s));
    }

    const auto start = Clock::now();
    ScoreOptions o;
    o.threads = hw;
    o.objective = Objective::Masked;
    const CorpusScores masked = scoreCorpus(g, sentences, o);
    const double t_masked = seconds(start);
    o.objective = Objective::Causal;
    const CorpusScores causal = scoreCorpus(g, sentences, o);
    const double t_total = seconds(start);
    const bool complete = masked.records.size() == tokens && causal.records.size() == tokens;
    report("scale smoke test", complete && t_total < 300.0,
           fmt("%zu rules, %zu sentences, %zu tokens, %u threads: masked %.1f s (psi-PPL %.3f), causal %.1f s "
               "(PPL %.3f), total %.1f s",
               g.rules().size(), sentences.size(), tokens, hw, t_masked, masked.perplexity, t_total - t_masked,
               causal.perplexity, t_total));
}

} // namespace

int main() {
    const auto standard = standardFixtures();
    const auto enumerable = enumerableFixtures();
    const std::pair<const char *, std::function<void()>> steps[] = {
        {"masked normalization", [&] { maskedNormalization(standard); }},
        {"inside-outside identity", [&] { insideOutsideIdentity(standard); }},
        {"oracle equivalence", [&] { oracleEquivalence(standard, enumerable); }},
        {"chain identity", [&] { chainIdentity(standard); }},
        {"sampler consistency", samplerConsistency},
        {"lower-bound optimality", gibbsCheck},
        {"Zipf recovery", zipfRecovery},
        {"relative perplexity", relativePerplexityArithmetic},
        {"scale smoke test", scaleSmoke},
    };
    for (const auto & [name, step] : steps) {
        try {
            step();
        } catch (const std::exception & e) {
            report(name, false, std::string("error: ") + e.what());
        }
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
