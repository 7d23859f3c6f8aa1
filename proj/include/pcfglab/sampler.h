#ifndef PCFGLAB_SAMPLER_H_
#define PCFGLAB_SAMPLER_H_

#include "pcfglab/grammar.h"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pcfglab {

// Parse tree node. Leaves carry a terminal id, inner nodes a nonterminal.
struct TreeNode {
    SymbolId symbol = -1;
    bool terminal = false;
    std::vector<std::uint32_t> children;
};

struct Derivation {
    std::vector<TerminalId> tokens;
    std::vector<NonterminalId> tags;  // preterminal above each token
    std::vector<TreeNode> tree;       // tree[0] is the root
    double logp = 0.0;                // sum of the logp of every rule used
};

enum class SampleStatus { Ok, DepthCap, TooLong };

struct SampleOutcome {
    SampleStatus status = SampleStatus::Ok;
    std::optional<Derivation> derivation;
};

inline constexpr std::size_t kDefaultMaxExpansions = 10000;

// Draws rules top-down with their conditional probabilities. A derivation
// exceeding `max_expansions` rule applications is reported as DepthCap;
// one exceeding `max_tokens` is abandoned early as TooLong.
class Sampler {
public:
    explicit Sampler(const Grammar & grammar);

    SampleOutcome sample(std::mt19937_64 & rng, std::size_t max_expansions = kDefaultMaxExpansions,
                         std::size_t max_tokens = std::numeric_limits<std::size_t>::max()) const;

    const Grammar & grammar() const { return *grammar_; }

private:
    std::uint32_t chooseRule(NonterminalId lhs, double u) const;

    const Grammar * grammar_;
    std::vector<std::vector<double>> cumulative_;
};

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniformUnit(std::mt19937_64 & rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Independent stream for (seed, split, index).
std::mt19937_64 derivedStream(std::uint64_t seed, std::uint64_t split, std::uint64_t index);

// Single draw; nullopt means Rejected(DepthCap).
std::optional<Derivation> sampleDerivation(const Grammar & grammar, std::mt19937_64 & rng,
                                           std::size_t max_expansions = kDefaultMaxExpansions);

enum class Split { Train = 0, Dev = 1, Test = 2, Eval = 3 };
inline constexpr std::array<const char *, 4> kSplitNames = {"train", "dev", "test", "eval"};

struct CorpusSpec {
    std::array<std::size_t, 4> sentences = {0, 0, 0, 0};  // train, dev, test, eval
    std::size_t min_len = 1;
    std::size_t max_len = 25;
    std::uint64_t seed = 0;
    std::size_t max_rule_expansions = kDefaultMaxExpansions;
    // Draws allowed per requested sentence before giving up.
    std::size_t max_attempts_per_sentence = 100000;

    void validate() const;
};

struct SplitReport {
    std::size_t requested = 0;
    std::size_t generated = 0;
    std::size_t attempts = 0;
    std::size_t rejected_length = 0;
    std::size_t rejected_depth = 0;
    std::size_t rejected_collision = 0;
};

struct GenerationReport {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t min_len = 0;
    std::size_t max_len = 0;
    std::array<SplitReport, 4> splits;

    std::string toJson() const;
};

struct Corpus {
    std::array<std::vector<Derivation>, 4> splits;
    GenerationReport report;

    const std::vector<Derivation> & split(Split s) const { return splits[static_cast<int>(s)]; }
};

// Splits are generated in order train, dev, test, eval; a sentence whose
// surface string already occurs in an earlier split is rejected. Each
// sentence index owns a derived random stream, so the result does not
// depend on `threads`. Throws ExhaustedBudget.
Corpus generateCorpus(const Grammar & grammar, const CorpusSpec & spec, std::size_t threads = 1);

enum class CorpusFormat { Tokens, Tagged, Trees };

CorpusFormat parseCorpusFormat(const std::string & name);

std::string surfaceString(const Grammar & grammar, const Derivation & d);
std::string formatDerivation(const Grammar & grammar, const Derivation & d, CorpusFormat format);

// Writes <dir>/<split>.<ext> for every non-empty split and returns the paths.
std::vector<std::string> writeCorpus(const Grammar & grammar, const Corpus & corpus, CorpusFormat format,
                                     const std::string & directory);

} // namespace pcfglab

#endif // PCFGLAB_SAMPLER_H_
