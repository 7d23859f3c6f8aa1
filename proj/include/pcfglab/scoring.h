#ifndef PCFGLAB_SCORING_H_
#define PCFGLAB_SCORING_H_

#include "pcfglab/corpus_stats.h"
#include "pcfglab/grammar.h"
#include "pcfglab/score_io.h"

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace pcfglab {

struct TaggedSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;  // empty, or one gold tag per token
};

enum class CorpusInputFormat { Auto, Tokens, Tagged };

// One sentence per line, whitespace-separated. Tagged lines use token/TAG,
// split at the last '/'. Auto picks Tagged when every item of the first
// non-empty line ends in /TAG with TAG a nonterminal of `grammar`.
std::vector<TaggedSentence> parseCorpus(std::string_view text, const Grammar * grammar = nullptr,
                                        CorpusInputFormat format = CorpusInputFormat::Auto);
std::vector<TaggedSentence> readCorpus(const std::string & path, const Grammar * grammar = nullptr,
                                       CorpusInputFormat format = CorpusInputFormat::Auto);
TokenCorpus tokensOf(const std::vector<TaggedSentence> & corpus);

enum class Objective { Masked, Causal };

Objective parseObjective(const std::string & name);
const char * objectiveName(Objective objective);

struct ScoreOptions {
    Objective objective = Objective::Masked;
    std::size_t threads = 1;
    // Masked: nats below a cell's best item; causal: relative forward floor
    // exp(prune). Negative infinity (the default) computes exactly.
    double prune = -std::numeric_limits<double>::infinity();
};

struct CorpusScores {
    std::vector<ScoreRecord> records;  // ordered by (sentence_id, position)
    std::size_t sentences = 0;
    std::size_t tokens = 0;
    double total_logp = 0.0;
    // exp(-total_logp / tokens): psi-PPL for masked, PPL for causal.
    double perplexity = 0.0;
};

// Scores every token of every sentence. Unknown tokens are reported before
// any computation starts; sentences are distributed over `threads` workers
// and the output order does not depend on the thread count.
CorpusScores scoreCorpus(const Grammar & grammar, const std::vector<TaggedSentence> & corpus,
                         const ScoreOptions & options);

} // namespace pcfglab

#endif // PCFGLAB_SCORING_H_
