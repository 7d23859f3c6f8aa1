#ifndef PCFGLAB_EARLEY_PREFIX_H_
#define PCFGLAB_EARLEY_PREFIX_H_

#include "pcfglab/grammar.h"
#include "pcfglab/log_math.h"

#include <optional>
#include <span>
#include <vector>

namespace pcfglab {

struct PrefixOptions {
    // Items whose forward mass, relative to the current prefix probability,
    // falls below this floor are dropped. 0 keeps everything (exact).
    double prune_floor = 0.0;
};

struct CausalScore {
    std::size_t position = 0;  // 0-based
    TerminalId token;
    double logp = 0.0;         // ln P_G(w_i | w_<i)
    double prefix_logp = 0.0;  // ln P_G(w_1..w_i)
};

// Result of one left-to-right pass.
struct PrefixRun {
    // conditional[i] = ln P(w_i | w_<i); prefix[i] = ln P(w_1..w_i).
    std::vector<double> conditional;
    std::vector<double> prefix;
    // First position whose prefix has zero mass; the vectors stop there.
    std::optional<std::size_t> dead_at;
    // ln P_G(w) of the whole token sequence as a complete sentence.
    double sentence_logp = kLogZero;
};

// Probabilistic Earley parser computing prefix probabilities. Prediction is
// closed over the left-corner relation and completion over unit
// productions, so left recursion and unary cycles are summed exactly.
// Forward and inner probabilities are kept rescaled by the running prefix
// probability, which makes each scan step yield P(w_i | w_<i) directly.
class PrefixParser {
public:
    explicit PrefixParser(const Grammar & grammar, PrefixOptions options = {});

    const Grammar & grammar() const { return *grammar_; }

    PrefixRun run(std::span<const TerminalId> tokens) const;

    // ln P_G(prefix); kLogZero for a dead prefix.
    double prefixLogprob(std::span<const TerminalId> prefix) const;
    // Throws DeadPrefix at the first impossible position.
    std::vector<CausalScore> causalScores(std::span<const TerminalId> tokens) const;
    // ln P_G(w) - ln P_G(prefix = w); throws DeadPrefix or NoParse.
    double completionLogprob(std::span<const TerminalId> tokens) const;

    // Left-corner closure weight R_L(from, to).
    double leftCornerClosure(NonterminalId from, NonterminalId to) const;

private:
    struct BinaryEntry {
        SymbolId parent;
        SymbolId sibling;
        double prob;
    };

    const Grammar * grammar_;
    PrefixOptions options_;
    SparseMatrix left_corner_closure_;
    std::vector<std::size_t> by_left_offsets_;
    std::vector<BinaryEntry> by_left_;
};

double prefixLogprob(const Grammar & grammar, std::span<const TerminalId> prefix);
std::vector<CausalScore> causalScores(const Grammar & grammar, std::span<const TerminalId> tokens);
double completionLogprob(const Grammar & grammar, std::span<const TerminalId> tokens);

// exp(-(sum of conditional logps) / token count).
double causalPerplexity(std::span<const CausalScore> scores);
double causalPerplexity(std::span<const std::vector<CausalScore>> corpus);

} // namespace pcfglab

#endif // PCFGLAB_EARLEY_PREFIX_H_
