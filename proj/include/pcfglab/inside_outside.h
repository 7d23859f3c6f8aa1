#ifndef PCFGLAB_INSIDE_OUTSIDE_H_
#define PCFGLAB_INSIDE_OUTSIDE_H_

#include "pcfglab/grammar.h"
#include "pcfglab/log_math.h"

#include <span>
#include <vector>

namespace pcfglab {

// Placeholder for a masked slot: its lexical inside weight under each
// preterminal j is sum_w P(j -> w).
inline constexpr TerminalId kMaskToken{-1};

struct ChartOptions {
    // Inside items more than this many nats below the best item of their
    // cell are dropped. -inf keeps everything (exact).
    double prune_log_threshold = kLogZero;
};

// Inside/outside tables for one sentence. Spans are 0-based, half-open
// [begin, end). Each cell holds two layers per nonterminal:
//   base: the node that rewrites by a binary or lexical rule,
//   top:  the node heading a (possibly empty) unary chain over base.
// All accessors return natural-log values, kLogZero for absent entries.
class Chart {
public:
    Chart(std::size_t length, std::size_t num_nonterminals);

    std::size_t length() const { return length_; }
    std::size_t numNonterminals() const { return num_nonterminals_; }

    double inside(std::size_t begin, std::size_t end, NonterminalId a) const { return cell(begin, end).inside_top.log(a.value); }
    double insideBase(std::size_t begin, std::size_t end, NonterminalId a) const { return cell(begin, end).inside_base.log(a.value); }
    double outside(std::size_t begin, std::size_t end, NonterminalId a) const { return cell(begin, end).outside_top.log(a.value); }
    double outsideBase(std::size_t begin, std::size_t end, NonterminalId a) const { return cell(begin, end).outside_base.log(a.value); }

    // log P_G(w); kLogZero when the sentence has no parse.
    double sentenceLogp() const { return sentence_logp_; }
    bool parsed() const { return sentence_logp_ != kLogZero; }
    bool hasOutside() const { return has_outside_; }

    struct Cell {
        ScaledVector inside_base;
        ScaledVector inside_top;
        ScaledVector outside_top;
        ScaledVector outside_base;
    };

    const Cell & cell(std::size_t begin, std::size_t end) const { return cells_[begin * (length_ + 1) + end]; }
    Cell & cell(std::size_t begin, std::size_t end) { return cells_[begin * (length_ + 1) + end]; }

private:
    friend class ChartParser;

    std::size_t length_;
    std::size_t num_nonterminals_;
    std::vector<Cell> cells_;
    double sentence_logp_ = kLogZero;
    bool has_outside_ = false;
};

struct MaskedDistribution {
    std::size_t position = 0;
    std::vector<TerminalId> support;
    std::vector<double> logps;
    // log P_G(w_{\i}): probability of the context with any token in the slot.
    double context_logp = kLogZero;
};

struct PseudoLikelihood {
    double total = 0.0;
    std::vector<double> per_position;
};

// Inside-outside engine bound to one grammar. Thread-safe for concurrent
// calls; every call owns its chart.
class ChartParser {
public:
    explicit ChartParser(const Grammar & grammar, ChartOptions options = {});

    const Grammar & grammar() const { return *grammar_; }

    // Inside pass only. Tokens may contain kMaskToken.
    Chart inside(std::span<const TerminalId> tokens) const;
    // Fills the outside layers of a chart produced by inside().
    void outside(Chart & chart) const;
    Chart insideOutside(std::span<const TerminalId> tokens) const;

    // P_G(w | context) at `position` read off a chart's outside layer.
    // The outside values of a single-token span never depend on the token
    // inside it, so any chart of the sentence (masked or not) gives the
    // same distribution. Throws NoContextParse.
    MaskedDistribution maskedFromChart(const Chart & chart, std::size_t position) const;
    double maskedLogprob(const Chart & chart, std::size_t position, TerminalId word) const;

    // Runs a wildcard chart with the token at `position` masked.
    MaskedDistribution maskedDistribution(std::span<const TerminalId> tokens, std::size_t position) const;

    // sum_i ln P_G(w_i | w_{\i}) from one inside-outside pass.
    PseudoLikelihood pseudoLogLikelihood(std::span<const TerminalId> tokens) const;

private:
    void fillLexicalCell(Chart & chart, std::size_t position, TerminalId token) const;
    void applyUnaryClosure(const ScaledVector & base, ScaledVector & top) const;
    void prune(ScaledVector & v) const;

    struct BinaryEntry {
        SymbolId parent;
        SymbolId sibling;
        double prob;
    };

    const Grammar * grammar_;
    ChartOptions options_;
    // Binary rules grouped by left child: (parent, right child, prob).
    std::vector<std::size_t> by_left_offsets_;
    std::vector<BinaryEntry> by_left_;
    // Binary rules grouped by parent: (left child, right child, prob).
    std::vector<std::size_t> by_parent_offsets_;
    std::vector<std::pair<SymbolId, SymbolId>> by_parent_children_;
    std::vector<double> by_parent_prob_;
};

// Convenience wrappers constructing a transient parser.
Chart insideChart(const Grammar & grammar, std::span<const TerminalId> tokens, ChartOptions options = {});
Chart insideOutsideChart(const Grammar & grammar, std::span<const TerminalId> tokens, ChartOptions options = {});
MaskedDistribution maskedDistribution(const Grammar & grammar, std::span<const TerminalId> tokens,
                                      std::size_t position, ChartOptions options = {});
PseudoLikelihood pseudoLogLikelihood(const Grammar & grammar, std::span<const TerminalId> tokens,
                                     ChartOptions options = {});

// exp(-psi_ll / length)
double pseudoPerplexity(double pseudo_log_likelihood, std::size_t length);
// Corpus level: total psi-LL over total tokens.
double pseudoPerplexity(std::span<const PseudoLikelihood> sentences);

} // namespace pcfglab

#endif // PCFGLAB_INSIDE_OUTSIDE_H_
