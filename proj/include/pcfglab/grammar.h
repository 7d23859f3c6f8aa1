#ifndef PCFGLAB_GRAMMAR_H_
#define PCFGLAB_GRAMMAR_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pcfglab {

using SymbolId = std::int32_t;

struct NonterminalId {
    SymbolId value = -1;
    friend bool operator==(NonterminalId, NonterminalId) = default;
};

struct TerminalId {
    SymbolId value = -1;
    friend bool operator==(TerminalId, TerminalId) = default;
};

// Two independent namespaces of dense ids: nonterminals and surface tokens.
class SymbolTable {
public:
    NonterminalId addNonterminal(std::string_view name);
    TerminalId addTerminal(std::string_view name);

    std::optional<NonterminalId> findNonterminal(std::string_view name) const;
    std::optional<TerminalId> findTerminal(std::string_view name) const;

    const std::string & nonterminal(NonterminalId id) const { return nonterminals_[id.value]; }
    const std::string & terminal(TerminalId id) const { return terminals_[id.value]; }

    std::size_t numNonterminals() const { return nonterminals_.size(); }
    std::size_t numTerminals() const { return terminals_.size(); }

    const std::vector<std::string> & nonterminals() const { return nonterminals_; }
    const std::vector<std::string> & terminals() const { return terminals_; }

    NonterminalId start() const { return start_; }
    void setStart(NonterminalId start) { start_ = start; }

private:
    std::vector<std::string> nonterminals_;
    std::vector<std::string> terminals_;
    std::unordered_map<std::string, SymbolId> nonterminal_index_;
    std::unordered_map<std::string, SymbolId> terminal_index_;
    NonterminalId start_;
};

enum class RuleKind { Binary, Unary, Lexical };

// One rewrite rule. `prob` keeps the decimal that was parsed so that
// serialization round-trips bit-exactly; `logp` is log(prob).
struct Rule {
    RuleKind kind = RuleKind::Lexical;
    SymbolId lhs = -1;
    SymbolId left = -1;   // first child: nonterminal, or terminal for lexical rules
    SymbolId right = -1;  // second child (binary only)
    double prob = 0.0;
    double logp = 0.0;
};

// Sparse row-major matrix of non-negative weights over nonterminals.
struct SparseRow {
    std::vector<SymbolId> cols;
    std::vector<double> weights;
};

using SparseMatrix = std::vector<SparseRow>;

// Reflexive-transitive closure (I - M)^-1 = sum_k M^k of a non-negative
// square matrix, computed by fixpoint iteration X <- I + M X.
// Throws DivergentClosure when the iteration does not settle within
// `max_iterations` (spectral radius >= 1).
SparseMatrix reflexiveTransitiveClosure(const SparseMatrix & one_step,
                                        double tolerance = 1e-12,
                                        int max_iterations = 10000);

struct ParseOptions {
    // Rules whose probability is below the floor are dropped at load time.
    double prob_floor = 0.0;
    // Rescale each LHS to sum to one after flooring.
    bool renormalize = false;
    double normalization_tolerance = 1e-6;
};

// Immutable, indexed binarized PCFG. Safe to share across threads.
class Grammar {
public:
    static Grammar fromText(std::string_view rule_text, std::string_view lexicon_text,
                            const ParseOptions & options = {});
    static Grammar fromFiles(const std::string & rule_path, const std::string & lexicon_path,
                             const ParseOptions & options = {});

    const SymbolTable & symbols() const { return symbols_; }
    NonterminalId start() const { return symbols_.start(); }
    std::size_t numNonterminals() const { return symbols_.numNonterminals(); }
    std::size_t numTerminals() const { return symbols_.numTerminals(); }

    std::span<const Rule> rules() const { return rules_; }
    std::span<const std::uint32_t> rulesOf(NonterminalId lhs) const { return by_lhs_[lhs.value]; }
    // Binary rule indices whose left child is `left`.
    std::span<const std::uint32_t> binaryByLeft(NonterminalId left) const { return binary_by_left_[left.value]; }
    std::span<const std::uint32_t> binaryByLhs(NonterminalId lhs) const { return binary_by_lhs_[lhs.value]; }
    // Lexical rule indices emitting `word`.
    std::span<const std::uint32_t> lexicalByTerminal(TerminalId word) const { return lexical_by_terminal_[word.value]; }
    std::span<const std::uint32_t> lexicalByLhs(NonterminalId lhs) const { return lexical_by_lhs_[lhs.value]; }

    std::size_t numBinary() const { return num_binary_; }
    std::size_t numUnary() const { return num_unary_; }
    std::size_t numLexical() const { return num_lexical_; }

    // Total probability of all unary chains A =>* B (1 on the empty chain).
    double unaryClosure(NonterminalId from, NonterminalId to) const;
    const SparseMatrix & unaryClosureMatrix() const { return unary_closure_; }
    // One-step unary weights U[A][B] = P(A -> B).
    const SparseMatrix & unaryMatrix() const { return unary_; }

    // Sum of P(A -> w) over all terminals w.
    double lexicalMass(NonterminalId lhs) const { return lexical_mass_[lhs.value]; }
    bool isPreterminal(NonterminalId id) const { return lexical_mass_[id.value] > 0.0; }

    std::optional<TerminalId> terminal(std::string_view token) const { return symbols_.findTerminal(token); }
    std::optional<NonterminalId> nonterminal(std::string_view name) const { return symbols_.findNonterminal(name); }

    // Maps surface tokens to ids; throws UnknownToken.
    std::vector<TerminalId> encode(std::span<const std::string> tokens) const;

    // Text in the same format accepted by fromText, bit-exact on re-parse.
    std::string ruleText() const;
    std::string lexiconText() const;

private:
    Grammar() = default;
    void index();

    SymbolTable symbols_;
    std::vector<Rule> rules_;
    std::size_t num_binary_ = 0;
    std::size_t num_unary_ = 0;
    std::size_t num_lexical_ = 0;

    std::vector<std::vector<std::uint32_t>> by_lhs_;
    std::vector<std::vector<std::uint32_t>> binary_by_left_;
    std::vector<std::vector<std::uint32_t>> binary_by_lhs_;
    std::vector<std::vector<std::uint32_t>> lexical_by_terminal_;
    std::vector<std::vector<std::uint32_t>> lexical_by_lhs_;
    std::vector<double> lexical_mass_;
    SparseMatrix unary_;
    SparseMatrix unary_closure_;
};

struct VocabularyEntry {
    std::string token;
    double mass = 0.0;
};

// Every terminal once, in id order, with the summed probability of the
// lexical rules that emit it.
std::vector<VocabularyEntry> vocabulary(const Grammar & grammar);

} // namespace pcfglab

#endif // PCFGLAB_GRAMMAR_H_
