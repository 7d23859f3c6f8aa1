#include "pcfglab/earley_prefix.h"

#include "pcfglab/errors.h"

#include <algorithm>
#include <cmath>

namespace pcfglab {

PrefixParser::PrefixParser(const Grammar & grammar, PrefixOptions options)
    : grammar_(&grammar), options_(options) {
    const std::size_t num_nt = grammar.numNonterminals();
    const auto rules = grammar.rules();

    // P_L(X, Y) = sum of P(X -> Y ...) over unary and binary rules.
    SparseMatrix left_corner(num_nt);
    {
        std::vector<double> row(num_nt, 0.0);
        for (std::size_t x = 0; x < num_nt; ++x) {
            std::vector<SymbolId> touched;
            for (std::uint32_t idx : grammar.rulesOf(NonterminalId{static_cast<SymbolId>(x)})) {
                const Rule & r = rules[idx];
                if (r.kind == RuleKind::Lexical) continue;
                if (row[r.left] == 0.0) touched.push_back(r.left);
                row[r.left] += r.prob;
            }
            std::sort(touched.begin(), touched.end());
            for (SymbolId y : touched) {
                left_corner[x].cols.push_back(y);
                left_corner[x].weights.push_back(row[y]);
                row[y] = 0.0;
            }
        }
    }
    left_corner_closure_ = reflexiveTransitiveClosure(left_corner);

    by_left_offsets_.assign(num_nt + 1, 0);
    for (std::size_t b = 0; b < num_nt; ++b) {
        for (std::uint32_t idx : grammar.binaryByLeft(NonterminalId{static_cast<SymbolId>(b)})) {
            by_left_.push_back({rules[idx].lhs, rules[idx].right, rules[idx].prob});
        }
        by_left_offsets_[b + 1] = by_left_.size();
    }
}

double PrefixParser::leftCornerClosure(NonterminalId from, NonterminalId to) const {
    const SparseRow & row = left_corner_closure_[from.value];
    auto it = std::lower_bound(row.cols.begin(), row.cols.end(), to.value);
    if (it == row.cols.end() || *it != to.value) return 0.0;
    return row.weights[static_cast<std::size_t>(it - row.cols.begin())];
}

namespace {

// Binary item X -> B . C with its first child complete, waiting for C.
struct ActiveItem {
    std::uint32_t start;
    SymbolId parent;
    SymbolId sibling;
    double forward;
    double inner;
};

} // namespace

PrefixRun PrefixParser::run(std::span<const TerminalId> tokens) const {
    const std::size_t n = tokens.size();
    const std::size_t num_nt = grammar_->numNonterminals();
    const SymbolId start = grammar_->start().value;
    const SparseMatrix & unit_closure = grammar_->unaryClosureMatrix();
    const auto rules = grammar_->rules();
    const double floor = options_.prune_floor;

    PrefixRun result;
    result.conditional.reserve(n);
    result.prefix.reserve(n);

    // predicted[j][Y]: forward mass of predicting Y at position j, i.e. of
    // every item j: Y -> . nu divided by P(Y -> nu).
    std::vector<std::vector<double>> predicted(n + 1);
    std::vector<std::vector<ActiveItem>> active(n + 1);
    std::vector<double> expect(num_nt, 0.0);

    auto predict = [&](std::size_t i) {
        std::fill(expect.begin(), expect.end(), 0.0);
        if (i == 0) expect[start] += 1.0;
        for (const ActiveItem & item : active[i]) expect[item.sibling] += item.forward;
        std::vector<double> & pred = predicted[i];
        pred.assign(num_nt, 0.0);
        for (std::size_t z = 0; z < num_nt; ++z) {
            const double az = expect[z];
            if (az == 0.0) continue;
            const SparseRow & row = left_corner_closure_[z];
            for (std::size_t e = 0; e < row.cols.size(); ++e) pred[row.cols[e]] += az * row.weights[e];
        }
        if (floor > 0.0) {
            for (double & p : pred) {
                if (p < floor) p = 0.0;
            }
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        if (tokens[i].value < 0 || static_cast<std::size_t>(tokens[i].value) >= grammar_->numTerminals()) {
            throw UnknownToken("terminal id " + std::to_string(tokens[i].value) + " out of range");
        }
    }

    predict(0);
    std::vector<std::vector<double>> complete;
    std::vector<double> unit_completed(num_nt);
    double prefix_logp = 0.0;
    double root_inner = 0.0;

    for (std::size_t i = 1; i <= n; ++i) {
        // Scan w_i against the lexical rules predicted at i-1.
        const std::vector<double> & pred_prev = predicted[i - 1];
        double scanned = 0.0;
        for (std::uint32_t idx : grammar_->lexicalByTerminal(tokens[i - 1])) {
            scanned += pred_prev[rules[idx].lhs] * rules[idx].prob;
        }
        if (!(scanned > 0.0)) {
            result.dead_at = i - 1;
            result.sentence_logp = kLogZero;
            return result;
        }
        const double conditional = std::log(scanned);
        prefix_logp += conditional;
        result.conditional.push_back(conditional);
        result.prefix.push_back(prefix_logp);

        // complete[j][Y]: inner mass of complete non-unit items j..i for Y.
        complete.assign(i, {});
        complete[i - 1].assign(num_nt, 0.0);
        const double inv = 1.0 / scanned;
        for (std::uint32_t idx : grammar_->lexicalByTerminal(tokens[i - 1])) {
            const Rule & r = rules[idx];
            if (pred_prev[r.lhs] > 0.0) complete[i - 1][r.lhs] += r.prob * inv;
        }

        root_inner = 0.0;
        for (std::size_t jj = i; jj-- > 0;) {
            if (complete[jj].empty()) continue;
            const std::vector<double> & done = complete[jj];

            // Close over unit productions: H[Z] = sum_Y R_U(Z, Y) done[Y].
            bool any = false;
            for (std::size_t z = 0; z < num_nt; ++z) {
                const SparseRow & row = unit_closure[z];
                double sum = 0.0;
                for (std::size_t e = 0; e < row.cols.size(); ++e) sum += row.weights[e] * done[row.cols[e]];
                unit_completed[z] = sum;
                any = any || sum != 0.0;
            }
            if (!any) continue;

            for (const ActiveItem & item : active[jj]) {
                const double h = unit_completed[item.sibling];
                if (h == 0.0) continue;
                std::vector<double> & target = complete[item.start];
                if (target.empty()) target.assign(num_nt, 0.0);
                target[item.parent] += item.inner * h;
            }

            const std::vector<double> & pred = predicted[jj];
            for (std::size_t b = 0; b < num_nt; ++b) {
                const double h = unit_completed[b];
                if (h == 0.0) continue;
                for (std::size_t e = by_left_offsets_[b]; e < by_left_offsets_[b + 1]; ++e) {
                    const BinaryEntry & entry = by_left_[e];
                    const double px = pred[entry.parent];
                    if (px == 0.0) continue;
                    const double inner = entry.prob * h;
                    const double forward = px * inner;
                    if (forward < floor) continue;
                    active[i].push_back({static_cast<std::uint32_t>(jj), entry.parent, entry.sibling, forward, inner});
                }
            }

            if (jj == 0) root_inner = unit_completed[start];
        }

        // Completed inner masses carry the 1 / P(w_i | w_<i) factor, so the
        // new active items are already relative to P(w_1..w_i).
        if (i < n) predict(i);
    }

    result.sentence_logp = root_inner > 0.0 ? std::log(root_inner) + prefix_logp : kLogZero;
    return result;
}

double PrefixParser::prefixLogprob(std::span<const TerminalId> prefix) const {
    PrefixRun r = run(prefix);
    if (r.dead_at) return kLogZero;
    return r.prefix.empty() ? 0.0 : r.prefix.back();
}

std::vector<CausalScore> PrefixParser::causalScores(std::span<const TerminalId> tokens) const {
    PrefixRun r = run(tokens);
    if (r.dead_at) {
        const std::size_t at = *r.dead_at;
        throw DeadPrefix("prefix ending at position " + std::to_string(at + 1) + " ('" +
                         grammar_->symbols().terminal(tokens[at]) + "') has probability 0");
    }
    std::vector<CausalScore> scores;
    scores.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        scores.push_back({i, tokens[i], r.conditional[i], r.prefix[i]});
    }
    return scores;
}

double PrefixParser::completionLogprob(std::span<const TerminalId> tokens) const {
    PrefixRun r = run(tokens);
    if (r.dead_at) throw DeadPrefix("sentence has a zero-probability prefix");
    if (r.sentence_logp == kLogZero) throw NoParse("sentence has no complete parse");
    const double prefix = r.prefix.empty() ? 0.0 : r.prefix.back();
    return std::min(0.0, r.sentence_logp - prefix);
}

double prefixLogprob(const Grammar & grammar, std::span<const TerminalId> prefix) {
    return PrefixParser(grammar).prefixLogprob(prefix);
}

std::vector<CausalScore> causalScores(const Grammar & grammar, std::span<const TerminalId> tokens) {
    return PrefixParser(grammar).causalScores(tokens);
}

double completionLogprob(const Grammar & grammar, std::span<const TerminalId> tokens) {
    return PrefixParser(grammar).completionLogprob(tokens);
}

double causalPerplexity(std::span<const CausalScore> scores) {
    if (scores.empty()) throw InvalidArgument("causal perplexity needs at least one scored token");
    double total = 0.0;
    for (const auto & s : scores) total += s.logp;
    return std::exp(-total / static_cast<double>(scores.size()));
}

double causalPerplexity(std::span<const std::vector<CausalScore>> corpus) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto & sentence : corpus) {
        for (const auto & s : sentence) total += s.logp;
        count += sentence.size();
    }
    if (count == 0) throw InvalidArgument("causal perplexity needs at least one scored token");
    return std::exp(-total / static_cast<double>(count));
}

} // namespace pcfglab
