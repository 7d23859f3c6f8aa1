#include "pcfglab/inside_outside.h"

#include "pcfglab/errors.h"

#include <algorithm>
#include <cmath>

namespace pcfglab {

Chart::Chart(std::size_t length, std::size_t num_nonterminals)
    : length_(length), num_nonterminals_(num_nonterminals), cells_((length + 1) * (length + 1)) {
    for (std::size_t begin = 0; begin < length; ++begin) {
        for (std::size_t end = begin + 1; end <= length; ++end) {
            Cell & c = cell(begin, end);
            c.inside_base = ScaledVector(num_nonterminals);
            c.inside_top = ScaledVector(num_nonterminals);
            c.outside_top = ScaledVector(num_nonterminals);
            c.outside_base = ScaledVector(num_nonterminals);
        }
    }
}

ChartParser::ChartParser(const Grammar & grammar, ChartOptions options)
    : grammar_(&grammar), options_(options) {
    const std::size_t num_nt = grammar.numNonterminals();
    const auto rules = grammar.rules();

    by_left_offsets_.assign(num_nt + 1, 0);
    by_parent_offsets_.assign(num_nt + 1, 0);
    for (std::size_t a = 0; a < num_nt; ++a) {
        NonterminalId id{static_cast<SymbolId>(a)};
        for (std::uint32_t idx : grammar.binaryByLeft(id)) {
            by_left_.push_back({rules[idx].lhs, rules[idx].right, rules[idx].prob});
        }
        by_left_offsets_[a + 1] = by_left_.size();
        for (std::uint32_t idx : grammar.binaryByLhs(id)) {
            by_parent_children_.emplace_back(rules[idx].left, rules[idx].right);
            by_parent_prob_.push_back(rules[idx].prob);
        }
        by_parent_offsets_[a + 1] = by_parent_children_.size();
    }
}

void ChartParser::prune(ScaledVector & v) const {
    if (options_.prune_log_threshold == kLogZero || v.empty()) return;
    // normalize() has put the best entry at 1.
    const double floor = std::exp(options_.prune_log_threshold);
    for (double & x : v.linear) {
        if (x < floor) x = 0.0;
    }
}

void ChartParser::applyUnaryClosure(const ScaledVector & base, ScaledVector & top) const {
    if (base.empty()) {
        top.clear();
        return;
    }
    const SparseMatrix & closure = grammar_->unaryClosureMatrix();
    for (std::size_t a = 0; a < closure.size(); ++a) {
        const SparseRow & row = closure[a];
        double sum = 0.0;
        for (std::size_t e = 0; e < row.cols.size(); ++e) sum += row.weights[e] * base.linear[row.cols[e]];
        top.linear[a] = sum;
    }
    top.scale = base.scale;
    top.normalize();
}

void ChartParser::fillLexicalCell(Chart & chart, std::size_t position, TerminalId token) const {
    ScaledVector & base = chart.cell(position, position + 1).inside_base;
    std::fill(base.linear.begin(), base.linear.end(), 0.0);
    if (token == kMaskToken) {
        for (std::size_t a = 0; a < chart.numNonterminals(); ++a) {
            base.linear[a] = grammar_->lexicalMass(NonterminalId{static_cast<SymbolId>(a)});
        }
    } else {
        if (token.value < 0 || static_cast<std::size_t>(token.value) >= grammar_->numTerminals()) {
            throw UnknownToken("terminal id " + std::to_string(token.value) + " out of range");
        }
        const auto rules = grammar_->rules();
        for (std::uint32_t idx : grammar_->lexicalByTerminal(token)) {
            base.linear[rules[idx].lhs] += rules[idx].prob;
        }
    }
    base.scale = 0.0;
    base.normalize();
    prune(base);
}

Chart ChartParser::inside(std::span<const TerminalId> tokens) const {
    const std::size_t n = tokens.size();
    const std::size_t num_nt = grammar_->numNonterminals();
    Chart chart(n, num_nt);
    if (n == 0) return chart;

    for (std::size_t i = 0; i < n; ++i) {
        fillLexicalCell(chart, i, tokens[i]);
        Chart::Cell & c = chart.cell(i, i + 1);
        applyUnaryClosure(c.inside_base, c.inside_top);
    }

    std::vector<double> split_scale(n);
    for (std::size_t len = 2; len <= n; ++len) {
        for (std::size_t begin = 0; begin + len <= n; ++begin) {
            const std::size_t end = begin + len;
            Chart::Cell & target = chart.cell(begin, end);

            double reference = kLogZero;
            for (std::size_t mid = begin + 1; mid < end; ++mid) {
                const double s = chart.cell(begin, mid).inside_top.scale + chart.cell(mid, end).inside_top.scale;
                split_scale[mid - begin] = s;
                reference = std::max(reference, s);
            }
            if (reference == kLogZero) {
                target.inside_base.clear();
                target.inside_top.clear();
                continue;
            }

            std::vector<double> & total = target.inside_base.linear;
            for (std::size_t mid = begin + 1; mid < end; ++mid) {
                const double s = split_scale[mid - begin];
                if (s == kLogZero) continue;
                const double factor = std::exp(s - reference);
                if (factor == 0.0) continue;
                const std::vector<double> & left = chart.cell(begin, mid).inside_top.linear;
                const std::vector<double> & right = chart.cell(mid, end).inside_top.linear;
                for (std::size_t b = 0; b < num_nt; ++b) {
                    const double lb = left[b];
                    if (lb == 0.0) continue;
                    const double weight = lb * factor;
                    for (std::size_t e = by_left_offsets_[b]; e < by_left_offsets_[b + 1]; ++e) {
                        const BinaryEntry & entry = by_left_[e];
                        const double rc = right[entry.sibling];
                        if (rc != 0.0) total[entry.parent] += entry.prob * weight * rc;
                    }
                }
            }
            target.inside_base.scale = reference;
            target.inside_base.normalize();
            prune(target.inside_base);
            applyUnaryClosure(target.inside_base, target.inside_top);
        }
    }

    chart.sentence_logp_ = chart.cell(0, n).inside_top.log(grammar_->start().value);
    return chart;
}

void ChartParser::outside(Chart & chart) const {
    const std::size_t n = chart.length();
    const std::size_t num_nt = chart.numNonterminals();
    chart.has_outside_ = true;
    if (n == 0) return;

    for (std::size_t begin = 0; begin < n; ++begin) {
        for (std::size_t end = begin + 1; end <= n; ++end) {
            chart.cell(begin, end).outside_top.clear();
            chart.cell(begin, end).outside_base.clear();
        }
    }
    {
        ScaledVector & root = chart.cell(0, n).outside_top;
        root.linear[grammar_->start().value] = 1.0;
        root.scale = 0.0;
    }

    const SparseMatrix & closure = grammar_->unaryClosureMatrix();
    std::vector<double> to_left(num_nt);
    std::vector<double> to_right(num_nt);

    for (std::size_t len = n; len >= 1; --len) {
        for (std::size_t begin = 0; begin + len <= n; ++begin) {
            const std::size_t end = begin + len;
            Chart::Cell & c = chart.cell(begin, end);
            c.outside_top.normalize();
            if (c.outside_top.empty()) continue;

            // outside_base[B] = sum_A outside_top[A] * closure[A][B]
            ScaledVector & base = c.outside_base;
            std::fill(base.linear.begin(), base.linear.end(), 0.0);
            for (std::size_t a = 0; a < num_nt; ++a) {
                const double oa = c.outside_top.linear[a];
                if (oa == 0.0) continue;
                const SparseRow & row = closure[a];
                for (std::size_t e = 0; e < row.cols.size(); ++e) base.linear[row.cols[e]] += oa * row.weights[e];
            }
            base.scale = c.outside_top.scale;
            base.normalize();
            if (len == 1 || base.empty()) continue;

            for (std::size_t mid = begin + 1; mid < end; ++mid) {
                const ScaledVector & left_inside = chart.cell(begin, mid).inside_top;
                const ScaledVector & right_inside = chart.cell(mid, end).inside_top;
                const bool feed_left = !right_inside.empty();
                const bool feed_right = !left_inside.empty();
                if (!feed_left && !feed_right) continue;
                std::fill(to_left.begin(), to_left.end(), 0.0);
                std::fill(to_right.begin(), to_right.end(), 0.0);
                for (std::size_t a = 0; a < num_nt; ++a) {
                    const double oa = base.linear[a];
                    if (oa == 0.0) continue;
                    for (std::size_t e = by_parent_offsets_[a]; e < by_parent_offsets_[a + 1]; ++e) {
                        const auto [b, cc] = by_parent_children_[e];
                        const double w = oa * by_parent_prob_[e];
                        if (feed_left) to_left[b] += w * right_inside.linear[cc];
                        if (feed_right) to_right[cc] += w * left_inside.linear[b];
                    }
                }
                if (feed_left) chart.cell(begin, mid).outside_top.accumulate(to_left, base.scale + right_inside.scale);
                if (feed_right) chart.cell(mid, end).outside_top.accumulate(to_right, base.scale + left_inside.scale);
            }
        }
    }
}

Chart ChartParser::insideOutside(std::span<const TerminalId> tokens) const {
    Chart chart = inside(tokens);
    outside(chart);
    return chart;
}

MaskedDistribution ChartParser::maskedFromChart(const Chart & chart, std::size_t position) const {
    if (position >= chart.length()) throw InvalidArgument("mask position out of range");
    if (!chart.hasOutside()) throw InvalidArgument("chart has no outside layer");
    const ScaledVector & alpha = chart.cell(position, position + 1).outside_base;

    MaskedDistribution result;
    result.position = position;
    std::vector<double> mass(grammar_->numTerminals(), 0.0);
    double normalizer = 0.0;
    if (!alpha.empty()) {
        const auto rules = grammar_->rules();
        for (std::size_t j = 0; j < chart.numNonterminals(); ++j) {
            const double aj = alpha.linear[j];
            if (aj == 0.0) continue;
            for (std::uint32_t idx : grammar_->lexicalByLhs(NonterminalId{static_cast<SymbolId>(j)})) {
                const double m = aj * rules[idx].prob;
                mass[rules[idx].left] += m;
                normalizer += m;
            }
        }
    }
    if (!(normalizer > 0.0)) {
        throw NoContextParse("no token at position " + std::to_string(position + 1) + " yields a parse");
    }
    const double log_normalizer = std::log(normalizer);
    for (std::size_t w = 0; w < mass.size(); ++w) {
        if (mass[w] <= 0.0) continue;
        result.support.push_back(TerminalId{static_cast<SymbolId>(w)});
        result.logps.push_back(std::log(mass[w]) - log_normalizer);
    }
    result.context_logp = log_normalizer + alpha.scale;
    return result;
}

double ChartParser::maskedLogprob(const Chart & chart, std::size_t position, TerminalId word) const {
    if (position >= chart.length()) throw InvalidArgument("mask position out of range");
    if (!chart.hasOutside()) throw InvalidArgument("chart has no outside layer");
    const ScaledVector & alpha = chart.cell(position, position + 1).outside_base;
    if (alpha.empty()) {
        throw NoContextParse("no token at position " + std::to_string(position + 1) + " yields a parse");
    }
    double normalizer = 0.0;
    for (std::size_t j = 0; j < chart.numNonterminals(); ++j) {
        const double aj = alpha.linear[j];
        if (aj != 0.0) normalizer += aj * grammar_->lexicalMass(NonterminalId{static_cast<SymbolId>(j)});
    }
    if (!(normalizer > 0.0)) {
        throw NoContextParse("no token at position " + std::to_string(position + 1) + " yields a parse");
    }
    double numerator = 0.0;
    const auto rules = grammar_->rules();
    for (std::uint32_t idx : grammar_->lexicalByTerminal(word)) {
        numerator += alpha.linear[rules[idx].lhs] * rules[idx].prob;
    }
    return numerator > 0.0 ? std::log(numerator / normalizer) : kLogZero;
}

MaskedDistribution ChartParser::maskedDistribution(std::span<const TerminalId> tokens,
                                                   std::size_t position) const {
    if (position >= tokens.size()) throw InvalidArgument("mask position out of range");
    std::vector<TerminalId> masked(tokens.begin(), tokens.end());
    masked[position] = kMaskToken;
    Chart chart = insideOutside(masked);
    return maskedFromChart(chart, position);
}

PseudoLikelihood ChartParser::pseudoLogLikelihood(std::span<const TerminalId> tokens) const {
    Chart chart = insideOutside(tokens);
    PseudoLikelihood result;
    result.per_position.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double lp = maskedLogprob(chart, i, tokens[i]);
        result.per_position.push_back(lp);
        result.total += lp;
    }
    return result;
}

Chart insideChart(const Grammar & grammar, std::span<const TerminalId> tokens, ChartOptions options) {
    return ChartParser(grammar, options).inside(tokens);
}

Chart insideOutsideChart(const Grammar & grammar, std::span<const TerminalId> tokens, ChartOptions options) {
    return ChartParser(grammar, options).insideOutside(tokens);
}

MaskedDistribution maskedDistribution(const Grammar & grammar, std::span<const TerminalId> tokens,
                                      std::size_t position, ChartOptions options) {
    return ChartParser(grammar, options).maskedDistribution(tokens, position);
}

PseudoLikelihood pseudoLogLikelihood(const Grammar & grammar, std::span<const TerminalId> tokens,
                                     ChartOptions options) {
    return ChartParser(grammar, options).pseudoLogLikelihood(tokens);
}

double pseudoPerplexity(double pseudo_log_likelihood, std::size_t length) {
    if (length == 0) throw InvalidArgument("pseudo-perplexity needs at least one token");
    return std::exp(-pseudo_log_likelihood / static_cast<double>(length));
}

double pseudoPerplexity(std::span<const PseudoLikelihood> sentences) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto & s : sentences) {
        total += s.total;
        tokens += s.per_position.size();
    }
    return pseudoPerplexity(total, tokens);
}

} // namespace pcfglab
