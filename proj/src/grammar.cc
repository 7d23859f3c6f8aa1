#include "pcfglab/grammar.h"

#include "pcfglab/errors.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pcfglab {

NonterminalId SymbolTable::addNonterminal(std::string_view name) {
    auto [it, inserted] = nonterminal_index_.try_emplace(std::string(name),
                                                         static_cast<SymbolId>(nonterminals_.size()));
    if (inserted) nonterminals_.emplace_back(name);
    return NonterminalId{it->second};
}

TerminalId SymbolTable::addTerminal(std::string_view name) {
    auto [it, inserted] = terminal_index_.try_emplace(std::string(name),
                                                      static_cast<SymbolId>(terminals_.size()));
    if (inserted) terminals_.emplace_back(name);
    return TerminalId{it->second};
}

std::optional<NonterminalId> SymbolTable::findNonterminal(std::string_view name) const {
    auto it = nonterminal_index_.find(std::string(name));
    if (it == nonterminal_index_.end()) return std::nullopt;
    return NonterminalId{it->second};
}

std::optional<TerminalId> SymbolTable::findTerminal(std::string_view name) const {
    auto it = terminal_index_.find(std::string(name));
    if (it == terminal_index_.end()) return std::nullopt;
    return TerminalId{it->second};
}

namespace {

std::vector<std::string_view> splitFields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        std::size_t end = pos;
        while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
        if (end > pos) fields.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return fields;
}

template <typename Fn>
void forEachLine(std::string_view text, Fn && fn) {
    std::size_t number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++number;
        std::size_t first = line.find_first_not_of(" \t");
        if (first != std::string_view::npos && line[first] != '#') fn(line, number);
        if (end == text.size()) break;
        pos = end + 1;
    }
}

std::string where(const char * what, std::size_t line) {
    return std::string(what) + " line " + std::to_string(line);
}

double parseProbability(std::string_view field, const char * what, std::size_t line) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw MalformedLine(where(what, line) + ": bad probability '" + std::string(field) + "'");
    }
    if (!(value > 0.0) || value > 1.0) {
        throw MalformedLine(where(what, line) + ": probability outside (0, 1]: " + std::string(field));
    }
    return value;
}

std::string formatProbability(double prob) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", prob);
    return buffer;
}

std::string readFile(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

SparseMatrix reflexiveTransitiveClosure(const SparseMatrix & one_step, double tolerance,
                                        int max_iterations) {
    const std::size_t n = one_step.size();

    // Only symbols touched by some edge can differ from the identity.
    std::vector<int> local(n, -1);
    std::vector<SymbolId> members;
    auto touch = [&](SymbolId s) {
        if (local[s] < 0) {
            local[s] = static_cast<int>(members.size());
            members.push_back(s);
        }
    };
    for (std::size_t a = 0; a < n; ++a) {
        if (one_step[a].cols.empty()) continue;
        touch(static_cast<SymbolId>(a));
        for (SymbolId b : one_step[a].cols) touch(b);
    }

    const std::size_t m = members.size();
    std::vector<double> current(m * m, 0.0);
    std::vector<double> next(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) current[i * m + i] = 1.0;

    bool converged = m == 0;
    for (int iteration = 0; iteration < max_iterations && !converged; ++iteration) {
        double change = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double * row = &next[i * m];
            std::fill(row, row + m, 0.0);
            row[i] = 1.0;
            const SparseRow & edges = one_step[members[i]];
            for (std::size_t e = 0; e < edges.cols.size(); ++e) {
                const double w = edges.weights[e];
                const double * src = &current[static_cast<std::size_t>(local[edges.cols[e]]) * m];
                for (std::size_t j = 0; j < m; ++j) row[j] += w * src[j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (!std::isfinite(row[j])) {
                    throw DivergentClosure("closure weights diverged (supercritical cycle)");
                }
                change = std::max(change, std::abs(row[j] - current[i * m + j]));
            }
        }
        current.swap(next);
        converged = change <= tolerance;
    }
    if (!converged) {
        throw DivergentClosure("closure did not converge within " + std::to_string(max_iterations) +
                               " iterations");
    }

    SparseMatrix closure(n);
    for (std::size_t a = 0; a < n; ++a) {
        SparseRow & row = closure[a];
        if (local[a] < 0) {
            row.cols.push_back(static_cast<SymbolId>(a));
            row.weights.push_back(1.0);
            continue;
        }
        const double * src = &current[static_cast<std::size_t>(local[a]) * m];
        std::vector<std::pair<SymbolId, double>> entries;
        for (std::size_t j = 0; j < m; ++j) {
            if (src[j] > 0.0) entries.emplace_back(members[j], src[j]);
        }
        std::sort(entries.begin(), entries.end());
        for (auto [col, w] : entries) {
            row.cols.push_back(col);
            row.weights.push_back(w);
        }
    }
    return closure;
}

Grammar Grammar::fromText(std::string_view rule_text, std::string_view lexicon_text,
                          const ParseOptions & options) {
    Grammar g;
    std::optional<std::string> start_name;
    std::optional<std::string> first_lhs;

    forEachLine(rule_text, [&](std::string_view line, std::size_t number) {
        auto fields = splitFields(line);
        if (fields.front() == "!start") {
            if (fields.size() != 2) throw MalformedLine(where("grammar", number) + ": expected '!start SYMBOL'");
            if (start_name) throw MalformedLine(where("grammar", number) + ": start symbol declared twice");
            start_name = std::string(fields[1]);
            return;
        }
        if (fields.size() < 4 || fields[1] != "->") {
            throw MalformedLine(where("grammar", number) + ": expected 'LHS -> RHS1 [RHS2] PROB'");
        }
        if (fields.size() > 5) {
            throw ArityError(where("grammar", number) + ": rule has " + std::to_string(fields.size() - 3) +
                             " children, at most 2 allowed");
        }
        Rule rule;
        rule.lhs = g.symbols_.addNonterminal(fields[0]).value;
        if (!first_lhs) first_lhs = std::string(fields[0]);
        rule.left = g.symbols_.addNonterminal(fields[2]).value;
        if (fields.size() == 5) {
            rule.kind = RuleKind::Binary;
            rule.right = g.symbols_.addNonterminal(fields[3]).value;
        } else {
            rule.kind = RuleKind::Unary;
        }
        rule.prob = parseProbability(fields.back(), "grammar", number);
        g.rules_.push_back(rule);
    });

    forEachLine(lexicon_text, [&](std::string_view line, std::size_t number) {
        auto fields = splitFields(line);
        if (fields.size() != 3) throw MalformedLine(where("lexicon", number) + ": expected 'TAG token PROB'");
        Rule rule;
        rule.kind = RuleKind::Lexical;
        rule.lhs = g.symbols_.addNonterminal(fields[0]).value;
        rule.left = g.symbols_.addTerminal(fields[1]).value;
        rule.prob = parseProbability(fields[2], "lexicon", number);
        g.rules_.push_back(rule);
    });

    std::string start = start_name ? *start_name : first_lhs.value_or("S");
    auto start_id = g.symbols_.findNonterminal(start);
    if (!start_id) throw UnknownStart("start symbol '" + start + "' has no rules or references");
    g.symbols_.setStart(*start_id);

    // Duplicate rules would silently double their mass.
    {
        std::vector<std::tuple<int, SymbolId, SymbolId, SymbolId>> keys;
        keys.reserve(g.rules_.size());
        for (const Rule & r : g.rules_) keys.emplace_back(static_cast<int>(r.kind), r.lhs, r.left, r.right);
        std::sort(keys.begin(), keys.end());
        if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
            throw MalformedLine("duplicate rule in grammar/lexicon");
        }
    }

    if (options.prob_floor > 0.0) {
        std::erase_if(g.rules_, [&](const Rule & r) { return r.prob < options.prob_floor; });
    }

    const std::size_t num_nt = g.symbols_.numNonterminals();
    std::vector<double> mass(num_nt, 0.0);
    std::vector<int> count(num_nt, 0);
    for (const Rule & r : g.rules_) {
        mass[r.lhs] += r.prob;
        ++count[r.lhs];
    }
    if (options.renormalize) {
        for (Rule & r : g.rules_) r.prob /= mass[r.lhs];
        std::fill(mass.begin(), mass.end(), 0.0);
        for (const Rule & r : g.rules_) mass[r.lhs] += r.prob;
    }
    for (std::size_t a = 0; a < num_nt; ++a) {
        if (count[a] > 0 && std::abs(mass[a] - 1.0) > options.normalization_tolerance) {
            char buffer[64];
            std::snprintf(buffer, sizeof buffer, "%.9g", mass[a]);
            throw NormalizationError("rules of '" + g.symbols_.nonterminals()[a] + "' sum to " + buffer);
        }
    }
    for (Rule & r : g.rules_) r.logp = std::log(r.prob);

    g.index();
    return g;
}

Grammar Grammar::fromFiles(const std::string & rule_path, const std::string & lexicon_path,
                           const ParseOptions & options) {
    return fromText(readFile(rule_path), readFile(lexicon_path), options);
}

void Grammar::index() {
    const std::size_t num_nt = symbols_.numNonterminals();
    by_lhs_.assign(num_nt, {});
    binary_by_left_.assign(num_nt, {});
    binary_by_lhs_.assign(num_nt, {});
    lexical_by_lhs_.assign(num_nt, {});
    lexical_by_terminal_.assign(symbols_.numTerminals(), {});
    lexical_mass_.assign(num_nt, 0.0);
    unary_.assign(num_nt, {});

    for (std::uint32_t i = 0; i < rules_.size(); ++i) {
        const Rule & r = rules_[i];
        by_lhs_[r.lhs].push_back(i);
        switch (r.kind) {
        case RuleKind::Binary:
            ++num_binary_;
            binary_by_left_[r.left].push_back(i);
            binary_by_lhs_[r.lhs].push_back(i);
            break;
        case RuleKind::Unary:
            ++num_unary_;
            unary_[r.lhs].cols.push_back(r.left);
            unary_[r.lhs].weights.push_back(r.prob);
            break;
        case RuleKind::Lexical:
            ++num_lexical_;
            lexical_by_lhs_[r.lhs].push_back(i);
            lexical_by_terminal_[r.left].push_back(i);
            lexical_mass_[r.lhs] += r.prob;
            break;
        }
    }
    unary_closure_ = reflexiveTransitiveClosure(unary_);
}

double Grammar::unaryClosure(NonterminalId from, NonterminalId to) const {
    const SparseRow & row = unary_closure_[from.value];
    auto it = std::lower_bound(row.cols.begin(), row.cols.end(), to.value);
    if (it == row.cols.end() || *it != to.value) return 0.0;
    return row.weights[static_cast<std::size_t>(it - row.cols.begin())];
}

std::vector<TerminalId> Grammar::encode(std::span<const std::string> tokens) const {
    std::vector<TerminalId> ids;
    ids.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto id = symbols_.findTerminal(tokens[i]);
        if (!id) {
            throw UnknownToken("token '" + tokens[i] + "' at position " + std::to_string(i + 1) +
                               " is not in the grammar vocabulary");
        }
        ids.push_back(*id);
    }
    return ids;
}

std::string Grammar::ruleText() const {
    std::string out = "!start " + symbols_.nonterminal(start()) + "\n";
    const auto & nt = symbols_.nonterminals();
    for (const Rule & r : rules_) {
        if (r.kind == RuleKind::Lexical) continue;
        out += nt[r.lhs] + " -> " + nt[r.left];
        if (r.kind == RuleKind::Binary) out += " " + nt[r.right];
        out += " " + formatProbability(r.prob) + "\n";
    }
    return out;
}

std::string Grammar::lexiconText() const {
    std::string out;
    for (const Rule & r : rules_) {
        if (r.kind != RuleKind::Lexical) continue;
        out += symbols_.nonterminals()[r.lhs] + " " + symbols_.terminals()[r.left] + " " +
               formatProbability(r.prob) + "\n";
    }
    return out;
}

std::vector<VocabularyEntry> vocabulary(const Grammar & grammar) {
    std::vector<VocabularyEntry> entries;
    entries.reserve(grammar.numTerminals());
    for (std::size_t w = 0; w < grammar.numTerminals(); ++w) {
        VocabularyEntry entry{grammar.symbols().terminals()[w], 0.0};
        for (std::uint32_t idx : grammar.lexicalByTerminal(TerminalId{static_cast<SymbolId>(w)})) {
            entry.mass += grammar.rules()[idx].prob;
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

} // namespace pcfglab
