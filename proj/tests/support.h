// Reference implementations used as oracles by the unit and acceptance
// tests. They share no code with the library beyond the parsed rule list.
#ifndef PCFGLAB_TESTS_SUPPORT_H_
#define PCFGLAB_TESTS_SUPPORT_H_

#include "pcfglab/grammar.h"
#include "pcfglab/sampler.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testing {

using pcfglab::Grammar;
using pcfglab::RuleKind;
using pcfglab::TerminalId;

inline const char * kG1Rules = "S -> A B 1.0\n";
inline const char * kG1Lexicon = "A a 1.0\nB b 0.5\nB c 0.5\n";
inline const char * kG2Rules = "S -> S S 0.3\n";
inline const char * kG2Lexicon = "S x 0.7\n";
inline const char * kG3Rules = "S -> X 1.0\n";
inline const char * kG3Lexicon = "X y 1.0\n";

inline Grammar g1() { return Grammar::fromText(kG1Rules, kG1Lexicon); }
inline Grammar g2() { return Grammar::fromText(kG2Rules, kG2Lexicon); }
inline Grammar g3() { return Grammar::fromText(kG3Rules, kG3Lexicon); }

inline std::vector<TerminalId> encode(const Grammar & g, const std::vector<std::string> & tokens) {
    return g.encode(tokens);
}

// Exact inside probabilities by direct recursion over spans. Unary chains
// are summed per span by plain fixpoint iteration top = base + U top.
class BruteInside {
public:
    BruteInside(const Grammar & g, const std::vector<int> & tokens) : g_(g), tokens_(tokens), n_(tokens.size()) {
        const std::size_t nt = g.numNonterminals();
        top_.assign((n_ + 1) * (n_ + 1), std::vector<double>(nt, 0.0));
        for (std::size_t width = 1; width <= n_; ++width) {
            for (std::size_t i = 0; i + width <= n_; ++i) fill(i, i + width);
        }
    }

    // P(A =>* w[i, j)); tokens equal to -1 match any terminal.
    double inside(std::size_t i, std::size_t j, int a) const { return top_[i * (n_ + 1) + j][a]; }
    double sentence() const { return n_ == 0 ? 0.0 : inside(0, n_, g_.start().value); }

private:
    void fill(std::size_t i, std::size_t j) {
        const std::size_t nt = g_.numNonterminals();
        std::vector<double> base(nt, 0.0);
        for (const auto & r : g_.rules()) {
            if (r.kind == RuleKind::Lexical && j == i + 1) {
                if (tokens_[i] < 0 || r.left == tokens_[i]) base[r.lhs] += r.prob;
            } else if (r.kind == RuleKind::Binary) {
                for (std::size_t k = i + 1; k < j; ++k) {
                    base[r.lhs] += r.prob * top_[i * (n_ + 1) + k][r.left] * top_[k * (n_ + 1) + j][r.right];
                }
            }
        }
        std::vector<double> top = base;
        for (int it = 0; it < 100000; ++it) {
            double change = 0.0;
            std::vector<double> next = base;
            for (const auto & r : g_.rules()) {
                if (r.kind == RuleKind::Unary) next[r.lhs] += r.prob * top[r.left];
            }
            for (std::size_t a = 0; a < nt; ++a) change = std::max(change, std::abs(next[a] - top[a]));
            top.swap(next);
            if (change <= 1e-17) break;
        }
        top_[i * (n_ + 1) + j] = top;
    }

    const Grammar & g_;
    std::vector<int> tokens_;
    std::size_t n_;
    std::vector<std::vector<double>> top_;
};

inline std::vector<int> ids(const std::vector<TerminalId> & tokens) {
    std::vector<int> out;
    for (TerminalId t : tokens) out.push_back(t.value);
    return out;
}

inline double bruteSentenceProb(const Grammar & g, const std::vector<int> & tokens) {
    return BruteInside(g, tokens).sentence();
}

// P(w_i = v | rest) for every terminal v, from full-sentence probabilities of
// every substitution.
inline std::vector<double> bruteMasked(const Grammar & g, std::vector<int> tokens, std::size_t position) {
    std::vector<double> p(g.numTerminals(), 0.0);
    double z = 0.0;
    for (std::size_t v = 0; v < g.numTerminals(); ++v) {
        tokens[position] = static_cast<int>(v);
        p[v] = bruteSentenceProb(g, tokens);
        z += p[v];
    }
    for (double & x : p) x /= z;
    return p;
}

// Probability of every terminal string of length <= max_len derivable from
// each nonterminal, by fixpoint iteration over string distributions. Strings
// of length l are stored densely, indexed by their base-|V| code.
class StringEnumeration {
public:
    StringEnumeration(const Grammar & g, std::size_t max_len)
        : max_len_(max_len), v_(std::max<std::size_t>(1, g.numTerminals())) {
        pow_.assign(max_len + 1, 1);
        for (std::size_t l = 1; l <= max_len; ++l) pow_[l] = pow_[l - 1] * v_;
        const std::size_t nt = g.numNonterminals();
        auto empty = [&] {
            std::vector<std::vector<double>> d(max_len + 1);
            for (std::size_t l = 1; l <= max_len; ++l) d[l].assign(pow_[l], 0.0);
            return d;
        };
        dist_.assign(nt, empty());
        for (int it = 0; it < 1000; ++it) {
            std::vector<std::vector<std::vector<double>>> next(nt, empty());
            for (const auto & r : g.rules()) {
                auto & out = next[r.lhs];
                if (r.kind == RuleKind::Lexical) {
                    out[1][r.left] += r.prob;
                } else if (r.kind == RuleKind::Unary) {
                    for (std::size_t l = 1; l <= max_len; ++l) {
                        for (std::size_t i = 0; i < pow_[l]; ++i) out[l][i] += r.prob * dist_[r.left][l][i];
                    }
                } else {
                    for (std::size_t l1 = 1; l1 < max_len; ++l1) {
                        for (std::size_t l2 = 1; l1 + l2 <= max_len; ++l2) {
                            const auto & a = dist_[r.left][l1];
                            const auto & b = dist_[r.right][l2];
                            auto & o = out[l1 + l2];
                            for (std::size_t i = 0; i < a.size(); ++i) {
                                if (a[i] == 0.0) continue;
                                const double pa = r.prob * a[i];
                                for (std::size_t j = 0; j < b.size(); ++j) o[i * pow_[l2] + j] += pa * b[j];
                            }
                        }
                    }
                }
            }
            double change = 0.0;
            for (std::size_t a = 0; a < nt; ++a) {
                for (std::size_t l = 1; l <= max_len; ++l) {
                    for (std::size_t i = 0; i < pow_[l]; ++i) {
                        change = std::max(change, std::abs(next[a][l][i] - dist_[a][l][i]));
                    }
                }
            }
            dist_.swap(next);
            if (change <= 1e-19) break;
        }
        for (std::size_t l = 1; l <= max_len; ++l) {
            for (double p : dist_[g.start().value][l]) mass_ += p;
        }
    }

    double prob(int a, const std::vector<int> & s) const {
        if (s.empty() || s.size() > max_len_) return 0.0;
        return dist_[a][s.size()][code(s)];
    }
    double enumeratedMass() const { return mass_; }
    // Probability of strings longer than max_len, for consistent grammars.
    double tail() const { return std::max(0.0, 1.0 - mass_); }

    // Mass of enumerated strings starting with `prefix`; the true prefix
    // probability lies in [prefixMass, prefixMass + tail].
    double prefixMass(int start, const std::vector<int> & prefix) const {
        double total = 0.0;
        const std::size_t c = code(prefix);
        for (std::size_t l = std::max<std::size_t>(1, prefix.size()); l <= max_len_; ++l) {
            const std::size_t width = pow_[l - prefix.size()];
            for (std::size_t i = c * width; i < (c + 1) * width; ++i) total += dist_[start][l][i];
        }
        return total;
    }

private:
    std::size_t code(const std::vector<int> & s) const {
        std::size_t c = 0;
        for (int t : s) c = c * v_ + static_cast<std::size_t>(t);
        return c;
    }

    std::size_t max_len_;
    std::size_t v_;
    std::vector<std::size_t> pow_;
    std::vector<std::vector<std::vector<double>>> dist_;
    double mass_ = 0.0;
};

struct GrammarText {
    std::string rules;
    std::string lexicon;
};

struct RandomGrammarOptions {
    int nonterminals = 4;
    int terminals = 3;
    double binary_mass = 0.2;  // per LHS
    double unary_mass = 0.1;   // per LHS carrying a unary rule
    int max_rules = 30;
};

inline std::string formatProb(double p) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", p);
    return buf;
}

// Proper random grammar: every nonterminal emits at least one terminal, so
// every symbol is productive. Rule counts stay within `max_rules`.
inline GrammarText randomGrammar(std::mt19937_64 & rng, const RandomGrammarOptions & o) {
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    auto nt = [](int i) { return "N" + std::to_string(i); };
    auto split = [&](int parts, double mass) {
        std::vector<double> w(parts);
        double z = 0.0;
        for (double & x : w) z += (x = unit(rng));
        for (double & x : w) x *= mass / z;
        return w;
    };

    for (;;) {
        GrammarText text;
        text.rules = "!start N0\n";
        int rules = 0;
        for (int a = 0; a < o.nonterminals; ++a) {
            const int n_lex = 1 + pick(2);
            const int n_bin = o.binary_mass > 0 ? 1 + pick(2) : 0;
            const int n_un = o.unary_mass > 0 && pick(2) == 0 ? 1 : 0;
            rules += n_lex + n_bin + n_un;
            const double lex_mass = 1.0 - (n_bin ? o.binary_mass : 0.0) - (n_un ? o.unary_mass : 0.0);

            std::vector<int> words;
            while (static_cast<int>(words.size()) < std::min(n_lex, o.terminals)) {
                const int w = pick(o.terminals);
                if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
            }
            const auto lex_w = split(static_cast<int>(words.size()), lex_mass);
            for (std::size_t k = 0; k < words.size(); ++k) {
                text.lexicon += nt(a) + " t" + std::to_string(words[k]) + " " + formatProb(lex_w[k]) + "\n";
            }
            std::vector<std::pair<int, int>> pairs;
            while (static_cast<int>(pairs.size()) < n_bin) {
                std::pair<int, int> c{pick(o.nonterminals), pick(o.nonterminals)};
                if (std::find(pairs.begin(), pairs.end(), c) == pairs.end()) pairs.push_back(c);
            }
            const auto bin_w = split(n_bin, o.binary_mass);
            for (int k = 0; k < n_bin; ++k) {
                text.rules += nt(a) + " -> " + nt(pairs[k].first) + " " + nt(pairs[k].second) + " " +
                              formatProb(bin_w[k]) + "\n";
            }
            if (n_un) {
                int b = pick(o.nonterminals);
                if (b == a) b = (a + 1) % o.nonterminals;
                text.rules += nt(a) + " -> " + nt(b) + " " + formatProb(o.unary_mass) + "\n";
            }
        }
        if (rules <= o.max_rules) return text;
    }
}

// Sentences drawn from the grammar with lengths in [min_len, max_len].
inline std::vector<std::vector<TerminalId>> sampleSentences(const Grammar & g, std::size_t count, std::uint64_t seed,
                                                            std::size_t min_len = 1, std::size_t max_len = 12) {
    pcfglab::Sampler sampler(g);
    std::vector<std::vector<TerminalId>> out;
    std::mt19937_64 rng(seed);
    for (int attempts = 0; out.size() < count && attempts < 1000000; ++attempts) {
        auto outcome = sampler.sample(rng, 10000, max_len);
        if (outcome.derivation && outcome.derivation->tokens.size() >= min_len) {
            out.push_back(outcome.derivation->tokens);
        }
    }
    return out;
}

// Dense (I - M)^-1 by Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::vector<double>> inverseOfIMinus(const std::vector<std::vector<double>> & m) {
    const std::size_t n = m.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(2 * n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - m[i][j];
        a[i][n + i] = 1.0;
    }
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        const double d = a[c][c];
        for (double & x : a[c]) x /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c || a[r][c] == 0.0) continue;
            const double f = a[r][c];
            for (std::size_t k = 0; k < 2 * n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<std::vector<double>> inv(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) inv[i][j] = a[i][n + j];
    }
    return inv;
}

} // namespace testing

#endif // PCFGLAB_TESTS_SUPPORT_H_
