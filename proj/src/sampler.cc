#include "pcfglab/sampler.h"

#include "pcfglab/errors.h"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "json.hpp"

namespace pcfglab {

namespace {

std::uint64_t splitmix64(std::uint64_t & state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::mt19937_64 derivedStream(std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
    std::uint64_t state = seed;
    std::uint64_t a = splitmix64(state);
    state ^= split * 0xd1b54a32d192ed03ULL;
    std::uint64_t b = splitmix64(state);
    state ^= index * 0x8cb92ba72f3d8dd7ULL;
    std::uint64_t c = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return std::mt19937_64(seq);
}

Sampler::Sampler(const Grammar & grammar) : grammar_(&grammar) {
    const auto rules = grammar.rules();
    cumulative_.resize(grammar.numNonterminals());
    for (std::size_t a = 0; a < grammar.numNonterminals(); ++a) {
        double sum = 0.0;
        for (std::uint32_t idx : grammar.rulesOf(NonterminalId{static_cast<SymbolId>(a)})) {
            sum += rules[idx].prob;
            cumulative_[a].push_back(sum);
        }
    }
}

std::uint32_t Sampler::chooseRule(NonterminalId lhs, double u) const {
    const auto & cum = cumulative_[lhs.value];
    const auto candidates = grammar_->rulesOf(lhs);
    if (candidates.empty()) {
        throw InvalidArgument("nonterminal '" + grammar_->symbols().nonterminal(lhs) + "' has no rules");
    }
    const double target = u * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    std::size_t k = static_cast<std::size_t>(it - cum.begin());
    if (k >= candidates.size()) k = candidates.size() - 1;
    return candidates[k];
}

SampleOutcome Sampler::sample(std::mt19937_64 & rng, std::size_t max_expansions,
                              std::size_t max_tokens) const {
    const auto rules = grammar_->rules();
    Derivation d;
    d.tree.push_back({grammar_->start().value, false, {}});
    std::vector<std::uint32_t> pending{0};
    std::size_t expansions = 0;

    while (!pending.empty()) {
        const std::uint32_t node = pending.back();
        pending.pop_back();
        if (++expansions > max_expansions) return {SampleStatus::DepthCap, std::nullopt};

        const NonterminalId lhs{d.tree[node].symbol};
        const Rule & rule = rules[chooseRule(lhs, uniformUnit(rng))];
        d.logp += rule.logp;

        if (rule.kind == RuleKind::Lexical) {
            const auto leaf = static_cast<std::uint32_t>(d.tree.size());
            d.tree.push_back({rule.left, true, {}});
            d.tree[node].children.push_back(leaf);
            d.tokens.push_back(TerminalId{rule.left});
            d.tags.push_back(lhs);
            if (d.tokens.size() > max_tokens) return {SampleStatus::TooLong, std::nullopt};
            continue;
        }

        const auto first = static_cast<std::uint32_t>(d.tree.size());
        d.tree.push_back({rule.left, false, {}});
        d.tree[node].children.push_back(first);
        if (rule.kind == RuleKind::Binary) {
            const auto second = static_cast<std::uint32_t>(d.tree.size());
            d.tree.push_back({rule.right, false, {}});
            d.tree[node].children.push_back(second);
            pending.push_back(second);
        }
        pending.push_back(first);
    }
    return {SampleStatus::Ok, std::move(d)};
}

std::optional<Derivation> sampleDerivation(const Grammar & grammar, std::mt19937_64 & rng,
                                           std::size_t max_expansions) {
    return Sampler(grammar).sample(rng, max_expansions).derivation;
}

void CorpusSpec::validate() const {
    if (min_len == 0 || min_len > max_len) {
        throw InvalidArgument("length bounds must satisfy 0 < min_len <= max_len");
    }
    std::size_t total = 0;
    for (std::size_t n : sentences) total += n;
    if (total == 0) throw InvalidArgument("corpus spec requests no sentences");
    if (max_rule_expansions == 0) throw InvalidArgument("max_rule_expansions must be positive");
    if (max_attempts_per_sentence == 0) throw InvalidArgument("attempt budget must be positive");
}

std::string GenerationReport::toJson() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["threads"] = threads;
    j["min_len"] = min_len;
    j["max_len"] = max_len;
    nlohmann::ordered_json splits_json;
    for (std::size_t s = 0; s < splits.size(); ++s) {
        const SplitReport & r = splits[s];
        splits_json[kSplitNames[s]] = {
            {"requested", r.requested},
            {"generated", r.generated},
            {"attempts", r.attempts},
            {"rejected_length", r.rejected_length},
            {"rejected_depth", r.rejected_depth},
            {"rejected_collision", r.rejected_collision},
        };
    }
    j["splits"] = std::move(splits_json);
    return j.dump(2);
}

std::string surfaceString(const Grammar & grammar, const Derivation & d) {
    std::string out;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
        if (i) out += ' ';
        out += grammar.symbols().terminal(d.tokens[i]);
    }
    return out;
}

Corpus generateCorpus(const Grammar & grammar, const CorpusSpec & spec, std::size_t threads) {
    spec.validate();
    threads = std::max<std::size_t>(1, threads);
    const Sampler sampler(grammar);

    Corpus corpus;
    corpus.report.seed = spec.seed;
    corpus.report.threads = threads;
    corpus.report.min_len = spec.min_len;
    corpus.report.max_len = spec.max_len;

    std::unordered_set<std::string> earlier;

    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t count = spec.sentences[s];
        std::vector<Derivation> & out = corpus.splits[s];
        out.resize(count);
        SplitReport & report = corpus.report.splits[s];
        report.requested = count;
        if (count == 0) continue;

        std::mutex merge_mutex;
        std::exception_ptr failure;

        auto work = [&](std::size_t begin, std::size_t end) {
            SplitReport local;
            try {
                for (std::size_t index = begin; index < end; ++index) {
                    std::mt19937_64 rng = derivedStream(spec.seed, s, index);
                    bool accepted = false;
                    for (std::size_t attempt = 0; attempt < spec.max_attempts_per_sentence; ++attempt) {
                        ++local.attempts;
                        SampleOutcome outcome = sampler.sample(rng, spec.max_rule_expansions, spec.max_len);
                        if (outcome.status == SampleStatus::DepthCap) {
                            ++local.rejected_depth;
                            continue;
                        }
                        if (outcome.status == SampleStatus::TooLong ||
                            outcome.derivation->tokens.size() < spec.min_len) {
                            ++local.rejected_length;
                            continue;
                        }
                        if (!earlier.empty() && earlier.contains(surfaceString(grammar, *outcome.derivation))) {
                            ++local.rejected_collision;
                            continue;
                        }
                        out[index] = std::move(*outcome.derivation);
                        ++local.generated;
                        accepted = true;
                        break;
                    }
                    if (!accepted) {
                        throw ExhaustedBudget(std::string("no acceptable sentence for ") + kSplitNames[s] +
                                              " #" + std::to_string(index) + " within " +
                                              std::to_string(spec.max_attempts_per_sentence) + " draws");
                    }
                }
            } catch (...) {
                std::lock_guard lock(merge_mutex);
                if (!failure) failure = std::current_exception();
            }
            std::lock_guard lock(merge_mutex);
            report.generated += local.generated;
            report.attempts += local.attempts;
            report.rejected_length += local.rejected_length;
            report.rejected_depth += local.rejected_depth;
            report.rejected_collision += local.rejected_collision;
        };

        const std::size_t workers = std::min(threads, count);
        if (workers == 1) {
            work(0, count);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back(work, w * count / workers, (w + 1) * count / workers);
            }
            for (auto & t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);

        for (const Derivation & d : out) earlier.insert(surfaceString(grammar, d));
    }
    return corpus;
}

CorpusFormat parseCorpusFormat(const std::string & name) {
    if (name == "tokens") return CorpusFormat::Tokens;
    if (name == "tagged") return CorpusFormat::Tagged;
    if (name == "trees") return CorpusFormat::Trees;
    throw InvalidArgument("unknown corpus format '" + name + "' (tokens|tagged|trees)");
}

namespace {

void writeTree(const Grammar & grammar, const Derivation & d, std::uint32_t node, std::string & out) {
    const TreeNode & t = d.tree[node];
    if (t.terminal) {
        out += grammar.symbols().terminal(TerminalId{t.symbol});
        return;
    }
    out += '(';
    out += grammar.symbols().nonterminal(NonterminalId{t.symbol});
    for (std::uint32_t child : t.children) {
        out += ' ';
        writeTree(grammar, d, child, out);
    }
    out += ')';
}

const char * extension(CorpusFormat format) {
    switch (format) {
    case CorpusFormat::Tokens: return "txt";
    case CorpusFormat::Tagged: return "tagged";
    case CorpusFormat::Trees: return "trees";
    }
    return "txt";
}

} // namespace

std::string formatDerivation(const Grammar & grammar, const Derivation & d, CorpusFormat format) {
    switch (format) {
    case CorpusFormat::Tokens:
        return surfaceString(grammar, d);
    case CorpusFormat::Tagged: {
        std::string out;
        for (std::size_t i = 0; i < d.tokens.size(); ++i) {
            if (i) out += ' ';
            out += grammar.symbols().terminal(d.tokens[i]);
            out += '/';
            out += grammar.symbols().nonterminal(d.tags[i]);
        }
        return out;
    }
    case CorpusFormat::Trees: {
        std::string out;
        if (!d.tree.empty()) writeTree(grammar, d, 0, out);
        return out;
    }
    }
    return {};
}

std::vector<std::string> writeCorpus(const Grammar & grammar, const Corpus & corpus, CorpusFormat format,
                                     const std::string & directory) {
    std::filesystem::create_directories(directory);
    std::vector<std::string> paths;
    for (std::size_t s = 0; s < 4; ++s) {
        if (corpus.splits[s].empty()) continue;
        const std::string path =
            (std::filesystem::path(directory) / (std::string(kSplitNames[s]) + "." + extension(format))).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        for (const Derivation & d : corpus.splits[s]) out << formatDerivation(grammar, d, format) << '\n';
        if (!out) throw IoError("write failed: " + path);
        paths.push_back(path);
    }
    return paths;
}

} // namespace pcfglab
