#include "pcfglab/scoring.h"

#include "pcfglab/earley_prefix.h"
#include "pcfglab/errors.h"
#include "pcfglab/inside_outside.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace pcfglab {

namespace {

std::vector<std::string> splitWhitespace(std::string_view line) {
    std::vector<std::string> items;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        std::size_t end = pos;
        while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
        if (end > pos) items.emplace_back(line.substr(pos, end - pos));
        pos = end;
    }
    return items;
}

bool looksTagged(const std::vector<std::string> & items, const Grammar * grammar) {
    if (items.empty()) return false;
    for (const std::string & item : items) {
        const std::size_t slash = item.rfind('/');
        if (slash == std::string::npos || slash == 0 || slash + 1 == item.size()) return false;
        if (grammar && !grammar->nonterminal(std::string_view(item).substr(slash + 1))) return false;
    }
    return true;
}

} // namespace

std::vector<TaggedSentence> parseCorpus(std::string_view text, const Grammar * grammar, CorpusInputFormat format) {
    std::vector<std::vector<std::string>> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(splitWhitespace(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    // A trailing newline does not start another sentence, but interior blank
    // lines are kept so that sentence ids stay equal to line indices.
    while (!lines.empty() && lines.back().empty()) lines.pop_back();

    if (format == CorpusInputFormat::Auto) {
        format = CorpusInputFormat::Tokens;
        for (const auto & items : lines) {
            if (items.empty()) continue;
            if (looksTagged(items, grammar)) format = CorpusInputFormat::Tagged;
            break;
        }
    }

    std::vector<TaggedSentence> corpus;
    corpus.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        TaggedSentence s;
        if (format == CorpusInputFormat::Tagged) {
            for (const std::string & item : lines[i]) {
                const std::size_t slash = item.rfind('/');
                if (slash == std::string::npos || slash == 0 || slash + 1 == item.size()) {
                    throw InvalidArgument("line " + std::to_string(i + 1) + ": '" + item + "' is not token/TAG");
                }
                s.tokens.push_back(item.substr(0, slash));
                s.tags.push_back(item.substr(slash + 1));
            }
        } else {
            s.tokens = lines[i];
        }
        corpus.push_back(std::move(s));
    }
    return corpus;
}

std::vector<TaggedSentence> readCorpus(const std::string & path, const Grammar * grammar, CorpusInputFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseCorpus(buffer.str(), grammar, format);
}

TokenCorpus tokensOf(const std::vector<TaggedSentence> & corpus) {
    TokenCorpus out;
    out.reserve(corpus.size());
    for (const auto & s : corpus) out.push_back(s.tokens);
    return out;
}

Objective parseObjective(const std::string & name) {
    if (name == "masked") return Objective::Masked;
    if (name == "causal") return Objective::Causal;
    throw InvalidArgument("unknown objective '" + name + "' (masked|causal)");
}

const char * objectiveName(Objective objective) {
    return objective == Objective::Masked ? "masked" : "causal";
}

CorpusScores scoreCorpus(const Grammar & grammar, const std::vector<TaggedSentence> & corpus,
                         const ScoreOptions & options) {
    std::vector<std::vector<TerminalId>> encoded;
    encoded.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            encoded.push_back(grammar.encode(corpus[i].tokens));
        } catch (const UnknownToken & e) {
            throw UnknownToken("sentence " + std::to_string(i) + ": " + e.what());
        }
        if (!corpus[i].tags.empty() && corpus[i].tags.size() != corpus[i].tokens.size()) {
            throw InvalidArgument("sentence " + std::to_string(i) + ": tag count differs from token count");
        }
    }

    ChartOptions chart_options;
    chart_options.prune_log_threshold = options.prune;
    PrefixOptions prefix_options;
    prefix_options.prune_floor = std::exp(options.prune);
    const ChartParser chart_parser(grammar, chart_options);
    const PrefixParser prefix_parser(grammar, prefix_options);

    std::vector<std::vector<double>> logps(corpus.size());
    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= corpus.size() || failed.load()) return;
            try {
                if (encoded[i].empty()) continue;
                if (options.objective == Objective::Masked) {
                    logps[i] = chart_parser.pseudoLogLikelihood(encoded[i]).per_position;
                } else {
                    const auto scores = prefix_parser.causalScores(encoded[i]);
                    logps[i].reserve(scores.size());
                    for (const auto & s : scores) logps[i].push_back(s.logp);
                }
            } catch (const Error & e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    try {
                        throw Error(e.kind(), "sentence " + std::to_string(i) + ": " + e.what());
                    } catch (...) {
                        failure = std::current_exception();
                    }
                }
                failed = true;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                failed = true;
            }
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, corpus.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto & t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    CorpusScores result;
    result.sentences = corpus.size();
    const char * objective = objectiveName(options.objective);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        for (std::size_t p = 0; p < logps[i].size(); ++p) {
            ScoreRecord r;
            r.sentence_id = static_cast<std::int64_t>(i);
            r.position = static_cast<std::int64_t>(p + 1);
            r.token = corpus[i].tokens[p];
            if (!corpus[i].tags.empty()) r.gold_tag = corpus[i].tags[p];
            r.logp = logps[i][p];
            r.objective = objective;
            result.total_logp += r.logp;
            result.records.push_back(std::move(r));
        }
    }
    result.tokens = result.records.size();
    result.perplexity = result.tokens ? std::exp(-result.total_logp / static_cast<double>(result.tokens)) : 0.0;
    return result;
}

} // namespace pcfglab
