#include "pcfglab/lm_compare.h"

#include "pcfglab/errors.h"
#include "pcfglab/grammar.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace pcfglab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string formatNumber(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

nlohmann::ordered_json jsonNumber(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

} // namespace

Vocabulary buildVocab(std::span<const Sentence> corpus, std::uint64_t min_freq) {
    if (min_freq < 1) throw InvalidArgument("min_freq must be at least 1");
    const FreqTable counts = countTokens(corpus);
    Vocabulary vocab;
    for (const auto & [token, count] : counts.counts) {
        if (count >= min_freq) vocab.tokens.insert(token);
    }
    return vocab;
}

std::size_t AlignmentReport::skippedCount() const {
    std::size_t n = 0;
    for (const auto & [reason, count] : skipped) n += count;
    return n;
}

std::vector<double> AlignmentReport::grammarLogps() const {
    std::vector<double> v;
    v.reserve(matched.size());
    for (const auto & p : matched) v.push_back(p.grammar_logp);
    return v;
}

std::vector<double> AlignmentReport::lmLogps() const {
    std::vector<double> v;
    v.reserve(matched.size());
    for (const auto & p : matched) v.push_back(p.lm_logp);
    return v;
}

AlignmentReport align(const ScoreFile & grammar_scores, const ScoreFile & lm_scores, const Vocabulary * vocab) {
    std::map<std::pair<std::int64_t, std::int64_t>, const ScoreRecord *> lm_index;
    for (const ScoreRecord & r : lm_scores.records) lm_index[{r.sentence_id, r.position}] = &r;

    std::vector<const ScoreRecord *> ordered;
    ordered.reserve(grammar_scores.records.size());
    for (const ScoreRecord & r : grammar_scores.records) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](const ScoreRecord * a, const ScoreRecord * b) {
        return std::tie(a->sentence_id, a->position) < std::tie(b->sentence_id, b->position);
    });

    AlignmentReport report;
    report.grammar_label = grammar_scores.label;
    report.lm_label = lm_scores.label;
    report.total = ordered.size();
    report.skipped["unk"] = 0;
    report.skipped["missing"] = 0;
    for (const ScoreRecord * g : ordered) {
        if (vocab && !vocab->contains(g->token)) {
            ++report.skipped["unk"];
            continue;
        }
        auto it = lm_index.find({g->sentence_id, g->position});
        if (it == lm_index.end()) {
            ++report.skipped["missing"];
            continue;
        }
        const ScoreRecord & m = *it->second;
        if (m.token != g->token) {
            throw TokenMismatch("sentence " + std::to_string(g->sentence_id) + " position " +
                                std::to_string(g->position) + ": '" + g->token + "' in " + grammar_scores.label +
                                " vs '" + m.token + "' in " + lm_scores.label);
        }
        report.matched.push_back({g->sentence_id, g->position, g->token, g->gold_tag, g->logp, m.logp});
    }
    return report;
}

double rSquared(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("R^2 inputs differ in length");
    const std::size_t n = x.size();
    if (n < 3) throw DegenerateInput("R^2 needs at least 3 pairs");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DegenerateInput("R^2 predictor is constant");
    if (syy == 0.0) throw DegenerateInput("R^2 target is constant");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (intercept + slope * x[i]);
        ss_res += e * e;
    }
    return 1.0 - ss_res / syy;
}

RelativePerplexity relativePerplexity(double lm_ppl, double bound_ppl) {
    if (!(lm_ppl > 0.0) || !(bound_ppl > 0.0)) throw InvalidArgument("perplexities must be positive");
    RelativePerplexity r;
    r.ratio = lm_ppl / bound_ppl;
    r.anomalous = r.ratio < 1.0;
    return r;
}

double perplexityOf(std::span<const double> logps) {
    if (logps.empty()) throw InvalidArgument("perplexity of zero tokens");
    double total = 0.0;
    for (double lp : logps) total += lp;
    return std::exp(-total / static_cast<double>(logps.size()));
}

const std::string * PosClassMap::find(const std::string & tag) const {
    auto it = classes.find(tag);
    return it == classes.end() ? nullptr : &it->second;
}

std::vector<std::string> PosClassMap::classNames() const {
    std::set<std::string> names;
    for (const auto & [tag, label] : classes) names.insert(label);
    return {names.begin(), names.end()};
}

std::string defaultPosClass(const std::string & tag) {
    std::string base = tag;
    // State-split subsymbols: NN_3, NN-3, NN^3.
    const std::size_t cut = base.find_last_of("_^-");
    if (cut != std::string::npos && cut > 0 && cut + 1 < base.size() &&
        std::all_of(base.begin() + static_cast<std::ptrdiff_t>(cut) + 1, base.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
        base.resize(cut);
    }
    auto starts = [&](const char * prefix) { return base.rfind(prefix, 0) == 0; };

    static const std::set<std::string> punct = {".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$",
                                                "HYPH", "NFP", "PUNCT", "''", "\"", "(", ")", ";", "!", "?"};
    static const std::set<std::string> function = {"DT", "PDT", "WDT", "IN", "CC", "TO", "RP", "EX", "POS"};
    static const std::set<std::string> pronoun = {"PRP", "PRP$", "WP", "WP$"};

    if (punct.contains(base)) return "punct";
    if (pronoun.contains(base)) return "pronoun";
    if (function.contains(base)) return "function";
    if (starts("NN")) return "noun";
    if (starts("VB") || base == "MD") return "verb";
    if (starts("JJ") || starts("RB") || base == "WRB") return "adj_adv";
    return "other";
}

PosClassMap defaultPosClassMap(std::span<const std::string> tags) {
    PosClassMap map;
    for (const std::string & tag : tags) map.classes[tag] = defaultPosClass(tag);
    return map;
}

PosClassMap defaultPosClassMap(const Grammar & grammar) {
    std::vector<std::string> tags;
    for (std::size_t a = 0; a < grammar.numNonterminals(); ++a) {
        const NonterminalId id{static_cast<SymbolId>(a)};
        if (grammar.isPreterminal(id)) tags.push_back(grammar.symbols().nonterminal(id));
    }
    return defaultPosClassMap(tags);
}

PosClassMap parsePosClassMap(std::string_view tsv) {
    PosClassMap map;
    std::size_t pos = 0;
    std::size_t number = 0;
    while (pos < tsv.size()) {
        std::size_t end = tsv.find('\n', pos);
        if (end == std::string_view::npos) end = tsv.size();
        std::string_view line = tsv.substr(pos, end - pos);
        pos = end + 1;
        ++number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size() ||
            line.find('\t', tab + 1) != std::string_view::npos) {
            throw InvalidArgument("class map line " + std::to_string(number) + ": expected TAG<TAB>CLASS");
        }
        map.classes[std::string(line.substr(0, tab))] = std::string(line.substr(tab + 1));
    }
    if (map.classes.empty()) throw InvalidArgument("class map is empty");
    return map;
}

PosClassMap readPosClassMap(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parsePosClassMap(buffer.str());
}

std::vector<ClassDivergence> posDivergence(const AlignmentReport & report, const PosClassMap & map) {
    std::map<std::string, ClassDivergence> by_class;
    for (const std::string & name : map.classNames()) by_class[name].label = name;
    for (const AlignedPair & p : report.matched) {
        const std::string * label = map.find(p.gold_tag);
        if (!label) {
            throw UnmappedTag("tag '" + p.gold_tag + "' (sentence " + std::to_string(p.sentence_id) + " position " +
                              std::to_string(p.position) + ") has no class");
        }
        ClassDivergence & d = by_class[*label];
        const double delta = p.lm_logp - p.grammar_logp;
        ++d.count;
        d.signed_mean += delta;
        d.absolute_mean += std::abs(delta);
    }
    std::vector<ClassDivergence> out;
    for (auto & [name, d] : by_class) {
        if (d.count == 0) {
            d.signed_mean = kNaN;
            d.absolute_mean = kNaN;
        } else {
            d.signed_mean /= static_cast<double>(d.count);
            d.absolute_mean /= static_cast<double>(d.count);
        }
        out.push_back(d);
    }
    return out;
}

CheckpointTable checkpointSeries(std::span<const ScoreFile> lm_files, const ScoreFile & grammar_scores,
                                 const PosClassMap & map, const Vocabulary * vocab) {
    CheckpointTable table;
    table.classes = map.classNames();
    for (const ScoreFile & lm : lm_files) {
        const AlignmentReport report = align(grammar_scores, lm, vocab);
        CheckpointRow row;
        row.label = lm.label;
        row.matched = report.matched.size();
        row.skipped_unk = report.skipped.at("unk");
        row.skipped_missing = report.skipped.at("missing");
        const std::vector<double> g = report.grammarLogps();
        const std::vector<double> m = report.lmLogps();
        try {
            row.spearman = spearman(g, m);
        } catch (const DegenerateInput &) {
            row.spearman = kNaN;
        }
        try {
            row.r_squared = rSquared(m, g);
        } catch (const DegenerateInput &) {
            row.r_squared = kNaN;
        }
        if (!report.matched.empty()) {
            row.lm_ppl = perplexityOf(m);
            row.bound_ppl = perplexityOf(g);
            row.relative = relativePerplexity(row.lm_ppl, row.bound_ppl);
        } else {
            row.lm_ppl = row.bound_ppl = kNaN;
            row.relative = {kNaN, false};
        }
        row.divergence = posDivergence(report, map);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string CheckpointTable::toTsv() const {
    std::ostringstream out;
    out << "checkpoint\tmatched\tskipped_unk\tskipped_missing\tspearman\tr_squared\tlm_ppl\tbound_ppl\trelative_ppl\tanomalous";
    for (const std::string & c : classes) out << "\tdiv_signed:" << c;
    for (const std::string & c : classes) out << "\tdiv_abs:" << c;
    out << '\n';
    for (const CheckpointRow & r : rows) {
        out << r.label << '\t' << r.matched << '\t' << r.skipped_unk << '\t' << r.skipped_missing << '\t'
            << formatNumber(r.spearman) << '\t' << formatNumber(r.r_squared) << '\t' << formatNumber(r.lm_ppl) << '\t'
            << formatNumber(r.bound_ppl) << '\t' << formatNumber(r.relative.ratio) << '\t'
            << (r.relative.anomalous ? 1 : 0);
        for (const ClassDivergence & d : r.divergence) out << '\t' << formatNumber(d.signed_mean);
        for (const ClassDivergence & d : r.divergence) out << '\t' << formatNumber(d.absolute_mean);
        out << '\n';
    }
    return out.str();
}

std::string CheckpointTable::toJson() const {
    nlohmann::ordered_json j;
    j["classes"] = classes;
    nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
    for (const CheckpointRow & r : rows) {
        nlohmann::ordered_json row;
        row["checkpoint"] = r.label;
        row["matched"] = r.matched;
        row["skipped"] = {{"unk", r.skipped_unk}, {"missing", r.skipped_missing}};
        row["spearman"] = jsonNumber(r.spearman);
        row["r_squared"] = jsonNumber(r.r_squared);
        row["lm_ppl"] = jsonNumber(r.lm_ppl);
        row["bound_ppl"] = jsonNumber(r.bound_ppl);
        row["relative_ppl"] = jsonNumber(r.relative.ratio);
        row["anomalous"] = r.relative.anomalous;
        nlohmann::ordered_json div = nlohmann::ordered_json::object();
        for (const ClassDivergence & d : r.divergence) {
            div[d.label] = {{"count", d.count},
                            {"signed_mean", jsonNumber(d.signed_mean)},
                            {"absolute_mean", jsonNumber(d.absolute_mean)}};
        }
        row["divergence"] = std::move(div);
        rows_json.push_back(std::move(row));
    }
    j["rows"] = std::move(rows_json);
    return j.dump(2);
}

} // namespace pcfglab
