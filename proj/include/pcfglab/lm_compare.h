#ifndef PCFGLAB_LM_COMPARE_H_
#define PCFGLAB_LM_COMPARE_H_

#include "pcfglab/corpus_stats.h"
#include "pcfglab/score_io.h"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pcfglab {

class Grammar;

struct Vocabulary {
    std::set<std::string> tokens;
    std::string unk = "<unk>";

    bool contains(const std::string & token) const { return tokens.contains(token); }
    const std::string & map(const std::string & token) const { return contains(token) ? token : unk; }
};

// Tokens occurring at least `min_freq` times; everything else maps to unk.
Vocabulary buildVocab(std::span<const Sentence> corpus, std::uint64_t min_freq);

struct AlignedPair {
    std::int64_t sentence_id = 0;
    std::int64_t position = 0;
    std::string token;
    std::string gold_tag;
    double grammar_logp = 0.0;
    double lm_logp = 0.0;
};

struct AlignmentReport {
    std::string grammar_label;
    std::string lm_label;
    std::vector<AlignedPair> matched;
    // reason -> count; reasons are "unk" and "missing".
    std::map<std::string, std::size_t> skipped;
    std::size_t total = 0;  // grammar-side records

    std::size_t skippedCount() const;
    std::vector<double> grammarLogps() const;
    std::vector<double> lmLogps() const;
};

// Pairs records on (sentence_id, position). Grammar-side tokens outside
// `vocab` are skipped as "unk"; positions absent from the LM file as
// "missing". Throws TokenMismatch when both files hold different tokens at
// the same position.
AlignmentReport align(const ScoreFile & grammar_scores, const ScoreFile & lm_scores,
                      const Vocabulary * vocab = nullptr);

// 1 - SS_res / SS_tot of the least-squares line predicting y from x.
// Throws DegenerateInput for fewer than 3 pairs or a constant x or y.
double rSquared(std::span<const double> x, std::span<const double> y);

struct RelativePerplexity {
    double ratio = 1.0;
    // ratio < 1: the model beats what should be a lower bound.
    bool anomalous = false;
};

RelativePerplexity relativePerplexity(double lm_ppl, double bound_ppl);

// exp(-mean logp).
double perplexityOf(std::span<const double> logps);

// Preterminal tag -> coarse class.
struct PosClassMap {
    std::map<std::string, std::string> classes;

    const std::string * find(const std::string & tag) const;
    std::vector<std::string> classNames() const;
};

inline constexpr const char * kDefaultPosClasses[] = {"noun", "verb", "adj_adv", "pronoun",
                                                      "function", "punct", "other"};

// Coarse class of a (possibly state-split) Penn-style tag: noun, verb,
// adj_adv, pronoun, function, punct, or other.
std::string defaultPosClass(const std::string & tag);
// Default map over every preterminal of the grammar.
PosClassMap defaultPosClassMap(const Grammar & grammar);
PosClassMap defaultPosClassMap(std::span<const std::string> tags);
// TSV lines `TAG<TAB>CLASS`; `#` comments and blank lines ignored.
PosClassMap parsePosClassMap(std::string_view tsv);
PosClassMap readPosClassMap(const std::string & path);

struct ClassDivergence {
    std::string label;
    std::size_t count = 0;
    double signed_mean = 0.0;    // mean of lm_logp - grammar_logp
    double absolute_mean = 0.0;  // mean of |lm_logp - grammar_logp|
};

// One entry per class of the map, in class-name order; classes without
// tokens report NaN means. Throws UnmappedTag.
std::vector<ClassDivergence> posDivergence(const AlignmentReport & report, const PosClassMap & map);

struct CheckpointRow {
    std::string label;
    std::size_t matched = 0;
    std::size_t skipped_unk = 0;
    std::size_t skipped_missing = 0;
    double spearman = 0.0;   // NaN when undefined
    double r_squared = 0.0;  // NaN when undefined
    double lm_ppl = 0.0;
    double bound_ppl = 0.0;
    RelativePerplexity relative;
    std::vector<ClassDivergence> divergence;
};

struct CheckpointTable {
    std::vector<std::string> classes;
    std::vector<CheckpointRow> rows;

    std::string toTsv() const;
    std::string toJson() const;
};

// One row per LM file, in the given order.
CheckpointTable checkpointSeries(std::span<const ScoreFile> lm_files, const ScoreFile & grammar_scores,
                                 const PosClassMap & map, const Vocabulary * vocab = nullptr);

} // namespace pcfglab

#endif // PCFGLAB_LM_COMPARE_H_
