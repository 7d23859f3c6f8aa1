#ifndef PCFGLAB_CORPUS_STATS_H_
#define PCFGLAB_CORPUS_STATS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pcfglab {

using Sentence = std::vector<std::string>;
using TokenCorpus = std::vector<Sentence>;

struct FreqTable {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;

    void add(const std::string & item, std::uint64_t count = 1);
};

FreqTable countTokens(std::span<const Sentence> sentences);

// One token with its rank from one half and its frequency from the other.
struct RankFrequency {
    std::string token;
    std::uint64_t rank = 0;
    std::uint64_t frequency = 0;
};

struct SplitHalfTable {
    FreqTable rank_half;       // even-indexed sentences
    FreqTable frequency_half;  // odd-indexed sentences
    // Every token seen in the frequency half, sorted by (rank, token).
    std::vector<RankFrequency> entries;
    std::uint64_t unseen_rank = 0;  // |V_A| + 1
};

// Even sentence indices form the rank half, odd indices the frequency half.
// Ranks follow descending count with ties broken by token order; tokens
// missing from the rank half get rank |V_A| + 1. Throws EmptyHalf.
SplitHalfTable splitHalfRankFrequency(std::span<const Sentence> corpus);

// Ranks of a single frequency table (descending count, ties by token).
std::vector<RankFrequency> rankTable(const FreqTable & table);

struct ZipfFit {
    double alpha = 0.0;
    double beta = 0.0;
    double loglik = 0.0;             // sum_r f_r ln p(r)
    std::vector<double> residuals;   // ln f_obs - ln f_fit per observed rank
    double residual_rms = 0.0;
    // Likelihood is maximized at the alpha -> 0 boundary (flat frequencies).
    bool flat = false;
    std::vector<std::string> warnings;
};

// Maximum-likelihood Zipf-Mandelbrot fit p(r) = (r+beta)^-alpha / Z with Z
// summed over the observed ranks. Entries with frequency 0 are ignored.
// Nelder-Mead from five fixed starts. Throws FitDiverged.
ZipfFit fitZipfMandelbrot(std::span<const RankFrequency> table);

// Negative mean log-likelihood used by the fit; exposed for diagnostics.
double zipfNegativeLogLikelihood(std::span<const RankFrequency> table, double alpha, double beta);

// length -> proportion of sentences. Throws InvalidArgument on empty input.
std::map<std::size_t, double> sentenceLengthHistogram(std::span<const Sentence> corpus);

FreqTable countNgrams(std::span<const Sentence> corpus, std::size_t order);

// Spearman rho between the n-gram count vectors of two corpora over the
// union of their n-grams, zero-filled. Throws DegenerateInput below
// two distinct n-grams.
double ngramSpearman(std::span<const Sentence> a, std::span<const Sentence> b, std::size_t order);

// Average (fractional) ranks, 1-based.
std::vector<double> averageRanks(std::span<const double> values);
double pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks without the length check.
double rankCorrelation(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks. Throws DegenerateInput.
double spearman(std::span<const double> x, std::span<const double> y);

} // namespace pcfglab

#endif // PCFGLAB_CORPUS_STATS_H_
