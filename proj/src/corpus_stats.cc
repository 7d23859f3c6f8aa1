#include "pcfglab/corpus_stats.h"

#include "pcfglab/errors.h"
#include "pcfglab/log_math.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace pcfglab {

void FreqTable::add(const std::string & item, std::uint64_t count) {
    counts[item] += count;
    total += count;
}

FreqTable countTokens(std::span<const Sentence> sentences) {
    FreqTable table;
    for (const Sentence & s : sentences) {
        for (const std::string & token : s) table.add(token);
    }
    return table;
}

std::vector<RankFrequency> rankTable(const FreqTable & table) {
    std::vector<RankFrequency> entries;
    entries.reserve(table.counts.size());
    for (const auto & [token, count] : table.counts) entries.push_back({token, 0, count});
    // std::map iteration is already token-ordered, so a stable sort on count
    // breaks ties lexicographically.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankFrequency & a, const RankFrequency & b) { return a.frequency > b.frequency; });
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = i + 1;
    return entries;
}

SplitHalfTable splitHalfRankFrequency(std::span<const Sentence> corpus) {
    SplitHalfTable result;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        FreqTable & half = (i % 2 == 0) ? result.rank_half : result.frequency_half;
        for (const std::string & token : corpus[i]) half.add(token);
    }
    if (result.rank_half.total == 0 || result.frequency_half.total == 0) {
        throw EmptyHalf("split-half protocol needs tokens in both halves (got " +
                        std::to_string(corpus.size()) + " sentences)");
    }

    std::map<std::string, std::uint64_t> rank_of;
    for (const RankFrequency & e : rankTable(result.rank_half)) rank_of[e.token] = e.rank;
    result.unseen_rank = result.rank_half.counts.size() + 1;

    for (const auto & [token, count] : result.frequency_half.counts) {
        auto it = rank_of.find(token);
        result.entries.push_back({token, it == rank_of.end() ? result.unseen_rank : it->second, count});
    }
    std::sort(result.entries.begin(), result.entries.end(), [](const RankFrequency & a, const RankFrequency & b) {
        return a.rank != b.rank ? a.rank < b.rank : a.token < b.token;
    });
    return result;
}

namespace {

struct ZipfData {
    std::vector<double> ranks;
    std::vector<double> weights;          // f_r / N
};

constexpr double kMinLogAlpha = -14.0;  // alpha ~ 8e-7
constexpr double kMaxLogAlpha = 5.0;
constexpr double kMinLogBetaShift = -20.0;  // beta + 1 > 0
constexpr double kMaxLogBetaShift = 12.0;

double clampTo(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double alphaOf(double x0) { return std::exp(clampTo(x0, kMinLogAlpha, kMaxLogAlpha)); }
double betaOf(double x1) { return std::exp(clampTo(x1, kMinLogBetaShift, kMaxLogBetaShift)) - 1.0; }

double negativeMeanLogLik(const ZipfData & data, double alpha, double beta) {
    const std::size_t m = data.ranks.size();
    double peak = kLogZero;
    std::vector<double> terms(m);
    for (std::size_t i = 0; i < m; ++i) {
        terms[i] = -alpha * std::log(data.ranks[i] + beta);
        peak = std::max(peak, terms[i]);
    }
    double z = 0.0;
    for (double t : terms) z += std::exp(t - peak);
    const double log_z = peak + std::log(z);
    double nll = 0.0;
    for (std::size_t i = 0; i < m; ++i) nll -= data.weights[i] * (terms[i] - log_z);
    return nll;
}

double gslObjective(const gsl_vector * x, void * params) {
    const auto * data = static_cast<const ZipfData *>(params);
    const double value = negativeMeanLogLik(*data, alphaOf(gsl_vector_get(x, 0)), betaOf(gsl_vector_get(x, 1)));
    return std::isfinite(value) ? value : GSL_POSINF;
}

ZipfData prepare(std::span<const RankFrequency> table, std::uint64_t & total) {
    ZipfData data;
    total = 0;
    for (const RankFrequency & e : table) {
        if (e.frequency == 0) continue;
        if (e.rank == 0) throw InvalidArgument("ranks are 1-based");
        data.ranks.push_back(static_cast<double>(e.rank));
        data.weights.push_back(static_cast<double>(e.frequency));
        total += e.frequency;
    }
    for (double & w : data.weights) w /= static_cast<double>(total);
    return data;
}

} // namespace

double zipfNegativeLogLikelihood(std::span<const RankFrequency> table, double alpha, double beta) {
    std::uint64_t total = 0;
    ZipfData data = prepare(table, total);
    if (data.ranks.empty()) throw InvalidArgument("empty frequency table");
    return negativeMeanLogLik(data, alpha, beta);
}

ZipfFit fitZipfMandelbrot(std::span<const RankFrequency> table) {
    std::uint64_t total = 0;
    ZipfData data = prepare(table, total);
    {
        std::vector<double> distinct = data.ranks;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 10) {
            throw FitDiverged("Zipf-Mandelbrot fit needs at least 10 distinct observed ranks, got " +
                              std::to_string(distinct.size()));
        }
    }

    gsl_set_error_handler_off();
    gsl_multimin_function objective{&gslObjective, 2, &data};
    const std::array<std::array<double, 2>, 5> starts = {{{0.5, 0.0}, {1.0, 1.0}, {1.5, 5.0}, {2.0, 10.0}, {3.0, 50.0}}};

    double best_value = GSL_POSINF;
    double best_x0 = 0.0;
    double best_x1 = 0.0;
    bool any_converged = false;

    gsl_multimin_fminimizer * minimizer =
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
    gsl_vector * x = gsl_vector_alloc(2);
    gsl_vector * step = gsl_vector_alloc(2);
    for (const auto & [alpha0, beta0] : starts) {
        gsl_vector_set(x, 0, std::log(alpha0));
        gsl_vector_set(x, 1, std::log(beta0 + 1.0));
        gsl_vector_set_all(step, 0.5);
        gsl_multimin_fminimizer_set(minimizer, &objective, x, step);
        int status = GSL_CONTINUE;
        for (int iteration = 0; iteration < 20000 && status == GSL_CONTINUE; ++iteration) {
            if (gsl_multimin_fminimizer_iterate(minimizer) != GSL_SUCCESS) break;
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer), 1e-8);
        }
        // On the alpha -> 0 boundary the objective no longer depends on
        // beta, so the simplex need not shrink there; such runs still count.
        const bool at_boundary = gsl_vector_get(minimizer->x, 0) <= kMinLogAlpha;
        if (status != GSL_SUCCESS && !at_boundary) continue;
        any_converged = true;
        const double value = minimizer->fval;
        if (value < best_value) {
            best_value = value;
            best_x0 = gsl_vector_get(minimizer->x, 0);
            best_x1 = gsl_vector_get(minimizer->x, 1);
        }
    }
    gsl_vector_free(step);
    gsl_vector_free(x);
    gsl_multimin_fminimizer_free(minimizer);

    if (!any_converged || !std::isfinite(best_value)) {
        throw FitDiverged("Nelder-Mead did not converge from any start");
    }

    ZipfFit fit;
    fit.alpha = alphaOf(best_x0);
    fit.beta = betaOf(best_x1);
    fit.loglik = -best_value * static_cast<double>(total);

    if (fit.alpha < 1e-3) {
        fit.flat = true;
        fit.warnings.push_back("likelihood maximized at the alpha -> 0 boundary: frequencies are flat in rank");
    }
    if (best_x1 >= kMaxLogBetaShift - 1e-6) {
        fit.warnings.push_back("beta reached the upper search bound");
    }

    double log_z = kLogZero;
    for (double r : data.ranks) log_z = logAdd(log_z, -fit.alpha * std::log(r + fit.beta));
    double sq = 0.0;
    for (std::size_t i = 0; i < data.ranks.size(); ++i) {
        const double log_fit = std::log(static_cast<double>(total)) - fit.alpha * std::log(data.ranks[i] + fit.beta) - log_z;
        const double log_obs = std::log(data.weights[i] * static_cast<double>(total));
        fit.residuals.push_back(log_obs - log_fit);
        sq += fit.residuals.back() * fit.residuals.back();
    }
    fit.residual_rms = std::sqrt(sq / static_cast<double>(fit.residuals.size()));
    return fit;
}

std::map<std::size_t, double> sentenceLengthHistogram(std::span<const Sentence> corpus) {
    if (corpus.empty()) throw InvalidArgument("sentence length histogram of an empty corpus");
    std::map<std::size_t, std::size_t> counts;
    for (const Sentence & s : corpus) ++counts[s.size()];
    std::map<std::size_t, double> histogram;
    const double n = static_cast<double>(corpus.size());
    for (const auto & [length, count] : counts) histogram[length] = static_cast<double>(count) / n;
    return histogram;
}

FreqTable countNgrams(std::span<const Sentence> corpus, std::size_t order) {
    if (order == 0) throw InvalidArgument("n-gram order must be at least 1");
    FreqTable table;
    for (const Sentence & s : corpus) {
        if (s.size() < order) continue;
        for (std::size_t i = 0; i + order <= s.size(); ++i) {
            std::string key = s[i];
            for (std::size_t k = 1; k < order; ++k) {
                key += ' ';
                key += s[i + k];
            }
            table.add(key);
        }
    }
    return table;
}

double ngramSpearman(std::span<const Sentence> a, std::span<const Sentence> b, std::size_t order) {
    const FreqTable ca = countNgrams(a, order);
    const FreqTable cb = countNgrams(b, order);
    std::vector<double> xa;
    std::vector<double> xb;
    auto ia = ca.counts.begin();
    auto ib = cb.counts.begin();
    while (ia != ca.counts.end() || ib != cb.counts.end()) {
        if (ib == cb.counts.end() || (ia != ca.counts.end() && ia->first < ib->first)) {
            xa.push_back(static_cast<double>(ia->second));
            xb.push_back(0.0);
            ++ia;
        } else if (ia == ca.counts.end() || ib->first < ia->first) {
            xa.push_back(0.0);
            xb.push_back(static_cast<double>(ib->second));
            ++ib;
        } else {
            xa.push_back(static_cast<double>(ia->second));
            xb.push_back(static_cast<double>(ib->second));
            ++ia;
            ++ib;
        }
    }
    // Two distinct n-grams already give a defined +-1 rank correlation.
    if (xa.size() < 2) {
        throw DegenerateInput("n-gram correlation needs at least 2 distinct n-grams, got " +
                              std::to_string(xa.size()));
    }
    return rankCorrelation(xa, xb);
}

std::vector<double> averageRanks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearsonOf(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("correlation of a constant vector is undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("correlation inputs differ in length");
    if (x.size() < 3) throw DegenerateInput("correlation needs at least 3 pairs");
    return pearsonOf(x, y);
}

double rankCorrelation(std::span<const double> x, std::span<const double> y) {
    return pearsonOf(averageRanks(x), averageRanks(y));
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("correlation inputs differ in length");
    if (x.size() < 3) throw DegenerateInput("Spearman correlation needs at least 3 pairs");
    return rankCorrelation(x, y);
}

} // namespace pcfglab
