#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.h"
#include "pcfglab/corpus_stats.h"
#include "pcfglab/earley_prefix.h"
#include "pcfglab/errors.h"
#include "pcfglab/grammar.h"
#include "pcfglab/inside_outside.h"
#include "pcfglab/lm_compare.h"
#include "pcfglab/sampler.h"

#include <cmath>
#include <sstream>

namespace py = pybind11;
using namespace pcfglab;

namespace {

std::vector<TerminalId> encode(const Grammar & g, const std::vector<std::string> & tokens) {
    return g.encode(tokens);
}

py::dict derivationDict(const Grammar & g, const Derivation & d) {
    std::vector<std::string> tokens, tags;
    for (TerminalId t : d.tokens) tokens.push_back(g.symbols().terminal(t));
    for (NonterminalId t : d.tags) tags.push_back(g.symbols().nonterminal(t));
    py::dict out;
    out["tokens"] = tokens;
    out["tags"] = tags;
    out["tree"] = formatDerivation(g, d, CorpusFormat::Trees);
    out["logp"] = d.logp;
    return out;
}

} // namespace

PYBIND11_MODULE(_pcfglab, m) {
    m.doc() = "Exact PCFG scoring, sampling and corpus statistics";

    static py::exception<Error> error(m, "PcfgError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error & e) {
            py::set_error(error, (std::string(e.kind()) + ": " + e.what()).c_str());
        }
    });

    py::class_<Grammar>(m, "Grammar")
        .def_static(
            "from_text",
            [](const std::string & rules, const std::string & lexicon, double prob_floor, bool renormalize) {
                ParseOptions o;
                o.prob_floor = prob_floor;
                o.renormalize = renormalize;
                return Grammar::fromText(rules, lexicon, o);
            },
            py::arg("rules"), py::arg("lexicon"), py::arg("prob_floor") = 0.0, py::arg("renormalize") = false)
        .def_static(
            "from_files",
            [](const std::string & rules, const std::string & lexicon, double prob_floor, bool renormalize) {
                ParseOptions o;
                o.prob_floor = prob_floor;
                o.renormalize = renormalize;
                return Grammar::fromFiles(rules, lexicon, o);
            },
            py::arg("rules"), py::arg("lexicon"), py::arg("prob_floor") = 0.0, py::arg("renormalize") = false)
        .def_property_readonly("start", [](const Grammar & g) { return g.symbols().nonterminal(g.start()); })
        .def_property_readonly("nonterminals", [](const Grammar & g) { return g.symbols().nonterminals(); })
        .def_property_readonly("terminals", [](const Grammar & g) { return g.symbols().terminals(); })
        .def_property_readonly("num_rules", [](const Grammar & g) { return g.rules().size(); })
        .def("unary_closure",
             [](const Grammar & g, const std::string & a, const std::string & b) {
                 auto x = g.nonterminal(a), y = g.nonterminal(b);
                 if (!x || !y) throw py::key_error("unknown nonterminal");
                 return g.unaryClosure(*x, *y);
             })
        .def("rule_text", &Grammar::ruleText)
        .def("lexicon_text", &Grammar::lexiconText);

    m.def(
        "sentence_logprob",
        [](const Grammar & g, const std::vector<std::string> & tokens) {
            return insideChart(g, encode(g, tokens)).sentenceLogp();
        },
        py::arg("grammar"), py::arg("tokens"), "ln P_G(w) from the inside chart");

    m.def(
        "masked_distribution",
        [](const Grammar & g, const std::vector<std::string> & tokens, std::size_t position) {
            const MaskedDistribution d = maskedDistribution(g, encode(g, tokens), position);
            py::dict out;
            for (std::size_t k = 0; k < d.support.size(); ++k) {
                out[py::str(g.symbols().terminal(d.support[k]))] = std::exp(d.logps[k]);
            }
            return out;
        },
        py::arg("grammar"), py::arg("tokens"), py::arg("position"),
        "token -> P_G(token | context) for the 0-based masked position");

    m.def(
        "pseudo_log_likelihood",
        [](const Grammar & g, const std::vector<std::string> & tokens) {
            return pseudoLogLikelihood(g, encode(g, tokens)).per_position;
        },
        py::arg("grammar"), py::arg("tokens"));

    m.def(
        "causal_logprobs",
        [](const Grammar & g, const std::vector<std::string> & tokens) {
            std::vector<double> out;
            for (const auto & s : causalScores(g, encode(g, tokens))) out.push_back(s.logp);
            return out;
        },
        py::arg("grammar"), py::arg("tokens"));

    m.def(
        "prefix_logprob",
        [](const Grammar & g, const std::vector<std::string> & tokens) {
            return prefixLogprob(g, encode(g, tokens));
        },
        py::arg("grammar"), py::arg("tokens"));

    m.def(
        "sample",
        [](const Grammar & g, std::uint64_t seed, std::size_t count) {
            py::list out;
            std::size_t index = 0;
            while (out.size() < count) {
                auto rng = derivedStream(seed, 0, index++);
                if (auto d = sampleDerivation(g, rng)) out.append(derivationDict(g, *d));
            }
            return out;
        },
        py::arg("grammar"), py::arg("seed"), py::arg("count"));

    m.def(
        "generate_corpus",
        [](const Grammar & g, std::array<std::size_t, 4> sentences, std::size_t min_len, std::size_t max_len,
           std::uint64_t seed, std::size_t threads) {
            CorpusSpec spec;
            spec.sentences = sentences;
            spec.min_len = min_len;
            spec.max_len = max_len;
            spec.seed = seed;
            const Corpus corpus = generateCorpus(g, spec, threads);
            py::dict out;
            for (std::size_t s = 0; s < 4; ++s) {
                py::list split;
                for (const auto & d : corpus.splits[s]) split.append(derivationDict(g, d));
                out[kSplitNames[s]] = split;
            }
            out["report"] = corpus.report.toJson();
            return out;
        },
        py::arg("grammar"), py::arg("sentences"), py::arg("min_len") = 1, py::arg("max_len") = 25,
        py::arg("seed") = 0, py::arg("threads") = 1);

    m.def(
        "fit_zipf",
        [](const std::vector<std::vector<std::string>> & corpus) {
            const SplitHalfTable table = splitHalfRankFrequency(corpus);
            const ZipfFit fit = fitZipfMandelbrot(table.entries);
            py::dict out;
            out["alpha"] = fit.alpha;
            out["beta"] = fit.beta;
            out["loglik"] = fit.loglik;
            out["flat"] = fit.flat;
            out["warnings"] = fit.warnings;
            return out;
        },
        py::arg("corpus"), "split-half Zipf-Mandelbrot maximum-likelihood fit");

    m.def("spearman", [](const std::vector<double> & x, const std::vector<double> & y) { return spearman(x, y); });
    m.def("r_squared", [](const std::vector<double> & x, const std::vector<double> & y) { return rSquared(x, y); });
    m.def("ngram_spearman",
          [](const std::vector<std::vector<std::string>> & a, const std::vector<std::vector<std::string>> & b,
             std::size_t n) { return ngramSpearman(a, b, n); },
          py::arg("a"), py::arg("b"), py::arg("n") = 2);
    m.def(
        "relative_perplexity",
        [](double lm, double bound) {
            const RelativePerplexity r = relativePerplexity(lm, bound);
            return py::make_tuple(r.ratio, r.anomalous);
        },
        py::arg("lm_ppl"), py::arg("bound_ppl"));

    m.def(
        "run_cli",
        [](const std::vector<std::string> & args) {
            std::vector<const char *> argv{"pcfglab"};
            for (const auto & a : args) argv.push_back(a.c_str());
            std::ostringstream log;
            const int code = cli::run(static_cast<int>(argv.size()), argv.data(), log);
            return py::make_tuple(code, log.str());
        },
        py::arg("args"), "run a CLI subcommand in-process; returns (exit code, log text)");
}
