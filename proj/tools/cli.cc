#include "cli.h"

#include "pcfglab/corpus_stats.h"
#include "pcfglab/errors.h"
#include "pcfglab/grammar.h"
#include "pcfglab/lm_compare.h"
#include "pcfglab/sampler.h"
#include "pcfglab/score_io.h"
#include "pcfglab/scoring.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "CLI11.hpp"

namespace pcfglab::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

Grammar loadGrammar(const RunConfig & config) {
    if (config.grammar.empty() || config.lexicon.empty()) {
        throw InvalidArgument("--grammar and --lexicon are required");
    }
    ParseOptions options;
    options.prob_floor = config.prob_floor;
    options.renormalize = config.renormalize;
    return Grammar::fromFiles(config.grammar, config.lexicon, options);
}

void writeText(const fs::path & path, const std::string & text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string requireOut(const RunConfig & config) {
    if (config.out.empty()) throw InvalidArgument("--out is required");
    return config.out;
}

} // namespace

ordered_json cmdSample(const RunConfig & config) {
    const std::string out_dir = requireOut(config);
    std::vector<CorpusFormat> formats;
    if (config.format == "all") {
        formats = {CorpusFormat::Tokens, CorpusFormat::Tagged, CorpusFormat::Trees};
    } else {
        formats = {parseCorpusFormat(config.format)};
    }
    CorpusSpec spec;
    spec.sentences = {config.train, config.dev, config.test, config.eval};
    spec.min_len = config.min_len;
    spec.max_len = config.max_len;
    spec.seed = config.seed;
    spec.max_rule_expansions = config.max_expansions;
    spec.max_attempts_per_sentence = config.max_attempts;
    spec.validate();

    const Grammar grammar = loadGrammar(config);
    const Corpus corpus = generateCorpus(grammar, spec, config.threads);

    ordered_json files = ordered_json::array();
    for (CorpusFormat f : formats) {
        for (const std::string & path : writeCorpus(grammar, corpus, f, out_dir)) files.push_back(path);
    }
    const fs::path report_path = fs::path(out_dir) / "report.json";
    writeText(report_path, corpus.report.toJson() + "\n");
    files.push_back(report_path.string());

    ordered_json summary;
    summary["command"] = "sample";
    summary["seed"] = config.seed;
    summary["files"] = files;
    summary["report"] = ordered_json::parse(corpus.report.toJson());
    return summary;
}

ordered_json cmdScore(const RunConfig & config) {
    if (config.corpus.size() != 1) throw InvalidArgument("score takes exactly one --corpus");
    const std::string out_path = requireOut(config);
    ScoreOptions options;
    options.objective = parseObjective(config.objective);
    options.threads = config.threads;
    options.prune = config.prune;

    const Grammar grammar = loadGrammar(config);
    const auto corpus = readCorpus(config.corpus.front(), &grammar);
    const CorpusScores scores = scoreCorpus(grammar, corpus, options);

    const fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + out_path);
    writeScoreFile(out, scores.records);
    if (!out) throw IoError("write failed: " + out_path);

    ordered_json summary;
    summary["command"] = "score";
    summary["objective"] = config.objective;
    summary["seed"] = config.seed;
    summary["sentences"] = scores.sentences;
    summary["tokens"] = scores.tokens;
    summary["total_logp"] = number(scores.total_logp);
    summary[options.objective == Objective::Masked ? "pseudo_perplexity" : "perplexity"] = number(scores.perplexity);
    summary["prune"] = std::isfinite(config.prune) ? ordered_json(config.prune) : ordered_json("off");
    summary["files"] = {out_path};
    return summary;
}

ordered_json cmdStats(const RunConfig & config) {
    const fs::path out_dir(requireOut(config));
    fs::create_directories(out_dir);
    ordered_json summary;
    summary["command"] = "stats";
    summary["analysis"] = config.analysis;
    summary["seed"] = config.seed;
    ordered_json files = ordered_json::array();

    if (config.corpus.empty()) throw InvalidArgument("stats needs --corpus");
    const TokenCorpus corpus = tokensOf(readCorpus(config.corpus.front()));

    if (config.analysis == "zipf") {
        const SplitHalfTable table = splitHalfRankFrequency(corpus);
        const ZipfFit fit = fitZipfMandelbrot(table.entries);
        ordered_json report;
        report["alpha"] = fit.alpha;
        report["beta"] = fit.beta;
        report["loglik"] = fit.loglik;
        report["ranks"] = fit.residuals.size();
        report["residual_rms"] = fit.residual_rms;
        report["flat"] = fit.flat;
        report["warnings"] = fit.warnings;
        report["rank_half_tokens"] = table.rank_half.total;
        report["frequency_half_tokens"] = table.frequency_half.total;
        writeText(out_dir / "zipf.json", report.dump(2) + "\n");
        files.push_back((out_dir / "zipf.json").string());

        std::string tsv = "token\trank\tfrequency\n";
        for (const auto & e : table.entries) {
            tsv += e.token + "\t" + std::to_string(e.rank) + "\t" + std::to_string(e.frequency) + "\n";
        }
        writeText(out_dir / "zipf.tsv", tsv);
        files.push_back((out_dir / "zipf.tsv").string());
        if (config.plot) {
            std::string dat = "# rank frequency\n";
            for (const auto & e : table.entries) {
                if (e.frequency > 0) dat += std::to_string(e.rank) + " " + std::to_string(e.frequency) + "\n";
            }
            writeText(out_dir / "zipf.dat", dat);
            files.push_back((out_dir / "zipf.dat").string());
        }
        summary["result"] = report;
    } else if (config.analysis == "lengths") {
        const auto histogram = sentenceLengthHistogram(corpus);
        ordered_json report = ordered_json::object();
        std::string tsv = "length\tproportion\n";
        std::string dat = "# length proportion\n";
        for (const auto & [length, p] : histogram) {
            report[std::to_string(length)] = p;
            char line[64];
            std::snprintf(line, sizeof line, "%zu\t%.17g\n", length, p);
            tsv += line;
            std::snprintf(line, sizeof line, "%zu %.17g\n", length, p);
            dat += line;
        }
        writeText(out_dir / "lengths.json", report.dump(2) + "\n");
        writeText(out_dir / "lengths.tsv", tsv);
        files.push_back((out_dir / "lengths.json").string());
        files.push_back((out_dir / "lengths.tsv").string());
        if (config.plot) {
            writeText(out_dir / "lengths.dat", dat);
            files.push_back((out_dir / "lengths.dat").string());
        }
        summary["result"] = report;
    } else if (config.analysis == "ngram") {
        if (config.corpus.size() != 2) throw InvalidArgument("ngram analysis needs two --corpus files");
        const TokenCorpus other = tokensOf(readCorpus(config.corpus[1]));
        const double rho = ngramSpearman(corpus, other, config.n);
        ordered_json report;
        report["n"] = config.n;
        report["spearman"] = rho;
        report["corpus_a"] = config.corpus[0];
        report["corpus_b"] = config.corpus[1];
        writeText(out_dir / "ngram.json", report.dump(2) + "\n");
        files.push_back((out_dir / "ngram.json").string());
        summary["result"] = report;
    } else {
        throw InvalidArgument("unknown analysis '" + config.analysis + "' (zipf|lengths|ngram)");
    }
    summary["files"] = files;
    return summary;
}

namespace {

PosClassMap classMapFor(const RunConfig & config, const ScoreFile & truth) {
    if (!config.map.empty()) return readPosClassMap(config.map);
    if (!config.grammar.empty() && !config.lexicon.empty()) return defaultPosClassMap(loadGrammar(config));
    std::set<std::string> tags;
    for (const auto & r : truth.records) {
        if (!r.gold_tag.empty()) tags.insert(r.gold_tag);
    }
    std::vector<std::string> list(tags.begin(), tags.end());
    return defaultPosClassMap(list);
}

std::optional<Vocabulary> vocabFor(const RunConfig & config) {
    if (config.corpus.empty()) return std::nullopt;
    TokenCorpus all;
    for (const std::string & path : config.corpus) {
        for (auto & s : tokensOf(readCorpus(path))) all.push_back(std::move(s));
    }
    return buildVocab(all, config.min_freq);
}

} // namespace

ordered_json cmdCompare(const RunConfig & config) {
    if (config.truth.empty()) throw InvalidArgument("compare needs --truth (grammar score file)");
    if (config.lm.empty()) throw InvalidArgument("compare needs at least one --lm score file");
    const fs::path out_dir(requireOut(config));

    const ScoreFile truth = readScoreFile(config.truth, "grammar");
    std::vector<ScoreFile> lms;
    for (const std::string & path : config.lm) lms.push_back(readScoreFile(path, fs::path(path).stem().string()));
    const PosClassMap map = classMapFor(config, truth);
    const std::optional<Vocabulary> vocab = vocabFor(config);

    const CheckpointTable table = checkpointSeries(lms, truth, map, vocab ? &*vocab : nullptr);
    writeText(out_dir / "checkpoints.tsv", table.toTsv());
    writeText(out_dir / "checkpoints.json", table.toJson() + "\n");

    ordered_json summary;
    summary["command"] = "compare";
    summary["seed"] = config.seed;
    summary["checkpoints"] = lms.size();
    summary["result"] = ordered_json::parse(table.toJson());
    summary["files"] = {(out_dir / "checkpoints.tsv").string(), (out_dir / "checkpoints.json").string()};
    return summary;
}

ordered_json cmdPosDiv(const RunConfig & config) {
    if (config.truth.empty()) throw InvalidArgument("pos-div needs --truth (grammar score file)");
    if (config.lm.size() != 1) throw InvalidArgument("pos-div takes exactly one --lm score file");
    const fs::path out_dir(requireOut(config));

    const ScoreFile truth = readScoreFile(config.truth, "grammar");
    const ScoreFile lm = readScoreFile(config.lm.front(), fs::path(config.lm.front()).stem().string());
    const PosClassMap map = classMapFor(config, truth);
    const std::optional<Vocabulary> vocab = vocabFor(config);
    const AlignmentReport report = align(truth, lm, vocab ? &*vocab : nullptr);
    const auto divergence = posDivergence(report, map);

    std::string tsv = "class\tcount\tsigned_mean\tabsolute_mean\n";
    ordered_json result = ordered_json::object();
    for (const auto & d : divergence) {
        char line[256];
        std::snprintf(line, sizeof line, "%s\t%zu\t%.10g\t%.10g\n", d.label.c_str(), d.count, d.signed_mean,
                      d.absolute_mean);
        tsv += line;
        result[d.label] = {{"count", d.count},
                           {"signed_mean", number(d.signed_mean)},
                           {"absolute_mean", number(d.absolute_mean)}};
    }
    writeText(out_dir / "pos_divergence.tsv", tsv);
    writeText(out_dir / "pos_divergence.json", result.dump(2) + "\n");

    ordered_json summary;
    summary["command"] = "pos-div";
    summary["seed"] = config.seed;
    summary["matched"] = report.matched.size();
    summary["skipped"] = report.skipped;
    summary["result"] = result;
    summary["files"] = {(out_dir / "pos_divergence.tsv").string(), (out_dir / "pos_divergence.json").string()};
    return summary;
}

int run(int argc, const char * const * argv, std::ostream & log) {
    RunConfig config;
    const unsigned hardware = std::thread::hardware_concurrency();
    config.threads = hardware == 0 ? 1 : hardware;

    CLI::App app{"pcfglab: exact PCFG perplexity bounds, corpus sampling and LM comparison"};
    app.set_config("--config", "", "plain-text (INI/TOML) file with option values; command line wins");
    app.require_subcommand(1);

    auto add_common = [&](CLI::App * sub) {
        sub->add_option("--seed", config.seed, "random seed (recorded in every report)");
        sub->add_option("--threads", config.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", config.out, "output file or directory");
    };
    auto add_grammar = [&](CLI::App * sub, bool required) {
        auto * g = sub->add_option("--grammar", config.grammar, "rule file")->check(CLI::ExistingFile);
        auto * l = sub->add_option("--lexicon", config.lexicon, "lexicon file")->check(CLI::ExistingFile);
        if (required) {
            g->required();
            l->required();
        }
        sub->add_option("--prob-floor", config.prob_floor, "drop rules below this probability at load");
        sub->add_flag("--renormalize", config.renormalize, "renormalize each LHS after flooring");
    };

    CLI::App * sample = app.add_subcommand("sample", "generate train/dev/test/eval corpora");
    add_common(sample);
    add_grammar(sample, true);
    sample->add_option("--min-len", config.min_len, "minimum sentence length in tokens");
    sample->add_option("--max-len", config.max_len, "maximum sentence length in tokens");
    sample->add_option("--train", config.train, "train sentences");
    sample->add_option("--dev", config.dev, "dev sentences");
    sample->add_option("--test", config.test, "test sentences");
    sample->add_option("--eval", config.eval, "eval sentences");
    sample->add_option("--format", config.format, "tokens|tagged|trees|all")
        ->check(CLI::IsMember({"tokens", "tagged", "trees", "all"}));
    sample->add_option("--max-expansions", config.max_expansions, "rule applications per derivation");
    sample->add_option("--max-attempts", config.max_attempts, "draws allowed per requested sentence");

    CLI::App * score = app.add_subcommand("score", "exact masked or causal token log-probabilities (JSONL)");
    add_common(score);
    add_grammar(score, true);
    score->add_option("--corpus", config.corpus, "corpus file (tokens or token/TAG)")->check(CLI::ExistingFile);
    score->add_option("--objective", config.objective, "masked|causal")->check(CLI::IsMember({"masked", "causal"}));
    score->add_option("--prune", config.prune, "log threshold for chart pruning (default: exact)");

    CLI::App * stats = app.add_subcommand("stats", "Zipf-Mandelbrot fit, length histogram, n-gram correlation");
    add_common(stats);
    stats->add_option("--analysis", config.analysis, "zipf|lengths|ngram")
        ->check(CLI::IsMember({"zipf", "lengths", "ngram"}));
    stats->add_option("--corpus", config.corpus, "corpus file(s)")->check(CLI::ExistingFile);
    stats->add_option("--n", config.n, "n-gram order")->check(CLI::PositiveNumber);
    stats->add_flag("--plot", config.plot, "also emit gnuplot data files");

    CLI::App * compare = app.add_subcommand("compare", "compare LM score files against grammar scores");
    add_common(compare);
    add_grammar(compare, false);
    compare->add_option("--truth", config.truth, "grammar score file (JSONL)")->check(CLI::ExistingFile)->required();
    compare->add_option("--lm", config.lm, "LM score file(s), in checkpoint order")->check(CLI::ExistingFile)->required();
    compare->add_option("--map", config.map, "TAG<TAB>CLASS file")->check(CLI::ExistingFile);
    compare->add_option("--corpus", config.corpus, "training corpus for the LM vocabulary")->check(CLI::ExistingFile);
    compare->add_option("--min-freq", config.min_freq, "minimum token frequency (else <unk>)")
        ->check(CLI::PositiveNumber);

    CLI::App * posdiv = app.add_subcommand("pos-div", "per-class LM vs grammar log-probability divergence");
    add_common(posdiv);
    add_grammar(posdiv, false);
    posdiv->add_option("--truth", config.truth, "grammar score file (JSONL)")->check(CLI::ExistingFile)->required();
    posdiv->add_option("--lm", config.lm, "LM score file")->check(CLI::ExistingFile)->required();
    posdiv->add_option("--map", config.map, "TAG<TAB>CLASS file")->check(CLI::ExistingFile);
    posdiv->add_option("--corpus", config.corpus, "training corpus for the LM vocabulary")->check(CLI::ExistingFile);
    posdiv->add_option("--min-freq", config.min_freq, "minimum token frequency (else <unk>)")
        ->check(CLI::PositiveNumber);

    auto report_error = [&](const std::string & kind, const std::string & message) {
        log << "error: " << kind << ": " << message << '\n';
        ordered_json footer;
        footer["status"] = "error";
        footer["kind"] = kind;
        footer["message"] = message;
        log << "summary: " << footer.dump() << std::endl;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        log << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        log << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError & e) {
        report_error("ConfigError", e.what());
        return 2;
    }

    for (CLI::App * sub : app.get_subcommands()) config.subcommand = sub->get_name();
    const auto started = std::chrono::steady_clock::now();
    log << "pcfglab " << config.subcommand << ": threads=" << config.threads << " seed=" << config.seed << '\n';

    try {
        ordered_json summary;
        if (config.subcommand == "sample") summary = cmdSample(config);
        else if (config.subcommand == "score") summary = cmdScore(config);
        else if (config.subcommand == "stats") summary = cmdStats(config);
        else if (config.subcommand == "compare") summary = cmdCompare(config);
        else summary = cmdPosDiv(config);

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        for (const auto & file : summary.value("files", ordered_json::array())) {
            log << "wrote " << file.get<std::string>() << '\n';
        }
        summary["status"] = "ok";
        summary["seconds"] = seconds;
        log << "summary: " << summary.dump() << std::endl;
        return 0;
    } catch (const Error & e) {
        report_error(e.kind(), e.what());
    } catch (const std::exception & e) {
        report_error("InternalError", e.what());
    }
    return 1;
}

} // namespace pcfglab::cli
