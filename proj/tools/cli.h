#ifndef PCFGLAB_TOOLS_CLI_H_
#define PCFGLAB_TOOLS_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace pcfglab::cli {

struct RunConfig {
    std::string subcommand;
    std::string grammar;
    std::string lexicon;
    std::vector<std::string> corpus;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t min_len = 6;
    std::size_t max_len = 25;
    double prune = -std::numeric_limits<double>::infinity();
    std::string objective = "masked";
    std::size_t n = 2;
    std::string map;

    // sample
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;
    std::size_t eval = 0;
    std::string format = "all";
    std::size_t max_expansions = 10000;
    std::size_t max_attempts = 100000;

    // grammar loading
    double prob_floor = 0.0;
    bool renormalize = false;

    // stats
    std::string analysis = "zipf";
    bool plot = false;

    // compare / pos-div
    std::string truth;
    std::vector<std::string> lm;
    std::uint64_t min_freq = 1;
};

// Each command writes its artifacts and returns a machine-readable summary.
nlohmann::ordered_json cmdSample(const RunConfig & config);
nlohmann::ordered_json cmdScore(const RunConfig & config);
nlohmann::ordered_json cmdStats(const RunConfig & config);
nlohmann::ordered_json cmdCompare(const RunConfig & config);
nlohmann::ordered_json cmdPosDiv(const RunConfig & config);

// Full entry point: parses arguments, runs the subcommand, prints log lines
// and a final `summary: {...}` line to `log`. Returns the process exit code.
int run(int argc, const char * const * argv, std::ostream & log);

} // namespace pcfglab::cli

#endif // PCFGLAB_TOOLS_CLI_H_
