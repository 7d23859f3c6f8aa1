#include "pcfglab/score_io.h"

#include "pcfglab/errors.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pcfglab {

ScoreFile parseScoreFile(std::string_view jsonl, std::string label) {
    ScoreFile file;
    file.label = std::move(label);
    std::set<std::pair<std::int64_t, std::int64_t>> seen;

    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        std::string_view line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        const std::string where = file.label + ":" + std::to_string(line_number);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception & e) {
            throw InvalidScoreFile(where + ": " + e.what());
        }
        ScoreRecord r;
        try {
            r.sentence_id = j.at("sentence_id").get<std::int64_t>();
            r.position = j.at("position").get<std::int64_t>();
            r.token = j.at("token").get<std::string>();
            const auto & lp = j.at("logp");
            r.logp = lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>();
            if (j.contains("gold_tag") && !j["gold_tag"].is_null()) r.gold_tag = j["gold_tag"].get<std::string>();
            if (j.contains("objective") && !j["objective"].is_null()) r.objective = j["objective"].get<std::string>();
        } catch (const nlohmann::json::exception & e) {
            throw InvalidScoreFile(where + ": " + e.what());
        }
        if (r.position < 1) throw InvalidScoreFile(where + ": positions are 1-based");
        if (std::isnan(r.logp) || r.logp > 0.0) {
            throw InvalidScoreFile(where + ": logp " + std::to_string(r.logp) +
                                   " is not a log-probability (raw logits?)");
        }
        if (!seen.emplace(r.sentence_id, r.position).second) {
            throw InvalidScoreFile(where + ": duplicate record for sentence " + std::to_string(r.sentence_id) +
                                   " position " + std::to_string(r.position));
        }
        file.records.push_back(std::move(r));
    }
    return file;
}

ScoreFile readScoreFile(const std::string & path, std::string label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseScoreFile(buffer.str(), label.empty() ? path : std::move(label));
}

void writeScoreRecord(std::ostream & out, const ScoreRecord & r) {
    nlohmann::ordered_json j;
    j["sentence_id"] = r.sentence_id;
    j["position"] = r.position;
    j["token"] = r.token;
    j["gold_tag"] = r.gold_tag.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.gold_tag);
    j["logp"] = std::isfinite(r.logp) ? nlohmann::ordered_json(r.logp) : nlohmann::ordered_json(nullptr);
    if (!r.objective.empty()) j["objective"] = r.objective;
    out << j.dump() << '\n';
}

void writeScoreFile(std::ostream & out, const std::vector<ScoreRecord> & records) {
    for (const ScoreRecord & r : records) writeScoreRecord(out, r);
}

} // namespace pcfglab
