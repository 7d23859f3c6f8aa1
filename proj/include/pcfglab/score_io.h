#ifndef PCFGLAB_SCORE_IO_H_
#define PCFGLAB_SCORE_IO_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pcfglab {

// One token occurrence with a log-probability from some source. Positions
// are 1-based within the sentence; sentence ids are 0-based line indices.
struct ScoreRecord {
    std::int64_t sentence_id = 0;
    std::int64_t position = 0;
    std::string token;
    std::string gold_tag;   // empty when unknown
    double logp = 0.0;
    std::string objective;  // "masked", "causal", or empty for external files
};

struct ScoreFile {
    std::string label;
    std::vector<ScoreRecord> records;
};

// JSONL, one object per line:
//   {"sentence_id":0,"position":1,"token":"a","gold_tag":"A","logp":-0.69,"objective":"masked"}
// gold_tag and objective are optional on input. A null logp stands for -inf.
// Throws InvalidScoreFile on malformed lines, duplicate (sentence_id,
// position) pairs, or positive log-probabilities (raw logits).
ScoreFile parseScoreFile(std::string_view jsonl, std::string label);
ScoreFile readScoreFile(const std::string & path, std::string label = {});

void writeScoreRecord(std::ostream & out, const ScoreRecord & record);
void writeScoreFile(std::ostream & out, const std::vector<ScoreRecord> & records);

} // namespace pcfglab

#endif // PCFGLAB_SCORE_IO_H_
