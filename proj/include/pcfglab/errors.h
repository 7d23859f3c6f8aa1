#ifndef PCFGLAB_ERRORS_H_
#define PCFGLAB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace pcfglab {

// Base class of every error raised by the toolkit. `kind()` is a stable
// machine-readable name used in CLI error reports.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string & message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string & kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define PCFGLAB_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string & message) : Error(#Name, message) {} \
    }

// grammar_core
PCFGLAB_DEFINE_ERROR(MalformedLine);
PCFGLAB_DEFINE_ERROR(ArityError);
PCFGLAB_DEFINE_ERROR(NormalizationError);
PCFGLAB_DEFINE_ERROR(UnknownStart);
PCFGLAB_DEFINE_ERROR(DivergentClosure);

// chart engines
PCFGLAB_DEFINE_ERROR(UnknownToken);
PCFGLAB_DEFINE_ERROR(NoContextParse);
PCFGLAB_DEFINE_ERROR(DeadPrefix);
PCFGLAB_DEFINE_ERROR(NoParse);

// sampler
PCFGLAB_DEFINE_ERROR(ExhaustedBudget);

// corpus_stats / lm_compare
PCFGLAB_DEFINE_ERROR(EmptyHalf);
PCFGLAB_DEFINE_ERROR(FitDiverged);
PCFGLAB_DEFINE_ERROR(DegenerateInput);
PCFGLAB_DEFINE_ERROR(TokenMismatch);
PCFGLAB_DEFINE_ERROR(UnmappedTag);
PCFGLAB_DEFINE_ERROR(InvalidScoreFile);

// generic
PCFGLAB_DEFINE_ERROR(InvalidArgument);
PCFGLAB_DEFINE_ERROR(IoError);

#undef PCFGLAB_DEFINE_ERROR

} // namespace pcfglab

#endif // PCFGLAB_ERRORS_H_
