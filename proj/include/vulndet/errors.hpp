#pragma once

#include <stdexcept>
#include <string>

namespace vulndet {

// Base for every domain error the toolkit raises. The CLI maps these to
// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define VULNDET_DEFINE_ERROR(Name)                                 \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    }

// lexing / parsing
VULNDET_DEFINE_ERROR(UnterminatedLiteral);
VULNDET_DEFINE_ERROR(NotAFunction);
VULNDET_DEFINE_ERROR(UnbalancedBraces);

// slicing
VULNDET_DEFINE_ERROR(UnknownStatement);
VULNDET_DEFINE_ERROR(EmptyChange);

// mutation
VULNDET_DEFINE_ERROR(NoCandidates);

// ingestion
VULNDET_DEFINE_ERROR(MalformedDiff);
VULNDET_DEFINE_ERROR(ParseFailure);
VULNDET_DEFINE_ERROR(TooFewPairs);

// autodiff / model
VULNDET_DEFINE_ERROR(ShapeMismatch);
VULNDET_DEFINE_ERROR(Diverged);

// ensemble / cli
VULNDET_DEFINE_ERROR(WrongArity);
VULNDET_DEFINE_ERROR(LengthMismatch);
VULNDET_DEFINE_ERROR(SizeExceeded);
VULNDET_DEFINE_ERROR(MissingCheckpoint);

#undef VULNDET_DEFINE_ERROR

} // namespace vulndet
