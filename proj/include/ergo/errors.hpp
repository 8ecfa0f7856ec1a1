#pragma once

#include <stdexcept>
#include <string>

namespace ergo {

// Base of every library error. `category` maps onto CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { config = 3, hypothesis = 1, numerical = 2 };
    Error(Category c, const std::string& what) : std::runtime_error(what), category_(c) {}
    Category category() const { return category_; }

private:
    Category category_;
};

#define ERGO_DEFINE_ERROR(Name, Cat)                                                    \
    class Name : public Error {                                                         \
    public:                                                                             \
        explicit Name(const std::string& what) : Error(Error::Category::Cat, what) {}  \
    }

ERGO_DEFINE_ERROR(ConfigError, config);
ERGO_DEFINE_ERROR(WindowTooShort, config);
ERGO_DEFINE_ERROR(NondegeneracyViolation, hypothesis);
ERGO_DEFINE_ERROR(StepTooLarge, hypothesis);
ERGO_DEFINE_ERROR(ConditionViolated, hypothesis);
ERGO_DEFINE_ERROR(HypothesisViolated, hypothesis);
ERGO_DEFINE_ERROR(InfeasibleScales, hypothesis);
ERGO_DEFINE_ERROR(QCapExceeded, hypothesis);
ERGO_DEFINE_ERROR(MissingInput, hypothesis);
ERGO_DEFINE_ERROR(NearSingular, numerical);
ERGO_DEFINE_ERROR(ConsistencyFailure, numerical);
ERGO_DEFINE_ERROR(ReverificationFailure, numerical);

#undef ERGO_DEFINE_ERROR

}  // namespace ergo
