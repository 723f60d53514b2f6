#pragma once

#include <stdexcept>
#include <string>

namespace poolopt {

// Base class for every error the library raises. The CLI maps these to
// exit code 1 (input/validation) so nothing escapes as a raw abort.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnknownCurrency : Error {
    explicit UnknownCurrency(const std::string& msg) : Error(msg) {}
};
struct UnknownAlgorithm : Error {
    explicit UnknownAlgorithm(const std::string& msg) : Error(msg) {}
};
struct DuplicateId : Error {
    explicit DuplicateId(const std::string& msg) : Error(msg) {}
};
struct OutOfRangeField : Error {
    OutOfRangeField(const std::string& record, const std::string& field,
                    const std::string& detail)
        : Error(record + ": field '" + field + "' " + detail), field_name(field) {}
    std::string field_name;
};
struct EmptyInput : Error {
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};
struct NonPositiveWealth : Error {
    explicit NonPositiveWealth(const std::string& msg) : Error(msg) {}
};

struct ZeroPoolHashrate : Error {
    explicit ZeroPoolHashrate(const std::string& msg) : Error(msg) {}
};
struct BucketDeficit : Error {
    explicit BucketDeficit(const std::string& msg) : Error(msg) {}
};

struct InfeasibleAllocation : Error {
    explicit InfeasibleAllocation(const std::string& msg) : Error(msg) {}
};
struct MissingPpsPool : Error {
    explicit MissingPpsPool(const std::string& msg) : Error(msg) {}
};
struct InvalidVariant : Error {
    explicit InvalidVariant(const std::string& msg) : Error(msg) {}
};
struct ZeroDraws : Error {
    explicit ZeroDraws(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};
struct NonFiniteObjective : Error {
    explicit NonFiniteObjective(const std::string& msg) : Error(msg) {}
};
struct SolverFailed : Error {
    explicit SolverFailed(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    ParseError(std::size_t line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line_number(line) {}
    std::size_t line_number;
};
struct NonMonotoneDates : Error {
    explicit NonMonotoneDates(const std::string& msg) : Error(msg) {}
};
struct MissingColumn : Error {
    explicit MissingColumn(const std::string& msg) : Error(msg) {}
};
struct EmptyWindow : Error {
    explicit EmptyWindow(const std::string& msg) : Error(msg) {}
};
struct ZeroVariance : Error {
    explicit ZeroVariance(const std::string& msg) : Error(msg) {}
};
struct NonMonotoneGrid : Error {
    explicit NonMonotoneGrid(const std::string& msg) : Error(msg) {}
};

}  // namespace poolopt
