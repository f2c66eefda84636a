#pragma once

#include <stdexcept>
#include <string>

namespace nonlocal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define NONLOCAL_DEFINE_ERROR(Name)                  \
    class Name : public Error {                      \
    public:                                          \
        explicit Name(const std::string& what)       \
            : Error(#Name ": " + what) {}            \
    }

NONLOCAL_DEFINE_ERROR(InvalidArgument);
NONLOCAL_DEFINE_ERROR(NotSpd);
NONLOCAL_DEFINE_ERROR(EmptyPartition);
NONLOCAL_DEFINE_ERROR(CollarOverflow);
NONLOCAL_DEFINE_ERROR(NoNeighbors);
NONLOCAL_DEFINE_ERROR(OutOfDomain);
NONLOCAL_DEFINE_ERROR(SingularRow);
NONLOCAL_DEFINE_ERROR(DimensionMismatch);
NONLOCAL_DEFINE_ERROR(Breakdown);
NONLOCAL_DEFINE_ERROR(NotConverged);
NONLOCAL_DEFINE_ERROR(QuadratureNotConverged);
NONLOCAL_DEFINE_ERROR(NonConstantCoefficient);
NONLOCAL_DEFINE_ERROR(NonPositive);

#undef NONLOCAL_DEFINE_ERROR

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw DimensionMismatch(std::string(what) + " (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

} // namespace nonlocal
