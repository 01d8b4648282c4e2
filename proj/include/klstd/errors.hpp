#pragma once

#include <stdexcept>
#include <string>

namespace klstd {

// A fitted or population linear system could not be solved to tolerance.
struct SingularSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An instance-family construction violated one of its defining inequalities
// (typically: sample size too small for the requested family).
struct ParameterViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The randomized packing search hit its retry cap before reaching the
// requested cardinality.
struct PackingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A function carries energy outside the span of the kernel eigenfunctions.
struct SpanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The critical inequality has no positive solution (non-positive slope).
struct NoSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace klstd
