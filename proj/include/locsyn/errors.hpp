#pragma once

#include <stdexcept>
#include <string>

namespace locsyn {

// Base class for all errors raised by the toolkit.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent matrix dimensions or malformed inputs.
struct DimensionError : Error {
    using Error::Error;
};

// Nonzero D22 feedthrough (the closed-loop formulas assume D22 = 0).
struct NonzeroD22Error : Error {
    using Error::Error;
};

// (iwI - A) is numerically singular: iw is an eigenvalue of A.
struct ResolventSingular : Error {
    using Error::Error;
};

// An eigenvalue or singular value computation failed to converge.
struct EigensolverFailure : Error {
    using Error::Error;
};

// The closed loop has an imaginary-axis eigenvalue: the L-infinity norm
// does not exist (reported distinctly from an unstable-but-finite norm).
struct NormInfinite : Error {
    using Error::Error;
};

// A requested level gamma <= sigma_max(D): the Hamiltonian level test is
// not defined there.
struct LevelNotAdmissible : Error {
    using Error::Error;
};

// File parsing / serialization problems.
struct FormatError : Error {
    using Error::Error;
};

}  // namespace locsyn
