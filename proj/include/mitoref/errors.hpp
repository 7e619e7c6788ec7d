#pragma once

#include <stdexcept>
#include <string>

namespace mitoref {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or contract-violating input file (bad header, bad token,
/// violated field invariant).
struct SchemaError : Error {
    using Error::Error;
};

/// Duplicate image id within one source of a dataset manifest.
struct DuplicateImageId : SchemaError {
    using SchemaError::SchemaError;
};

/// Degenerate or self-intersecting polygon.
struct GeometryError : Error {
    using Error::Error;
};

/// Too few above-threshold optical-density pixels to fit a stain basis;
/// signals a blank/white tile.
struct InsufficientTissue : Error {
    using Error::Error;
};

/// Shape too small to yield stable moments.
struct DegenerateShape : Error {
    using Error::Error;
};

struct EmptyEnsemble : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

/// A metric is undefined because one class is absent.
struct UndefinedMetric : Error {
    using Error::Error;
};

struct EmptyClass : Error {
    using Error::Error;
};

struct TooFewPatients : Error {
    using Error::Error;
};

/// Prediction and truth files do not cover the same image ids.
struct IdMismatch : Error {
    using Error::Error;
};

/// An image requested by the run manifest has no model scores.
struct MissingScores : Error {
    using Error::Error;
};

/// Filesystem or codec failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace mitoref
