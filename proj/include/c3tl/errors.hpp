#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace c3tl {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible matrix/vector shapes.
struct DimensionError : Error {
    using Error::Error;
};

/// An aggregation set (mean over contexts/perturbations) came out empty.
struct EmptyAggregationError : Error {
    using Error::Error;
};

/// Index or size outside its valid range.
struct BoundError : Error {
    using Error::Error;
};

/// Malformed input file; message carries the offending line number.
struct ParseError : Error {
    using Error::Error;
};

/// A context has observed perturbations but no control group.
struct MissingControlError : Error {
    using Error::Error;
};

/// A split produced an empty adaptation or test block.
struct DegenerateSplitError : Error {
    using Error::Error;
};

/// Attempt to read a masked (test-role) cube entry outside evaluation.
struct TestIsolationError : Error {
    using Error::Error;
};

/// Predictions do not cover exactly the expected pair set.
struct CoverageError : Error {
    using Error::Error;
};

/// Training loss became non-finite.
struct TrainingDivergedError : Error {
    TrainingDivergedError(const std::string& msg, std::size_t epoch_idx)
        : Error(msg), epoch(epoch_idx) {}
    std::size_t epoch;
};

/// Checkpoint file is inconsistent with its own declared spec.
struct CorruptCheckpointError : Error {
    using Error::Error;
};

/// Closest-cell baseline found no eligible candidate context.
struct NoCandidateError : Error {
    using Error::Error;
};

/// Synthetic world generation failed (injectivity check).
struct GenerationError : Error {
    using Error::Error;
};

/// Bad configuration (unknown keys, invalid values).
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace c3tl
