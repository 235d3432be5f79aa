#pragma once

#include <stdexcept>
#include <string>

namespace tgnn {

// Base class for every error raised by this library. Catching tgnn::Error is
// enough to turn any pipeline failure into a diagnostic at the CLI boundary.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- container / file format errors -----------------------------------------

struct IoError final : Error {
  using Error::Error;
};

struct BadMagic final : Error {
  using Error::Error;
};

struct Truncated final : Error {
  using Error::Error;
};

struct FormatVersionMismatch final : Error {
  using Error::Error;
};

struct CorruptRecord final : Error {
  using Error::Error;
};

struct ShapeMismatch final : Error {
  using Error::Error;
};

struct LabelOutOfRange final : Error {
  using Error::Error;
};

// --- geometry / pipeline errors ---------------------------------------------

struct OutOfBounds final : Error {
  using Error::Error;
};

struct EmptyImage final : Error {
  using Error::Error;
};

struct EmptyInput final : Error {
  using Error::Error;
};

struct IndexOutOfRange final : Error {
  using Error::Error;
};

struct DegenerateTrajectory final : Error {
  using Error::Error;
};

struct DegenerateSegment final : Error {
  using Error::Error;
};

struct LengthMismatch final : Error {
  using Error::Error;
};

// --- dataset / batching errors ----------------------------------------------

struct EmptyDataset final : Error {
  using Error::Error;
};

struct EmptyBatch final : Error {
  using Error::Error;
};

struct FeatureWidthMismatch final : Error {
  using Error::Error;
};

struct ClassCountMismatch final : Error {
  using Error::Error;
};

// --- model errors -----------------------------------------------------------

struct StaleCache final : Error {
  using Error::Error;
};

struct IncompatibleModel final : Error {
  using Error::Error;
};

}  // namespace tgnn
