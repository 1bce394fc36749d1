#pragma once

#include <stdexcept>
#include <string>

namespace randse {

/// Base class for all library errors. The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficientError : Error {
  using Error::Error;
};
struct MissingInstrumentError : Error {
  using Error::Error;
};
struct WeakInstrumentError : Error {
  using Error::Error;
};
struct SingleClusterError : Error {
  using Error::Error;
};
struct InvalidSpecError : Error {
  using Error::Error;
};
struct UnsupportedSpecError : Error {
  using Error::Error;
};
struct NonpositiveVarianceError : Error {
  using Error::Error;
};
struct DegenerateSpecError : Error {
  using Error::Error;
};
struct DimensionMismatchError : Error {
  using Error::Error;
};
struct InvalidGammaError : Error {
  using Error::Error;
};
struct InvalidLevelError : Error {
  using Error::Error;
};
struct EmptyRecordsError : Error {
  using Error::Error;
};
struct AllReplicationsFailedError : Error {
  using Error::Error;
};
struct ExcessiveFailuresError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};

}  // namespace randse
