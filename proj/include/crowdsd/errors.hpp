#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowdsd {

// Base of every error raised by the library. Subclasses name the failed
// contract so callers can catch the ones they know how to recover from.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CROWDSD_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

CROWDSD_DEFINE_ERROR(InvalidArgument);
CROWDSD_DEFINE_ERROR(TooFewPoints);
CROWDSD_DEFINE_ERROR(IsolatedScene);
CROWDSD_DEFINE_ERROR(PointOutOfBounds);
CROWDSD_DEFINE_ERROR(NoPositives);
CROWDSD_DEFINE_ERROR(MisalignedPredictions);
CROWDSD_DEFINE_ERROR(NonFiniteSize);
CROWDSD_DEFINE_ERROR(NoGroundTruth);
CROWDSD_DEFINE_ERROR(ZeroGroundTruthCount);
CROWDSD_DEFINE_ERROR(BadShape);
CROWDSD_DEFINE_ERROR(StaleCache);
CROWDSD_DEFINE_ERROR(ShapeMismatch);
CROWDSD_DEFINE_ERROR(InfeasibleSpec);
CROWDSD_DEFINE_ERROR(MissingImage);
CROWDSD_DEFINE_ERROR(ConfigError);
CROWDSD_DEFINE_ERROR(DivergedLoss);
CROWDSD_DEFINE_ERROR(MissingGroundTruth);
CROWDSD_DEFINE_ERROR(IoError);

#undef CROWDSD_DEFINE_ERROR

// Malformed input file; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace crowdsd
