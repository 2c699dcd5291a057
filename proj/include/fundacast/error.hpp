#pragma once

#include <stdexcept>
#include <string>

namespace fundacast {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FUNDACAST_DEFINE_ERROR(Name)      \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

// ingest
FUNDACAST_DEFINE_ERROR(SchemaError)
FUNDACAST_DEFINE_ERROR(OrderingError)
FUNDACAST_DEFINE_ERROR(ValueError)
FUNDACAST_DEFINE_ERROR(NoDataError)

// valuation / dataset
FUNDACAST_DEFINE_ERROR(InsufficientDataError)
FUNDACAST_DEFINE_ERROR(NonPositiveRevenueError)
FUNDACAST_DEFINE_ERROR(DegenerateBaseError)
FUNDACAST_DEFINE_ERROR(PreconditionError)
FUNDACAST_DEFINE_ERROR(AlignmentError)

// models
FUNDACAST_DEFINE_ERROR(ShapeError)
FUNDACAST_DEFINE_ERROR(DivergenceError)
FUNDACAST_DEFINE_ERROR(FormatError)
FUNDACAST_DEFINE_ERROR(VersionError)

// metrics
FUNDACAST_DEFINE_ERROR(LengthMismatchError)
FUNDACAST_DEFINE_ERROR(EmptyEvaluationError)

// cli
FUNDACAST_DEFINE_ERROR(ConfigError)

#undef FUNDACAST_DEFINE_ERROR

}  // namespace fundacast
