#pragma once

#include <stdexcept>
#include <string>

namespace classnet {

// Every failure surfaced by the library derives from Error so callers can
// catch one type at the top level and still branch on the specific kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CLASSNET_DEFINE_ERROR(Name)            \
  class Name : public Error {                  \
   public:                                     \
    using Error::Error;                        \
  };

CLASSNET_DEFINE_ERROR(ParseError)
CLASSNET_DEFINE_ERROR(IntegrityError)
CLASSNET_DEFINE_ERROR(ArgumentError)
CLASSNET_DEFINE_ERROR(StateError)
CLASSNET_DEFINE_ERROR(NotFoundError)
CLASSNET_DEFINE_ERROR(ValidationError)
CLASSNET_DEFINE_ERROR(ClassificationError)
CLASSNET_DEFINE_ERROR(BackendError)
CLASSNET_DEFINE_ERROR(EnsembleError)
CLASSNET_DEFINE_ERROR(DegenerateError)
CLASSNET_DEFINE_ERROR(ConvergenceError)
CLASSNET_DEFINE_ERROR(DivergenceError)
CLASSNET_DEFINE_ERROR(FitError)
CLASSNET_DEFINE_ERROR(UndefinedError)

#undef CLASSNET_DEFINE_ERROR

}  // namespace classnet
