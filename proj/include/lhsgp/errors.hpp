#pragma once

#include <stdexcept>
#include <string>

namespace lhsgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LHSGP_DEFINE_ERROR(Name)      \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  }

LHSGP_DEFINE_ERROR(InvalidInput);
LHSGP_DEFINE_ERROR(UnsupportedKernel);
LHSGP_DEFINE_ERROR(NotACovariance);
LHSGP_DEFINE_ERROR(NotADensity);
LHSGP_DEFINE_ERROR(NumericallySingular);
LHSGP_DEFINE_ERROR(InvalidDomain);
LHSGP_DEFINE_ERROR(ShapeError);
LHSGP_DEFINE_ERROR(InitializationFailed);
LHSGP_DEFINE_ERROR(NameMismatch);
LHSGP_DEFINE_ERROR(Undefined);

#undef LHSGP_DEFINE_ERROR

/// Raised when a log density evaluates to a non-finite value; `term()` names
/// the contribution that went bad (e.g. "likelihood_f", "prior_rho").
class NonFiniteDensity : public Error {
 public:
  NonFiniteDensity(std::string term)
      : Error("non-finite log density in term '" + term + "'"),
        term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace lhsgp
