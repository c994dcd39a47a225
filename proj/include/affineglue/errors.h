#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affineglue {

enum class ErrorKind {
  kInvalidArgument,
  kSingularAffine,
  kDegenerateResidual,
  kPointAtInfinity,
  kCheiralityFailure,
  kNoRealRoots,
  kDegenerateKernel,
  kRankDeficientSystem,
  kDegenerateConfiguration,
  kPoolExhausted,
  kNoModelFound,
  kGenerationFailure,
  kGrazingPlane,
  kEmptyInput,
  kParseError,
};

std::string_view ErrorKindName(ErrorKind kind);

// Single exception type for the library; callers switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace affineglue
