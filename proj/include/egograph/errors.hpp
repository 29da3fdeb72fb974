#pragma once

#include <stdexcept>
#include <string>

namespace egograph {

/// Base class for every error raised by the library. `kind()` is a short
/// stable tag ("parse", "shape", ...) used by the CLI in its messages.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define EGOGRAPH_DEFINE_ERROR(Name, tag)                                      \
  class Name : public Error {                                                 \
  public:                                                                     \
    explicit Name(const std::string& what) : Error(tag, what) {}              \
  };

EGOGRAPH_DEFINE_ERROR(ParseError, "parse")
EGOGRAPH_DEFINE_ERROR(LengthError, "length")
EGOGRAPH_DEFINE_ERROR(FormatError, "format")
EGOGRAPH_DEFINE_ERROR(ShapeError, "shape")
EGOGRAPH_DEFINE_ERROR(DomainError, "domain")
EGOGRAPH_DEFINE_ERROR(ParameterError, "parameter")
EGOGRAPH_DEFINE_ERROR(EmptyOutputError, "empty-output")
EGOGRAPH_DEFINE_ERROR(ConditioningError, "conditioning")
EGOGRAPH_DEFINE_ERROR(ApproximationError, "approximation")
EGOGRAPH_DEFINE_ERROR(SamplingError, "sampling")
EGOGRAPH_DEFINE_ERROR(SizeError, "size")
EGOGRAPH_DEFINE_ERROR(IoError, "io")

#undef EGOGRAPH_DEFINE_ERROR

}  // namespace egograph
