#pragma once

#include <stdexcept>
#include <string>

namespace stream4d {

// Coarse classification used by the CLI to pick an exit code.
enum class ErrorCategory { kConfig, kData, kNumerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define STREAM4D_DEFINE_ERROR(Name, Category)                 \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what)                    \
        : Error(ErrorCategory::Category, #Name ": " + what) {} \
  };

STREAM4D_DEFINE_ERROR(ConfigError, kConfig)

STREAM4D_DEFINE_ERROR(DegenerateGeometry, kNumerical)
STREAM4D_DEFINE_ERROR(NonConvergence, kNumerical)
STREAM4D_DEFINE_ERROR(DimensionMismatch, kNumerical)

STREAM4D_DEFINE_ERROR(OutOfOrderTimestamp, kData)
STREAM4D_DEFINE_ERROR(SequenceTooShort, kData)
STREAM4D_DEFINE_ERROR(EmptyMask, kData)
STREAM4D_DEFINE_ERROR(EmptyCloud, kData)
STREAM4D_DEFINE_ERROR(NonPositiveDepth, kData)
STREAM4D_DEFINE_ERROR(BadDimensions, kData)
STREAM4D_DEFINE_ERROR(MalformedManifest, kData)
STREAM4D_DEFINE_ERROR(BadMagic, kData)
STREAM4D_DEFINE_ERROR(TruncatedFile, kData)

#undef STREAM4D_DEFINE_ERROR

// Wraps a failure with the (timestamp index, sensor) of the frame being
// processed. Keeps the category of the original error.
class FrameError : public Error {
 public:
  FrameError(const Error& inner, int timestamp_index, int sensor);
  int timestamp_index() const noexcept { return timestamp_index_; }
  int sensor() const noexcept { return sensor_; }

 private:
  int timestamp_index_;
  int sensor_;
};

// Exit codes of the command-line tool.
int exit_code_for(ErrorCategory category);

}  // namespace stream4d
