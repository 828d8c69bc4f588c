#include "stream4d/errors.hpp"

namespace stream4d {

FrameError::FrameError(const Error& inner, int timestamp_index, int sensor)
    : Error(inner.category(), "[t=" + std::to_string(timestamp_index) +
                                  ", sensor=" + std::to_string(sensor) + "] " +
                                  inner.what()),
      timestamp_index_(timestamp_index),
      sensor_(sensor) {}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig:
      return 2;
    case ErrorCategory::kData:
      return 3;
    case ErrorCategory::kNumerical:
      return 4;
  }
  return 1;
}

}  // namespace stream4d
