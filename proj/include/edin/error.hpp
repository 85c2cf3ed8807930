#pragma once

#include <stdexcept>
#include <string>

namespace edin {

// Failure kinds surfaced across the toolkit. The CLI maps categories to
// exit codes (1 validation, 2 data, 3 internal).
enum class Err {
  MissingFile,
  MalformedRecord,
  DuplicateId,
  SpanOutOfBounds,
  EmptyWindow,
  NoUnknownMentions,
  RemoteUnavailable,
  LookupMiss,
  DimensionMismatch,
  CorruptIndex,
  EmptyIndex,
  EmptyCluster,
  NoGoldLabels,
  MissingGoldLabel,
  PartitionMismatch,
  DegenerateGroups,
  InvalidArgument,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(Err kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Err kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case Err::MissingFile:
      case Err::InvalidArgument:
        return 1;
      case Err::Internal:
        return 3;
      default:
        return 2;
    }
  }

 private:
  Err kind_;
};

[[noreturn]] inline void raise(Err kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace edin
