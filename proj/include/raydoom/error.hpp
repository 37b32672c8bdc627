#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace raydoom {

enum class ErrorKind {
  SyntaxError,
  UnknownKey,
  ValueOutOfRange,
  NonRectangularMap,
  UnenclosedMap,
  NoPlayerSpawn,
  ScenarioLoadError,
  InvalidConfig,
  EpisodeFinished,
  ModeMismatch,
  ShapeMismatch,
  NoForwardCache,
  TruncatedMessage,
  UnknownTag,
  ProtocolError,
  ClientDisconnected,
  CorruptRecording,
  HashMismatch,
  InvalidArgument,
  IoError,
  CorruptCheckpoint,
};

std::string_view error_kind_name(ErrorKind kind);

// Every failure the library reports carries one of the kinds above; `line` is
// set (1-based) for text-format errors and 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, int line = 0);

  ErrorKind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  int line_;
};

}  // namespace raydoom
