#include "raydoom/error.hpp"

namespace raydoom {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::NonRectangularMap: return "NonRectangularMap";
    case ErrorKind::UnenclosedMap: return "UnenclosedMap";
    case ErrorKind::NoPlayerSpawn: return "NoPlayerSpawn";
    case ErrorKind::ScenarioLoadError: return "ScenarioLoadError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EpisodeFinished: return "EpisodeFinished";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NoForwardCache: return "NoForwardCache";
    case ErrorKind::TruncatedMessage: return "TruncatedMessage";
    case ErrorKind::UnknownTag: return "UnknownTag";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::ClientDisconnected: return "ClientDisconnected";
    case ErrorKind::CorruptRecording: return "CorruptRecording";
    case ErrorKind::HashMismatch: return "HashMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, int line)
    : std::runtime_error(std::string(error_kind_name(kind)) + (line > 0 ? " (line " + std::to_string(line) + ")" : "") +
                         ": " + message),
      kind_(kind),
      line_(line) {}

}  // namespace raydoom
