#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vitalcast {

enum class Errc {
  MediaToolMissing,
  UnreadableVideo,
  MediaToolFailure,
  RoiOutOfBounds,
  InvalidRoi,
  EmptyImage,
  InvalidArgument,
  EngineMissing,
  EngineFailure,
  NoGlyphFound,
  EmptySeries,
  MissingColumn,
  EmptyExport,
  ZeroVariance,
  TooFewPairs,
  UnknownFeature,
  IoFailure,
  BadDuration,
  ConfigError,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MediaToolMissing: return "MediaToolMissing";
    case Errc::UnreadableVideo: return "UnreadableVideo";
    case Errc::MediaToolFailure: return "MediaToolFailure";
    case Errc::RoiOutOfBounds: return "RoiOutOfBounds";
    case Errc::InvalidRoi: return "InvalidRoi";
    case Errc::EmptyImage: return "EmptyImage";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EngineMissing: return "EngineMissing";
    case Errc::EngineFailure: return "EngineFailure";
    case Errc::NoGlyphFound: return "NoGlyphFound";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyExport: return "EmptyExport";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::TooFewPairs: return "TooFewPairs";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::IoFailure: return "IoFailure";
    case Errc::BadDuration: return "BadDuration";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), message_(what) {}

  Errc code() const noexcept { return code_; }
  /// what() without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace vitalcast
