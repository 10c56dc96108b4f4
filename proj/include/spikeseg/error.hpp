#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spikeseg {

// Error categories. The CLI prints the category name verbatim so scripts can
// match on it.
enum class Errc {
  MalformedLine,
  EmptyStream,
  BadMagic,
  TruncatedStream,
  CoordinateOutOfRange,
  InvertedInterval,
  RegionOutOfBounds,
  OverlapTooLarge,
  GeometryTooSmall,
  ShapeMismatch,
  MissingRegion,
  LabelOutOfRange,
  NoValidClasses,
  ZeroTime,
  NonFiniteValue,
  NonFiniteLoss,
  NonFiniteFlow,
  EmptyCacheReuse,
  SequenceTooShort,
  MissingFlow,
  SpecInvalid,
  ConfigInvalid,
  IoFailure,
};

inline constexpr std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::EmptyStream: return "EmptyStream";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedStream: return "TruncatedStream";
    case Errc::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case Errc::InvertedInterval: return "InvertedInterval";
    case Errc::RegionOutOfBounds: return "RegionOutOfBounds";
    case Errc::OverlapTooLarge: return "OverlapTooLarge";
    case Errc::GeometryTooSmall: return "GeometryTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingRegion: return "MissingRegion";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::NoValidClasses: return "NoValidClasses";
    case Errc::ZeroTime: return "ZeroTime";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::NonFiniteFlow: return "NonFiniteFlow";
    case Errc::EmptyCacheReuse: return "EmptyCacheReuse";
    case Errc::SequenceTooShort: return "SequenceTooShort";
    case Errc::MissingFlow: return "MissingFlow";
    case Errc::SpecInvalid: return "SpecInvalid";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

// Exception carrying a category plus free-form context (usually a path,
// line number or offending value). what() is "<Category>: <context>".
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string context)
      : std::runtime_error(std::string(errc_name(code)) + ": " + context),
        code_(code),
        context_(std::move(context)) {}

  Errc code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

 private:
  Errc code_;
  std::string context_;
};

}  // namespace spikeseg
