#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace urbanvis {

enum class Errc {
  InvalidArgument,
  InvalidGeometry,
  UnknownSegment,
  InvalidValue,
  StorageFailure,
  InsufficientClass,
  UndecodableImage,
  ImageTooSmall,
  TooFewDescriptors,
  DimensionMismatch,
  NonFiniteValue,
  MalformedHeader,
  MalformedRow,
  SingleClassInput,
  NonFiniteFeature,
  CorruptModelFile,
  LengthMismatch,
  EmptyInput,
  TooFewPoints,
  ConstantInput,
  MissingFeature,
  CorpusExhausted,
  NoModelLoaded,
  UnknownImage,
};

std::string_view errc_name(Errc code) noexcept;

/// Data error raised by every module. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace urbanvis
