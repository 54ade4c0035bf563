#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vdscan {

enum class ErrorKind {
  // media ingest
  UnreadableFile,
  UnsupportedFormat,
  CorruptHeader,
  PixelDataTruncated,
  UnsupportedTransferSyntax,
  // preprocessing
  SingleFrameVideo,
  ShapeMismatch,
  CropExceedsHeight,
  // clip sampling
  VideoTooShort,
  IndexOutOfRange,
  AlreadyNormalized,
  NotNormalized,
  SingleClassDataset,
  // classification
  ModelLoadError,
  EmptyPredictionSet,
  MixedVideoIds,
  MixedIndividualIds,
  // statistics
  EmptyCohort,
  EmptyInput,
  LengthMismatch,
  UndefinedClassRecall,
  MissingVdLabel,
  MalformedCohortTable,
  IdMismatch,
  // synthesis, configuration
  InvalidSpec,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every recoverable failure in the pipeline is reported as an Error carrying
/// its kind, so batch drivers can record the kind and continue.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vdscan
