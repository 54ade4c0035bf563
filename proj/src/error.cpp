#include "vdscan/error.hpp"

namespace vdscan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptHeader: return "CorruptHeader";
    case ErrorKind::PixelDataTruncated: return "PixelDataTruncated";
    case ErrorKind::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorKind::SingleFrameVideo: return "SingleFrameVideo";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::CropExceedsHeight: return "CropExceedsHeight";
    case ErrorKind::VideoTooShort: return "VideoTooShort";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::AlreadyNormalized: return "AlreadyNormalized";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::SingleClassDataset: return "SingleClassDataset";
    case ErrorKind::ModelLoadError: return "ModelLoadError";
    case ErrorKind::EmptyPredictionSet: return "EmptyPredictionSet";
    case ErrorKind::MixedVideoIds: return "MixedVideoIds";
    case ErrorKind::MixedIndividualIds: return "MixedIndividualIds";
    case ErrorKind::EmptyCohort: return "EmptyCohort";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UndefinedClassRecall: return "UndefinedClassRecall";
    case ErrorKind::MissingVdLabel: return "MissingVdLabel";
    case ErrorKind::MalformedCohortTable: return "MalformedCohortTable";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace vdscan
