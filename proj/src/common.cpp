#include "icelut/error.hpp"

namespace icelut {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::InvalidBins: return "InvalidBins";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedGroupLength: return "UnsupportedGroupLength";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

}  // namespace icelut
