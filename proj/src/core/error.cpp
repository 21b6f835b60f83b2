#include "neuroair/error.hpp"

namespace neuroair {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kConvergence: return "convergence";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kPipelineStage: return "pipeline_stage";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace neuroair
