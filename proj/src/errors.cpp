#include "dqsim/errors.hpp"

namespace dqsim {

const char* to_string(EstimatorErrc code) noexcept {
  switch (code) {
    case EstimatorErrc::ArmEmpty: return "ArmEmpty";
    case EstimatorErrc::MissingObservation: return "MissingObservation";
    case EstimatorErrc::NoSamples: return "NoSamples";
    case EstimatorErrc::TruncationTooLong: return "TruncationTooLong";
    case EstimatorErrc::InsufficientData: return "InsufficientData";
    case EstimatorErrc::WrongDesign: return "WrongDesign";
  }
  return "EstimatorError";
}

}  // namespace dqsim
