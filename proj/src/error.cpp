#include "minekg/error.hpp"

namespace minekg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::InvalidDocument: return "InvalidDocument";
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::EmptyOntology: return "EmptyOntology";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoEligibleDemonstration: return "NoEligibleDemonstration";
    case Errc::MissingCredentials: return "MissingCredentials";
    case Errc::CassetteMiss: return "CassetteMiss";
    case Errc::ConfigViolation: return "ConfigViolation";
    case Errc::ProviderError: return "ProviderError";
    case Errc::EmptyReference: return "EmptyReference";
    case Errc::ProviderFailure: return "ProviderFailure";
    case Errc::MalformedVerdict: return "MalformedVerdict";
    case Errc::EmptyHistogram: return "EmptyHistogram";
    case Errc::MismatchedModels: return "MismatchedModels";
    case Errc::AllVerdictsMalformed: return "AllVerdictsMalformed";
    case Errc::MissingVerdict: return "MissingVerdict";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::SessionCorrupt: return "SessionCorrupt";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingRun: return "MissingRun";
    case Errc::MissingReference: return "MissingReference";
  }
  return "Unknown";
}

}  // namespace minekg
