#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace minekg {

enum class Errc {
  InvalidArgument,
  Io,
  // corpus / ontology
  InvalidDocument,
  MalformedFile,
  DuplicateName,
  EmptyOntology,
  EmptyInput,
  // prompt_forge
  NoEligibleDemonstration,
  // llm_gateway
  MissingCredentials,
  CassetteMiss,
  ConfigViolation,
  ProviderError,
  // ref_eval
  EmptyReference,
  ProviderFailure,
  // judge_eval
  MalformedVerdict,
  EmptyHistogram,
  MismatchedModels,
  AllVerdictsMalformed,
  MissingVerdict,
  // annotation
  KTooLarge,
  SessionCorrupt,
  // pipeline
  ConfigInvalid,
  MissingRun,
  MissingReference,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc codes so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace minekg
