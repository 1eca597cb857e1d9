#include "cyclesql/error.hpp"

namespace cyclesql {

std::string_view to_string(ErrorKind kind) {
   switch (kind) {
      case ErrorKind::Io: return "io";
      case ErrorKind::Format: return "format";
      case ErrorKind::Integrity: return "integrity";
      case ErrorKind::NoJoinPath: return "no-join-path";
      case ErrorKind::UnsupportedSyntax: return "unsupported-syntax";
      case ErrorKind::Resolution: return "resolution";
      case ErrorKind::Assignment: return "assignment";
      case ErrorKind::EmptyDistribution: return "empty-distribution";
      case ErrorKind::UndefinedCoverage: return "undefined-coverage";
      case ErrorKind::UnfillableEnvironment: return "unfillable-environment";
      case ErrorKind::Domain: return "domain";
      case ErrorKind::EmptyColumn: return "empty-column";
      case ErrorKind::SamplingExhausted: return "sampling-exhausted";
      case ErrorKind::Execution: return "execution";
      case ErrorKind::Timeout: return "timeout";
      case ErrorKind::RejectedStatement: return "rejected-statement";
      case ErrorKind::Generation: return "generation";
      case ErrorKind::Adapter: return "adapter";
      case ErrorKind::Protocol: return "protocol";
      case ErrorKind::InvalidPrediction: return "invalid-prediction";
      case ErrorKind::Alignment: return "alignment";
      case ErrorKind::Internal: return "internal";
   }
   return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
   : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

} // namespace cyclesql
