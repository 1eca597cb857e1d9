#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cyclesql {

/// Failure categories raised across the toolkit. The CLI maps these onto
/// process exit codes, tests assert on them directly.
enum class ErrorKind {
   Io,
   Format,
   Integrity,
   NoJoinPath,
   UnsupportedSyntax,
   Resolution,
   Assignment,
   EmptyDistribution,
   UndefinedCoverage,
   UnfillableEnvironment,
   Domain,
   EmptyColumn,
   SamplingExhausted,
   Execution,
   Timeout,
   RejectedStatement,
   Generation,
   Adapter,
   Protocol,
   InvalidPrediction,
   Alignment,
   Internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
   public:
   Error(ErrorKind kind, const std::string& message);

   ErrorKind kind() const noexcept { return kind_; }

   private:
   ErrorKind kind_;
};

} // namespace cyclesql
