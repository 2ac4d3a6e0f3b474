#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xchan {

// Root of every error the library throws. Callers that only care about
// "something went wrong in xchan" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: a bad corpus line, a shape mismatch, a violated
// precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public InvalidInput {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InvalidInput("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Loss or gradient became non-finite. Carries whatever history was
// collected before the failure.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Remote provider or backend failed (after retries, if any).
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, bool retryable = true)
      : Error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// A pipeline stage needs an upstream artifact that does not exist yet.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& artifact)
      : Error("missing artifact: " + artifact), artifact_(artifact) {}
  const std::string& artifact() const { return artifact_; }

 private:
  std::string artifact_;
};

}  // namespace xchan
