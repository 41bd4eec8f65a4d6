#pragma once

#include <stdexcept>
#include <string>

namespace negobelief {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition (counts out of range, unnormalized
// posterior, bad config, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bayes update whose product mass is zero or not finite.
class DegenerateUpdateError : public Error {
 public:
  using Error::Error;
};

class CacheMissError : public Error {
 public:
  explicit CacheMissError(std::string key)
      : Error("score cache miss for key '" + key + "'"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Remote scorer failure. Carries the number of attempts made.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " (after " + std::to_string(attempts) + " attempt" +
              (attempts == 1 ? "" : "s") + ")"),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Session event not legal in the current phase.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Agent lacks a capability the caller asked for (e.g. posterior prefixes).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace negobelief
