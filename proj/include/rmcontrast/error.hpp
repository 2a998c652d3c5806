#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmcontrast {

enum class ErrorKind {
  invalid_input,
  parse,
  schema,
  empty_dataset,
  sampling,
  lookup,
  configuration,
  transport,
  empty_generation,
  degenerate_embedding,
  unorientable,
  discovery,
  alignment,
  analysis,
  io,
  replay_incomplete,
  replay_mismatch,
  usage,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the toolkit carries a kind so callers (the CLI in
// particular) can map it to an exit category without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rmcontrast
