#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace morai {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated precondition of an operation (caller bug).
struct ContractError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ReplayError : Error {
  ReplayError(std::size_t event_index, const std::string& what)
      : Error("event " + std::to_string(event_index) + ": " + what), event_index(event_index) {}
  std::size_t event_index;
};

struct StructureError : Error {
  using Error::Error;
};

struct CreditError : Error {
  using Error::Error;
};

struct SplitError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

struct ModeError : Error {
  using Error::Error;
};

struct LayoutError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace morai
