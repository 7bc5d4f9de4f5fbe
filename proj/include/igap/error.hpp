#pragma once

#include <stdexcept>
#include <string>

namespace igap {

// Exit-code classes for the CLI, one per error family.
enum class Errc : int {
  Usage = 2,
  Parse = 3,
  Contract = 4,
  Numeric = 5,
  Io = 6,
};

class Error : public std::runtime_error {
public:
  Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
  ParseError(const std::string& msg, int line)
      : Error(Errc::Parse, msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

struct ContractError : Error {
  explicit ContractError(std::string msg) : Error(Errc::Contract, std::move(msg)) {}
};

struct NumericError : Error {
  explicit NumericError(std::string msg) : Error(Errc::Numeric, std::move(msg)) {}
};

struct IoError : Error {
  explicit IoError(std::string msg) : Error(Errc::Io, std::move(msg)) {}
};

}  // namespace igap
