// error.h: exception hierarchy shared by every module.
//
// Each error carries a category that the command line maps to an exit code.

#ifndef MIDAS_ERROR_H_
#define MIDAS_ERROR_H_

#include <stdexcept>
#include <string>

namespace midas {

enum class ErrorCategory { usage, data, model };

const char* to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

// Malformed or inconsistent input data (corpus files, scheme files, logs).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// A parse failure at a known line of a line-oriented file.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& detail)
      : DataError(source + ":" + std::to_string(line) + ": " + detail), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnknownTagError : public DataError {
 public:
  explicit UnknownTagError(const std::string& tag)
      : DataError("unknown tag '" + tag + "'"), tag_(tag) {}

  const std::string& tag() const { return tag_; }

 private:
  std::string tag_;
};

// Problems with trained models or model files.
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what) : Error(ErrorCategory::model, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

}  // namespace midas

#endif  // MIDAS_ERROR_H_
