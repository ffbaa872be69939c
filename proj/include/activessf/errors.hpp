#pragma once

#include <stdexcept>
#include <string>

namespace activessf {

// Bad or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unusable input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file that does not follow its on-disk layout. `record` is the index of the
// offending record, or -1 when the failure is in the header or trailer.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, long long record = -1)
      : DataError(record < 0 ? what : what + " (record " + std::to_string(record) + ")"),
        record_(record) {}

  long long record() const noexcept { return record_; }

 private:
  long long record_;
};

}  // namespace activessf
