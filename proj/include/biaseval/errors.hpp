#pragma once

#include <stdexcept>
#include <string>

namespace biaseval {

// Base class for every error raised by the library. The CLI surfaces the
// what() string verbatim and maps the class to an exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class EmptySample : public Error {
 public:
  explicit EmptySample(const std::string& which)
      : Error("EmptySample: " + which + " contains no scores") {}
};

class NonFiniteScore : public Error {
 public:
  explicit NonFiniteScore(const std::string& context)
      : Error("NonFiniteScore: " + context) {}
};

// A per-metric call was made on a partition that lacks a required sample.
class MetricUndefined : public Error {
 public:
  MetricUndefined(const std::string& metric, const std::string& missing)
      : Error("MetricUndefined: " + metric + " requires nonempty " + missing),
        metric_(metric),
        missing_sample_(missing) {}
  const std::string& metric() const { return metric_; }
  const std::string& missing_sample() const { return missing_sample_; }

 private:
  std::string metric_;
  std::string missing_sample_;
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& msg) : Error("InvalidSpec: " + msg) {}
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& column)
      : Error("MissingColumn: input has no column '" + column + "'") {}
};

class MissingLength : public Error {
 public:
  explicit MissingLength(const std::string& id)
      : Error("MissingLength: max_chars filter set but example '" + id +
              "' has no char_length") {}
};

class BadTemplate : public Error {
 public:
  explicit BadTemplate(const std::string& pattern)
      : Error("BadTemplate: pattern must contain the placeholder exactly once: '" +
              pattern + "'") {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& msg)
      : Error("IoError: " + path + ": " + msg) {}
};

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& msg) : Error("AuthError: " + msg) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& msg) : Error("SchemaError: " + msg) {}
};

class RateLimited : public Error {
 public:
  explicit RateLimited(const std::string& msg) : Error("RateLimited: " + msg) {}
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& fmt)
      : Error("UnsupportedFormat: " + fmt) {}
};

class NoQualifyingSubgroups : public Error {
 public:
  explicit NoQualifyingSubgroups(const std::string& msg)
      : Error("NoQualifyingSubgroups: " + msg) {}
};

class ScoreCoverageGap : public Error {
 public:
  explicit ScoreCoverageGap(const std::string& msg)
      : Error("ScoreCoverageGap: " + msg) {}
};

}  // namespace biaseval
