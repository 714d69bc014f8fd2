#pragma once

#include <stdexcept>

namespace retroinc {

// Malformed or inconsistent input data: CSV schema violations, bad config
// files, records whose fields contradict their design tag.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A likelihood contribution that cannot be evaluated because the record is
// impossible under the model (e.g. a married record when the model assigns
// zero probability of ever marrying).
class EvaluationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Filesystem and process-level failures: unreadable inputs, unwritable
// output directories.
class EnvironmentError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace retroinc
