#pragma once

#include <stdexcept>
#include <string>

namespace yinyang {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unusable input data (corpus records, phrase files, token streams).
class DataError : public Error {
 public:
  using Error::Error;
};

// Training divergence, undecodable model output, exhausted candidate pools.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace yinyang
