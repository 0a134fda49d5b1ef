#pragma once

#include <stdexcept>
#include <string>

namespace lazyadv {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidDimension : Error {
  using Error::Error;
};
struct InvalidArgument : Error {
  using Error::Error;
};
struct InvalidLabel : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct LengthError : Error {
  using Error::Error;
};
struct ConsistencyError : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace lazyadv
