#pragma once

#include <stdexcept>
#include <string>

namespace flatsomatic {

// Error categories map 1:1 onto CLI exit codes (see exit_code_for).
// 0 ok, 2 parse/io, 3 empty vocabulary, 4 config, 5 shape/argument.

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct empty_vocabulary_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct argument_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const parse_error*>(&e)) return 2;
  if (dynamic_cast<const io_error*>(&e)) return 2;
  if (dynamic_cast<const empty_vocabulary_error*>(&e)) return 3;
  if (dynamic_cast<const config_error*>(&e)) return 4;
  if (dynamic_cast<const shape_error*>(&e)) return 5;
  if (dynamic_cast<const argument_error*>(&e)) return 5;
  return 1;
}

}  // namespace flatsomatic
