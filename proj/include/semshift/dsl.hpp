#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "semshift/core.hpp"

namespace semshift::dsl {

enum class ErrorKind { Syntax, Semantic };

/// Parse failure with a 1-based position. Semantic errors also carry the statement text.
class DslError : public std::runtime_error {
 public:
  DslError(ErrorKind kind, int line, int column, const std::string& message,
           std::string statement = {});

  ErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& statement() const { return statement_; }

 private:
  ErrorKind kind_;
  int line_;
  int column_;
  std::string statement_;
};

/// Exactly four decimals, ties to even on the binary value, no negative zero.
std::string format_fixed4(double v);

/// Yaw rendering keeps the printed value inside [-pi/2, pi/2).
std::string format_yaw(double yaw);

/// One statement per line: walls, doors, windows, then boxes.
/// Throws std::invalid_argument for invalid scenes or categories.
std::string serialize(const StructuredScene& scene);

/// Strict single-pass parser. Throws DslError.
StructuredScene parse(std::string_view text);

/// serialize(parse(text)).
std::string canonical(std::string_view text);

/// The scene after one serialize/parse pass.
StructuredScene quantize(const StructuredScene& scene);

bool valid_category(std::string_view s);

}  // namespace semshift::dsl
