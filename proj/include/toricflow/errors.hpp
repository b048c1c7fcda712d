#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toricflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Facet or vertex data that cannot describe a polytope. `index` names the
/// offending facet or vertex.
class StructuralError : public Error {
 public:
  enum class Kind { kFacet, kVertex, kPolytope };
  StructuralError(Kind kind, std::size_t index, const std::string& what)
      : Error(what), kind_(kind), index_(index) {}
  Kind kind() const { return kind_; }
  std::size_t index() const { return index_; }

 private:
  Kind kind_;
  std::size_t index_;
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimensionError : public Error {
 public:
  using Error::Error;
};

/// Parse failure in a polytope or config file; `line` is 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class GridError : public Error {
 public:
  using Error::Error;
};

/// A Hessian lost positive definiteness at `node`.
class PositivityError : public Error {
 public:
  PositivityError(std::size_t node, const std::string& what)
      : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace toricflow
