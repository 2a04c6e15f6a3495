#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvd {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, std::string reason)
      : Error("parse error at row " + std::to_string(row) + ", column '" + column + "': " + reason),
        row_(row),
        column_(std::move(column)),
        reason_(std::move(reason)) {}

  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t row_;
  std::string column_;
  std::string reason_;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class TypeError : public Error {
 public:
  using Error::Error;
};

class UnknownColumn : public Error {
 public:
  explicit UnknownColumn(const std::string& column)
      : Error("unknown column '" + column + "'"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class UnknownRelation : public Error {
 public:
  explicit UnknownRelation(const std::string& name) : Error("unknown relation '" + name + "'") {}
};

class UnboundChoice : public Error {
 public:
  explicit UnboundChoice(const std::string& id)
      : Error("choice '" + id + "' is not bound"), choice_id_(id) {}
  const std::string& choice_id() const { return choice_id_; }

 private:
  std::string choice_id_;
};

class OutOfDomain : public Error {
 public:
  OutOfDomain(const std::string& id, const std::string& value)
      : Error("value " + value + " is outside the domain of choice '" + id + "'"), choice_id_(id) {}
  const std::string& choice_id() const { return choice_id_; }

 private:
  std::string choice_id_;
};

class DomainExplosion : public Error {
 public:
  DomainExplosion(std::size_t size, std::size_t cap)
      : Error("binding space of " + std::to_string(size) + " exceeds cap " + std::to_string(cap)),
        size_(size) {}
  std::size_t size() const { return size_; }

 private:
  std::size_t size_;
};

class CapExceeded : public Error {
 public:
  CapExceeded(std::size_t cells, std::size_t cap)
      : Error("structure needs " + std::to_string(cells) + " cells, cap is " + std::to_string(cap)),
        cells_(cells) {}
  std::size_t cells() const { return cells_; }

 private:
  std::size_t cells_;
};

class StaleStructure : public Error {
 public:
  using Error::Error;
};

class MissingStats : public Error {
 public:
  explicit MissingStats(const std::string& column) : Error("no statistics for column '" + column + "'") {}
};

class PlanFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvd

namespace pvd {

/// A binding that violates a lower <= upper range constraint.
class InvalidRange : public Error {
 public:
  InvalidRange(const std::string& lower, const std::string& upper)
      : Error("range choice '" + lower + "' exceeds '" + upper + "'") {}
};

}  // namespace pvd
