#pragma once

#include <stdexcept>
#include <string>

namespace calibasis {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// A requested variance share exceeds what the search space can deliver.
class InfeasibleConstraint : public Error {
 public:
  InfeasibleConstraint(double requested, double achievable, std::size_t index);
  double requested() const noexcept { return requested_; }
  double achievable() const noexcept { return achievable_; }
  std::size_t index() const noexcept { return index_; }

 private:
  double requested_;
  double achievable_;
  std::size_t index_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace calibasis
