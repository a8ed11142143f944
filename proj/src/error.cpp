#include "calibasis/error.hpp"

namespace calibasis {

InfeasibleConstraint::InfeasibleConstraint(double requested, double achievable, std::size_t index)
    : Error("requested variance share " + std::to_string(requested) +
            " exceeds the attainable maximum " + std::to_string(achievable)),
      requested_(requested),
      achievable_(achievable),
      index_(index) {}

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

}  // namespace calibasis
