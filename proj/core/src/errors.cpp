#include "bagreg/errors.hpp"

namespace bagreg {

DataError::DataError(const std::string& what, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

NonFiniteGradient::NonFiniteGradient(std::ptrdiff_t index)
    : NumericalError("non-finite gradient at parameter index " + std::to_string(index)),
      index_(index) {}

}  // namespace bagreg
