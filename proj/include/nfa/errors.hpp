#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nfa {

// Malformed or truncated binary inputs. `offset` is the byte position at
// which the reader gave up.
struct FormatError : std::runtime_error {
    FormatError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

// Non-finite values or failed numeric procedures (NaN loss, singular solve).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a batched oracle query would push the counter past its budget.
// The batch is rejected whole; `used` is the counter value at rejection time.
struct BudgetError : std::runtime_error {
    BudgetError(std::uint64_t used, std::uint64_t budget)
        : std::runtime_error("query budget exhausted: " + std::to_string(used) + " of " +
                             std::to_string(budget) + " queries used"),
          used(used),
          budget(budget) {}
    std::uint64_t used;
    std::uint64_t budget;
};

}  // namespace nfa
