#pragma once

#include <cstddef>
#include <string>

namespace reluspec {

/// Byte budget for dense matrix materialization: the process-wide override
/// if set, else RELUSPEC_MEM_BUDGET_BYTES, else 2 GiB.
std::size_t memory_budget_bytes();

/// Sets the process-wide override; 0 clears it.
void set_memory_budget_override(std::size_t bytes);

/// Raises kMemory when `bytes` exceeds the budget.
void check_memory(std::size_t bytes, const std::string& what);

}  // namespace reluspec
