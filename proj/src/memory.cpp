#include "reluspec/memory.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "reluspec/error.hpp"

namespace reluspec {

namespace {
std::atomic<std::size_t> g_override{0};
}  // namespace

void set_memory_budget_override(std::size_t bytes) { g_override = bytes; }

std::size_t memory_budget_bytes() {
  if (const std::size_t o = g_override.load(); o != 0) return o;
  constexpr std::size_t kDefault = std::size_t{2} << 30;
  const char* env = std::getenv("RELUSPEC_MEM_BUDGET_BYTES");
  if (env == nullptr || *env == '\0') return kDefault;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  require(end != env && *end == '\0', ErrorCode::kConfig,
          std::string("RELUSPEC_MEM_BUDGET_BYTES is not an integer: ") + env);
  return static_cast<std::size_t>(v);
}

void check_memory(std::size_t bytes, const std::string& what) {
  const std::size_t budget = memory_budget_bytes();
  if (bytes > budget) {
    fail(ErrorCode::kMemory, what + " needs " + std::to_string(bytes) + " bytes, budget is " +
                                 std::to_string(budget) + "");
  }
}

}  // namespace reluspec
