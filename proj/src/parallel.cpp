#include "cigauge/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cigauge {
namespace {

unsigned initial_limit() {
  if (const char* env = std::getenv("CI_GAUGE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<unsigned>& limit_storage() {
  static std::atomic<unsigned> limit{initial_limit()};
  return limit;
}

}  // namespace

unsigned thread_limit() { return limit_storage().load(); }

void set_thread_limit(unsigned threads) {
  limit_storage().store(std::max(1u, threads));
}

}  // namespace cigauge
