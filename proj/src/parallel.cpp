#include "ticert/parallel.hpp"

namespace ticert {

namespace {
std::atomic<std::size_t> g_default_workers{0};
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  const auto hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void set_default_workers(std::size_t workers) { g_default_workers = workers; }

std::size_t default_workers() { return resolve_workers(g_default_workers); }

}  // namespace ticert
