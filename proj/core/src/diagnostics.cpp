#include "mpflow/diagnostics.hpp"

#include <array>
#include <atomic>
#include <mutex>

#include "mpflow/errors.hpp"

namespace mpflow {

namespace {

std::array<std::atomic<std::uint64_t>, 2> g_counts{};
std::mutex g_handler_mutex;
WarningHandler g_handler;

}  // namespace

const char* to_string(WarningKind kind) {
  switch (kind) {
    case WarningKind::NearSingularCometric:
      return "near-singular-cometric";
    case WarningKind::Underresolved:
      return "underresolved";
  }
  return "unknown";
}

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_handler_mutex);
  g_handler = std::move(handler);
}

std::uint64_t warning_count(WarningKind kind) { return g_counts[static_cast<int>(kind)].load(); }

void reset_warning_counts() {
  for (auto& c : g_counts) c.store(0);
}

void emit_warning(WarningKind kind, const std::string& message) {
  g_counts[static_cast<int>(kind)].fetch_add(1);
  WarningHandler handler;
  {
    std::lock_guard lock(g_handler_mutex);
    handler = g_handler;
  }
  if (handler) handler(kind, message);
}

EllipticityViolation::EllipticityViolation(double t, Eigen::VectorXd x, double min_eigenvalue,
                                           double floor)
    : Error("ellipticity violated at t=" + std::to_string(t) + ": min eigenvalue of cometric " +
            std::to_string(min_eigenvalue) + " < floor " + std::to_string(floor)),
      t_(t),
      x_(std::move(x)),
      min_eig_(min_eigenvalue) {}

}  // namespace mpflow
