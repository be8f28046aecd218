#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace mpflow {

enum class WarningKind {
  NearSingularCometric,  // min eigenvalue of g* within 10x of the floor
  Underresolved,         // spectral energy piling up in the top third of modes
};

const char* to_string(WarningKind kind);

using WarningHandler = std::function<void(WarningKind, const std::string&)>;

/// Installs a process-wide warning callback (nullptr restores the default,
/// which only counts).  Thread-safe; the handler itself must be too.
void set_warning_handler(WarningHandler handler);

/// Number of warnings of `kind` emitted since start-up or the last reset.
std::uint64_t warning_count(WarningKind kind);
void reset_warning_counts();

void emit_warning(WarningKind kind, const std::string& message);

}  // namespace mpflow
