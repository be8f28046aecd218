#pragma once

// Text artifacts.
//
// Path CSV: header `t,x1,...,xd` plus an optional trailing `sample` column
// that tells several trajectories apart (sample index or landmark index).
// Numbers use the shortest round-trip decimal form.
//
// Drift JSON: {"schema_version", "alpha", "n", "times", "u", "u_hat"} with
// u and u_hat as arrays of snapshots.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpflow/epdiff1d.hpp"
#include "mpflow/om.hpp"

namespace mpflow {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_paths_csv(std::ostream& out, const std::vector<Path>& paths);
void write_paths_csv(const std::filesystem::path& file, const std::vector<Path>& paths);
/// Always writes the sample column, with the given id per path.
void write_paths_csv(std::ostream& out, const std::vector<Path>& paths, const std::vector<std::int64_t>& sample_ids);
void write_paths_csv(const std::filesystem::path& file, const std::vector<Path>& paths,
                     const std::vector<std::int64_t>& sample_ids);

/// Trajectories in order of first appearance of their sample id.  Throws
/// InvalidArgument on a malformed header or row.
std::vector<Path> read_paths_csv(std::istream& in);
std::vector<Path> read_paths_csv(const std::filesystem::path& file);

std::string drift_to_json(const DriftSnapshots& drift);
DriftSnapshots drift_from_json(const std::string& text);
void write_drift_json(const std::filesystem::path& file, const DriftSnapshots& drift);
DriftSnapshots read_drift_json(const std::filesystem::path& file);

}  // namespace mpflow
