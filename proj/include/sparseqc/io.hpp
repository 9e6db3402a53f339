#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sparseqc::io {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Round-trip decimal representation.
std::string fmt(double x);

/// Numeric CSV rows; a non-numeric first line is treated as a header and skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

/// Parses "1e-4,3e-4" into doubles.
std::vector<double> parse_double_list(const std::string& text);

/// Keeps large freed buffers in the heap instead of returning them to the OS
/// (glibc only; no-op elsewhere). The optimizer churns multi-megabyte arrays.
void tune_allocator();

}  // namespace sparseqc::io
