#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "cdnlb/model.hpp"

namespace cdnlb {

/// Plain-text matrix: one row per line, whitespace-separated decimals.
/// Blank lines and lines starting with '#' are skipped.
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const Matrix& m);

/// Instance config (JSON):
///   correlation: [[...], ...] or "relative/or/absolute/path.txt"
///   arrivals:    [...]
///   capacities:  [...] or scalar
///   costs:       { eta, theta, d, gamma_cost }, each an array or a scalar
/// Relative matrix paths resolve against base_dir.
SystemInstance parse_instance(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
SystemInstance load_instance(const std::filesystem::path& path);
std::string instance_to_json(const SystemInstance& instance);

/// Comma-separated list of decimals, e.g. "0.5,0.25".
Vector parse_vector_list(std::string_view text);

}  // namespace cdnlb
