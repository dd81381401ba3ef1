#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "autoamg/sparse.hpp"

namespace autoamg {

/// Reads a real coordinate Matrix Market file (general or symmetric).
/// Symmetric storage is expanded on read. Errors name the offending line.
CsrMatrix read_matrix_market(const std::filesystem::path& path);
CsrMatrix read_matrix_market(std::istream& in, const std::string& name = "<stream>");

/// Writes "coordinate real general" with round-trip exact values.
void write_matrix_market(const CsrMatrix& a, const std::filesystem::path& path);
void write_matrix_market(const CsrMatrix& a, std::ostream& out);

}  // namespace autoamg
