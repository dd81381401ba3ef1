#include "autoamg/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

#include "autoamg/format.hpp"

namespace autoamg {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& what)
{
    throw Error(name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

CsrMatrix read_matrix_market(std::istream& in, const std::string& name)
{
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) fail(name, 1, "empty file");
    ++line_no;
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix" ||
        lower(format) != "coordinate") {
        fail(name, line_no, "expected '%%MatrixMarket matrix coordinate' header");
    }
    field = lower(field);
    symmetry = lower(symmetry);
    if (field != "real") fail(name, line_no, "unsupported field '" + field + "'");
    if (symmetry != "general" && symmetry != "symmetric") {
        fail(name, line_no, "unsupported symmetry '" + symmetry + "'");
    }
    const bool symmetric = symmetry == "symmetric";

    std::size_t rows = 0, cols = 0, entries = 0;
    bool have_size = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%') continue;
        std::istringstream ss(line);
        std::string extra;
        if (!(ss >> rows >> cols >> entries) || (ss >> extra)) {
            fail(name, line_no, "malformed size line");
        }
        have_size = true;
        break;
    }
    if (!have_size) fail(name, line_no, "missing size line");
    if (symmetric && rows != cols) fail(name, line_no, "symmetric matrix must be square");

    std::vector<Triplet> triplets;
    triplets.reserve(symmetric ? 2 * entries : entries);
    std::vector<std::size_t> source_line;
    source_line.reserve(triplets.capacity());
    std::size_t seen = 0;
    while (seen < entries && std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%') continue;
        std::istringstream ss(line);
        long long i = 0, j = 0;
        std::string value_text, extra;
        if (!(ss >> i >> j >> value_text) || (ss >> extra)) {
            fail(name, line_no, "malformed entry");
        }
        if (i < 1 || j < 1 || static_cast<std::size_t>(i) > rows ||
            static_cast<std::size_t>(j) > cols) {
            fail(name, line_no, "index out of range");
        }
        double v = 0.0;
        try {
            v = parse_double(value_text);
        } catch (const Error&) {
            fail(name, line_no, "bad value '" + value_text + "'");
        }
        auto r = static_cast<std::size_t>(i - 1);
        auto c = static_cast<std::size_t>(j - 1);
        triplets.push_back({r, c, v});
        source_line.push_back(line_no);
        if (symmetric && r != c) {
            triplets.push_back({c, r, v});
            source_line.push_back(line_no);
        }
        ++seen;
    }
    if (seen < entries) {
        fail(name, line_no, "expected " + std::to_string(entries) + " entries, found " +
                                std::to_string(seen));
    }

    // Sort by position, keeping the originating line for duplicate reports.
    std::vector<std::size_t> order(triplets.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        const auto& a = triplets[l];
        const auto& b = triplets[r];
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& a = triplets[order[k - 1]];
        const auto& b = triplets[order[k]];
        if (a.row == b.row && a.col == b.col) {
            fail(name, std::max(source_line[order[k - 1]], source_line[order[k]]),
                 "duplicate entry (" + std::to_string(a.row + 1) + ", " +
                     std::to_string(a.col + 1) + ")");
        }
    }
    return CsrMatrix::from_triplets(rows, cols, std::move(triplets));
}

CsrMatrix read_matrix_market(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_matrix_market(in, path.string());
}

void write_matrix_market(const CsrMatrix& a, std::ostream& out)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n_rows << ' ' << a.n_cols << ' ' << a.nnz() << '\n';
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            out << i + 1 << ' ' << a.col_idx[k] + 1 << ' ' << format_double(a.values[k])
                << '\n';
        }
    }
}

void write_matrix_market(const CsrMatrix& a, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_matrix_market(a, out);
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace autoamg
