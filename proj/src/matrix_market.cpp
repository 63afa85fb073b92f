#include "permsamp/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace permsamp {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct Header {
    bool coordinate = true;
    bool pattern = false;
    bool symmetric = false;
};

Header parse_header(const std::string& line, const std::string& name) {
    std::istringstream ss(line);
    std::string banner, object, format, field, symmetry;
    ss >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix") {
        throw MalformedHeader(name + ":1: not a Matrix Market matrix header: \"" + line + "\"");
    }
    Header h;
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    if (format == "coordinate") {
        h.coordinate = true;
    } else if (format == "array") {
        h.coordinate = false;
    } else {
        throw MalformedHeader(name + ":1: unsupported format \"" + format + "\"");
    }
    if (field == "pattern") {
        h.pattern = true;
        if (!h.coordinate) throw MalformedHeader(name + ":1: pattern field requires coordinate format");
    } else if (field != "real" && field != "integer") {
        throw MalformedHeader(name + ":1: unsupported field \"" + field + "\"");
    }
    if (symmetry == "symmetric") {
        h.symmetric = true;
    } else if (symmetry != "general") {
        throw MalformedHeader(name + ":1: unsupported symmetry \"" + symmetry + "\"");
    }
    return h;
}

} // namespace

NonNegativeMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_matrix_market(in, path);
}

NonNegativeMatrix read_matrix_market(std::istream& in, const std::string& name) {
    std::string line;
    long lineno = 0;

    if (!std::getline(in, line)) throw MalformedHeader(name + ":1: empty file");
    lineno = 1;
    const Header h = parse_header(line, name);

    auto next_data_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            const auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos) continue; // blank
            if (line[pos] == '%') continue;         // comment
            return true;
        }
        return false;
    };

    if (!next_data_line()) throw MalformedHeader(name + ": missing size line");

    std::istringstream size_ss(line);
    long rows = -1, cols = -1, nnz = -1;
    if (h.coordinate) {
        if (!(size_ss >> rows >> cols >> nnz) || rows < 1 || cols < 1 || nnz < 0) {
            throw MalformedHeader(name + ":" + std::to_string(lineno) + ": bad coordinate size line \"" + line + "\"");
        }
    } else {
        if (!(size_ss >> rows >> cols) || rows < 1 || cols < 1) {
            throw MalformedHeader(name + ":" + std::to_string(lineno) + ": bad array size line \"" + line + "\"");
        }
    }
    if (rows != cols) {
        throw NonSquare(name + ":" + std::to_string(lineno) + ": matrix is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", need square");
    }
    const int n = static_cast<int>(rows);
    std::vector<double> entries(static_cast<std::size_t>(n) * n, 0.0);

    auto check_value = [&](double v) {
        if (!std::isfinite(v) || v < 0.0) {
            throw NegativeEntry(name + ":" + std::to_string(lineno) + ": entry " + std::to_string(v) +
                                " violates non-negativity");
        }
    };

    if (h.coordinate) {
        std::vector<bool> seen(entries.size(), false);
        for (long e = 0; e < nnz; ++e) {
            if (!next_data_line()) {
                throw MalformedHeader(name + ": expected " + std::to_string(nnz) + " entries, file ended after " +
                                      std::to_string(e));
            }
            std::istringstream es(line);
            long i = 0, j = 0;
            double v = 1.0;
            if (!(es >> i >> j)) {
                throw MalformedHeader(name + ":" + std::to_string(lineno) + ": bad entry line \"" + line + "\"");
            }
            if (!h.pattern && !(es >> v)) {
                throw MalformedHeader(name + ":" + std::to_string(lineno) + ": missing value in \"" + line + "\"");
            }
            if (i < 1 || i > n || j < 1 || j > n) {
                throw MalformedHeader(name + ":" + std::to_string(lineno) + ": index (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") out of range");
            }
            check_value(v);
            const std::size_t idx = static_cast<std::size_t>(i - 1) * n + (j - 1);
            if (seen[idx]) {
                throw DuplicateEntry(name + ":" + std::to_string(lineno) + ": duplicate entry (" + std::to_string(i) +
                                     "," + std::to_string(j) + ")");
            }
            seen[idx] = true;
            entries[idx] = v;
            if (h.symmetric && i != j) {
                const std::size_t mirror = static_cast<std::size_t>(j - 1) * n + (i - 1);
                if (seen[mirror]) {
                    throw DuplicateEntry(name + ":" + std::to_string(lineno) + ": duplicate entry (" +
                                         std::to_string(j) + "," + std::to_string(i) + ") via symmetry");
                }
                seen[mirror] = true;
                entries[mirror] = v;
            }
        }
    } else {
        // Array format: column-major dense listing. Symmetric array files list
        // the lower triangle only.
        auto read_value = [&]() -> double {
            if (!next_data_line()) throw MalformedHeader(name + ": array data ended early");
            std::istringstream es(line);
            double v = 0.0;
            if (!(es >> v)) {
                throw MalformedHeader(name + ":" + std::to_string(lineno) + ": bad array value \"" + line + "\"");
            }
            check_value(v);
            return v;
        };
        for (int j = 0; j < n; ++j) {
            for (int i = h.symmetric ? j : 0; i < n; ++i) {
                const double v = read_value();
                entries[static_cast<std::size_t>(i) * n + j] = v;
                if (h.symmetric) entries[static_cast<std::size_t>(j) * n + i] = v;
            }
        }
    }

    return NonNegativeMatrix(n, std::move(entries));
}

void write_matrix_market(const NonNegativeMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    write_matrix_market(m, out);
    if (!out) throw InputError("write to " + path + " failed");
}

void write_matrix_market(const NonNegativeMatrix& m, std::ostream& out) {
    const int n = m.n();
    long nnz = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (m(i, j) != 0.0) ++nnz;

    out << "%%MatrixMarket matrix coordinate real general\n";
    out << n << " " << n << " " << nnz << "\n";
    char buf[64];
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (m(i, j) == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << (i + 1) << " " << (j + 1) << " " << buf << "\n";
        }
    }
}

} // namespace permsamp
