#ifndef PERMSAMP_MATRIX_MARKET_HPP
#define PERMSAMP_MATRIX_MARKET_HPP

#include <iosfwd>
#include <string>

#include "permsamp/matrix.hpp"

namespace permsamp {

// Reads a Matrix Market file into a dense matrix.
//
// Accepted headers: `%%MatrixMarket matrix {coordinate|array}
// {real|integer|pattern} {general|symmetric}`. Symmetric storage is mirrored,
// pattern entries become 1.0, unlisted coordinate entries are 0.0. Duplicate
// coordinate entries are rejected rather than summed.
//
// Errors: MalformedHeader, NonSquare, NegativeEntry, DuplicateEntry; each
// message names the offending line.
NonNegativeMatrix read_matrix_market(const std::string& path);
NonNegativeMatrix read_matrix_market(std::istream& in, const std::string& name = "<stream>");

// Writes coordinate-format Matrix Market (general symmetry, real field) with
// 17 significant digits, so read_matrix_market(write_matrix_market(m)) == m
// element-wise exactly.
void write_matrix_market(const NonNegativeMatrix& m, const std::string& path);
void write_matrix_market(const NonNegativeMatrix& m, std::ostream& out);

} // namespace permsamp

#endif
