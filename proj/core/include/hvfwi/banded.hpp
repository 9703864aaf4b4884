#pragma once

#include <vector>

namespace hvfwi {

/// Pentadiagonal system stored by diagonals.  d[i] is the main diagonal,
/// e[i] couples unknowns i and i+1, g[i] couples i and i+2 (the matrix is
/// symmetric).  Solved by an in-place banded LU without pivoting, O(n).
/// Throws SingularSystem on a vanishing pivot.
std::vector<double> solve_pentadiagonal(std::vector<double> d, std::vector<double> e,
                                        std::vector<double> g, std::vector<double> rhs);

}  // namespace hvfwi
