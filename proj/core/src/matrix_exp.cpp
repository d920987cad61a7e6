#include "fmrexec/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace fmrexec {

Matrix mat_exp(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("mat_exp needs a square matrix");
    const auto n = M.rows();
    const double norm = M.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm) || norm > 1e3)
        throw std::overflow_error("mat_exp: matrix norm too large for scaling and squaring");
    if (norm == 0.0) return Matrix::Identity(n, n);

    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Matrix scaled = M / std::ldexp(1.0, squarings);

    // ||scaled|| <= 0.5, so 0.5^k / k! drops below 1e-20 well before k = 24
    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 24; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-18 * result.cwiseAbs().maxCoeff()) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

}  // namespace fmrexec
