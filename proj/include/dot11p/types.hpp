#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace dot11p {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using bitvec = std::vector<std::uint8_t>;

inline double sq_norm(const cvec& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return s;
}

// complex <-> stacked-real conversion: [Re(v); Im(v)]
inline std::vector<double> stack_reim(const cvec& v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i].real();
        out[v.size() + i] = v[i].imag();
    }
    return out;
}

inline cvec unstack_reim(const std::vector<double>& x) {
    cvec out(x.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cplx(x[i], x[out.size() + i]);
    return out;
}

}  // namespace dot11p
