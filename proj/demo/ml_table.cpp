// Prints E_a(x) next to its closed forms for a = 1 (exp) and a = 2 (cosh of sqrt x).
#include <cmath>
#include <cstdio>

#include "mlmom/specfun.hpp"

int main() {
    std::printf("%6s %10s %22s %22s\n", "a", "x", "E_a(x)", "closed form");
    for (double x : {0.0, 0.5, 1.0, 4.0, 25.0, 100.0}) {
        std::printf("%6.2f %10.2f %22.15g %22.15g\n", 1.0, x, mlmom::mittag_leffler(1.0, x), std::exp(x));
        std::printf("%6.2f %10.2f %22.15g %22.15g\n", 2.0, x, mlmom::mittag_leffler(2.0, x), std::cosh(std::sqrt(x)));
    }
    // no elementary form in between; log values stay finite far past double range
    for (double a : {1.25, 1.5, 3.0})
        for (double x : {1.0, 50.0, 1e4})
            std::printf("%6.2f %10.4g   log E = %.15g\n", a, x, mlmom::log_mittag_leffler(a, x));
}
