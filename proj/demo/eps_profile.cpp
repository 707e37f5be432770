// Decay of the angular constant eps_q for the three kernel families.
#include <cstdio>

#include "mlmom/kernels.hpp"

int main() {
    using mlmom::AngularKernel;
    struct Row {
        const char* label;
        AngularKernel k;
        double beta;
    };
    const Row rows[] = {{"bounded b0=1", AngularKernel::grad_bounded(1.0), 0.1},
                        {"power nu=1", AngularKernel::power_law(1.0), 2.0},
                        {"truncated nu=1.5", AngularKernel::truncated(1.5, 1e-3), 1.6}};
    const auto grid = mlmom::doubling_grid(4, 1024);
    for (const auto& r : rows) {
        const auto p = mlmom::epsilon_decay_profile(r.k, r.beta, grid, 4);
        std::printf("%s (beta = %.1f)\n", r.label, r.beta);
        for (std::size_t i = 0; i < p.q.size(); ++i)
            std::printf("  q = %5.0f  eps = %.6e  normalized = %.6e\n", p.q[i], p.values[i], p.normalized[i]);
        std::printf("  final/at q=32: %.4f\n", p.final_over(32));
    }
}
