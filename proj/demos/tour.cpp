// Walkthrough of the library: build a frame with a prescribed spectrum,
// reorder a stubborn instance, verify independently, and assemble a weighted
// fusion frame.

#include <cstdio>

#include "spectral_tetris/spectral_tetris.hpp"

using namespace spectral_tetris;

namespace {

void print_dense(const char* name, const Matrix& m) {
    std::printf("%s (%dx%d):\n", name, m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) std::printf(" % 9.5f", m(i, j));
        std::printf("\n");
    }
}

} // namespace

int main() {
    // Four vectors in R^2 with squared norms (1,3,2,2) and frame operator
    // eigenvalues (2,6). The greedy layout closes row 1 with a 2x2 block
    // whose rows stay orthogonal.
    {
        NormSequence norms({1, 3, 2, 2});
        Spectrum spectrum({2, 6});
        StcOutcome out = stc_construct(norms, spectrum);
        print_dense("frame", out.frame->dense());
        VerificationReport report = audit(*out.frame, spectrum, norms);
        std::printf("verified: %s (max spectrum deviation %.2e)\n\n", report.pass ? "yes" : "no",
                    report.spectrum_max_dev);
    }

    // This ordering is not directly constructible; the swap hook repairs it
    // by transposing two adjacent norms mid-run.
    {
        NormSequence norms({2, 2, 1.8, 0.5, 1.7, 2});
        Spectrum spectrum({5, 5});
        StrOutcome out = str_construct(norms, spectrum);
        std::printf("swaps:");
        for (auto [a, b] : out.swaps) std::printf(" (%d,%d)", a, b);
        std::printf("\n");
        print_dense("reordered frame", out.frame->dense());
        std::printf("\n");
    }

    // Six weight-1 lines in R^3 forming a tight weighted fusion frame: the
    // constructor picks an ordering, checks the feasibility conditions, and
    // returns the partition into subspaces.
    {
        FusionProblem problem;
        for (int k = 0; k < 6; ++k) problem.subspaces.push_back({1.0, 1});
        problem.spectrum = {2, 2, 2};
        FusionOutcome out = construct_weighted_fusion(problem);
        print_dense("fusion frame", out.fusion->frame.dense());
        Matrix s = fusion_operator(*out.fusion);
        print_dense("weighted projection sum", s);
    }
    return 0;
}
