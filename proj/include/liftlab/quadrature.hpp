#pragma once

#include "liftlab/core.hpp"

namespace liftlab {

struct Quadrature {
  Vec nodes;
  Vec weights;
};

// Gauss-Legendre rule on [a, b] (Golub-Welsch).
Quadrature gauss_legendre(int n, double a, double b);

// Chebyshev-Lobatto points on [a, b], increasing, endpoints included, with
// Clenshaw-Curtis weights.
Quadrature chebyshev_lobatto(int n, double a, double b);

// Spectral differentiation matrix for the Chebyshev-Lobatto points of
// chebyshev_lobatto(n, a, b) via barycentric weights.
Mat chebyshev_diff_matrix(int n, double a, double b);

}  // namespace liftlab
