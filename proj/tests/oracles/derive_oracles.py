"""Closed-form reference values used by the C++ tests, derived symbolically.

Run with `python3 tests/oracles/derive_oracles.py`; every printed value is
hard-coded in a test next to a comment naming the quantity.
"""

import sympy as sp

x, y, s = sp.symbols("x y s", real=True)


def bilinear_unit_square():
    # Nodes (0,0), (1,0), (0,1), (1,1) with the usual tensor-product shapes.
    shapes = [(1 - x) * (1 - y), x * (1 - y), (1 - x) * y, x * y]
    K = sp.zeros(4, 4)
    M = sp.zeros(4, 4)
    for i, pi in enumerate(shapes):
        for j, pj in enumerate(shapes):
            grad = sp.diff(pi, x) * sp.diff(pj, x) + sp.diff(pi, y) * sp.diff(pj, y)
            K[i, j] = sp.integrate(grad, (x, 0, 1), (y, 0, 1))
            M[i, j] = sp.integrate(pi * pj, (x, 0, 1), (y, 0, 1))
    return K, M


def eps_domain_area(a, b, L, V, alpha, eps):
    n = a / eps
    return a * b + a * V * eps + n * (alpha * eps**3) * (L * eps)


def main():
    K, M = bilinear_unit_square()
    print("unit-square stiffness", K.tolist())
    print("unit-square mass", M.tolist())

    r = sp.Rational
    print("eps-domain area (1,1,1,1,1,1/4)", eps_domain_area(1, 1, 1, 1, 1, r(1, 4)))

    # || x1 ||_{L2((0,1)x(-1,0))}
    print("L2 of x1", sp.sqrt(sp.integrate(x**2, (x, 0, 1), (y, -1, 0))))

    # -v'' + v = cos(pi x), Neumann ends
    v = sp.cos(sp.pi * x) / (1 + sp.pi**2)
    assert sp.simplify(-sp.diff(v, x, 2) + v - sp.cos(sp.pi * x)) == 0
    assert sp.diff(v, x).subs(x, 0) == 0 and sp.diff(v, x).subs(x, 1) == 0
    print("1D cosine amplitude 1/(1+pi^2)", sp.N(1 / (1 + sp.pi**2), 17))

    # Strip average of u = x2 over (L eps, (L+V) eps) with eps = 1/4, L = V = 1
    e = r(1, 4)
    print("strip average of x2", sp.integrate(y, (y, e, 2 * e)) / e)

    # Channel flux of u = x2: J_k = (1/(L eps^2)) * (alpha eps^3)(L eps) * 1, density J_k / eps
    alpha, L = 1, 1
    Jk = r(1, L) / e**2 * (alpha * e**3) * (L * e)
    print("channel total", Jk, "density", Jk / e)

    # eps^-2 \int_C |d2 x2| with a = alpha = L = 1
    n = 1 / e
    print("d2_l1_scaled for u = x2", n * alpha * e**3 * L * e / e**2)

    # Mode amplitude ratio alpha/(LV) / (k^2 + alpha/(LV) - omega^2), alpha=L=V=1, k=0, omega^2=1/2
    print("mode ratio", r(1) / (1 - r(1, 2)))

    # Constant-trace v: u0 * c / (c - omega^2) with c = 1, omega = 1/2
    print("constant v ratio", r(1) / (1 - r(1, 4)))

    # Separable corrector: w = C cos(k x1) cosh(lam (x2 + b)), lam^2 = k^2 - omega^2,
    # d2 w(x1, 0) = V (omega^2 - k^2) v0 cos(k x1)
    k, om, b, V, v0 = sp.pi, r(1, 2), 1, 1, 1
    lam = sp.sqrt(k**2 - om**2)
    C = V * (om**2 - k**2) * v0 / (lam * sp.sinh(lam * b))
    w = C * sp.cos(k * x) * sp.cosh(lam * (y + b))
    assert sp.simplify(-sp.diff(w, x, 2) - sp.diff(w, y, 2) - om**2 * w) == 0
    print("separable corrector amplitude", sp.N(C, 17))


if __name__ == "__main__":
    main()
