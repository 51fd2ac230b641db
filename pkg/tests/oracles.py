"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.
"""
import numpy as np


def laminate_coefficients(n, a_lo=1.0, a_hi=4.0):
    # half-open phases: [0, 1/2) -> a_lo, [1/2, 1) -> a_hi, grid x_j = j/n
    x = np.arange(n) / n
    return np.where(x < 0.5, a_lo, a_hi)


def laminate_1d_oracle(n, xi, a_lo=1.0, a_hi=4.0):
    """Minimize mean a(x1)|xi + u(x1)|^2 over div-free fields depending on x1 only.

    Divergence-free with u = u(x1) forces u1 constant, hence u1 = 0 by the
    mean constraint.  The free component u2 is found by a direct KKT solve
    of the quadratic problem  min mean a (xi2 + u2)^2  s.t.  sum u2 = 0.
    """
    a = laminate_coefficients(n, a_lo, a_hi)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = np.diag(2 * a / n)
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[:n] = -2 * a * xi[1] / n
    u2 = np.linalg.solve(kkt, rhs)[:n]
    value = np.mean(a * (xi[0] ** 2 + (xi[1] + u2) ** 2))
    return value, u2


if __name__ == "__main__":
    for xi in ((1.0, 0.0), (0.0, 1.0), (2.0, 0.0), (1.0, 1.0)):
        v, _ = laminate_1d_oracle(64, xi)
        print(xi, repr(v))
