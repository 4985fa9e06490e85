"""High-precision Heston call prices for freezing test values.

Uses the original two-probability Gil-Pelaez representation evaluated with
mpmath at 40 digits (80 for the far out-of-the-money quotes). Spot 1, zero
rates. Independent of the C++ pricer, which integrates a single damped
integrand on a shifted contour.
"""
from mpmath import mp, mpf, mpc, quad, exp, log, sqrt, pi, inf, re

mp.dps = 40
BREAKS = [0, 1, 10, 100, inf]


def cf_j(j, phi, v0, kappa, theta, xi, rho, tau, x):
    u = mpf("0.5") if j == 1 else mpf("-0.5")
    b = kappa - rho * xi if j == 1 else kappa
    a = kappa * theta
    i = mpc(0, 1)
    d = sqrt((rho * xi * phi * i - b) ** 2 - xi**2 * (2 * u * phi * i - phi**2))
    g = (b - rho * xi * phi * i - d) / (b - rho * xi * phi * i + d)
    D = (b - rho * xi * phi * i - d) / xi**2 * ((1 - exp(-d * tau)) / (1 - g * exp(-d * tau)))
    C = a / xi**2 * ((b - rho * xi * phi * i - d) * tau - 2 * log((1 - g * exp(-d * tau)) / (1 - g)))
    return exp(C + D * v0 + i * phi * x)


def heston_call(v0, kappa, theta, xi, rho, K, T):
    x = mpf(0)
    lk = log(mpf(K))
    i = mpc(0, 1)

    def P(j):
        f = lambda phi: re(exp(-i * phi * lk) * cf_j(j, phi, v0, kappa, theta, xi, rho, T, x) / (i * phi))
        return mpf("0.5") + quad(f, BREAKS) / pi

    return P(1) - mpf(K) * P(2)


if __name__ == "__main__":
    cases = [
        (0.04, 1.5, 0.04, 0.3, -0.6, 1.0, 1.0),
        (0.04, 1.5, 0.04, 0.3, -0.6, 0.8, 0.5),
        (0.04, 1.5, 0.04, 0.3, -0.6, 1.3, 2.0),
        (0.09, 3.0, 0.05, 0.8, -0.9, 1.2, 0.3),
        (0.02, 0.7, 0.10, 0.5, -0.3, 0.7, 1.5),
        (0.15, 4.0, 0.02, 0.2, -0.2, 1.0, 0.1),
    ]
    for c in cases:
        p = heston_call(*[mpf(v) for v in c])
        print(c, mp.nstr(p, 20))
    # Deep out-of-the-money quotes: print the out-of-the-money price
    # (call above the forward, put below) to full relative precision.
    deep = [
        (0.02, 3.0, 0.05, 0.9, -0.8, 0.5, 0.1),
        (0.02, 3.0, 0.05, 0.9, -0.8, 1.5, 0.1),
        (0.01, 0.5, 0.16, 0.1, -0.9, 0.5, 0.1),
        (0.16, 5.0, 0.01, 1.0, -0.1, 1.5, 2.0),
    ]
    mp.dps = 80
    BREAKS = [0, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 3000, inf]
    for c in deep:
        p = heston_call(*[mpf(v) for v in c]) - max(1 - mpf(c[5]), 0)
        print(c, mp.nstr(p, 20))
