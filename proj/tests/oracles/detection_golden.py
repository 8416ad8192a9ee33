#!/usr/bin/env python3
"""Emit golden detection/false-alarm values for the energy detector under
Rayleigh fading, evaluated term by term from the closed form at 50 digits.

Output is a C++ initializer list consumed by tests/test_sensing_math.cpp.
"""
import mpmath as mp

mp.mp.dps = 50


def pd(snr, lam, m):
    snr, lam = mp.mpf(snr), mp.mpf(lam)
    a = lam / 2
    first = mp.e ** (-a) * mp.fsum(a ** n / mp.factorial(n) for n in range(m - 1))
    ratio = ((1 + snr) / snr) ** (m - 1)
    inner = mp.fsum((lam * snr / (2 * (1 + snr))) ** n / mp.factorial(n) for n in range(m - 1))
    bracket = mp.e ** (-lam / (2 * (1 + snr))) - mp.e ** (-a) * inner
    return first + ratio * bracket


def pf(lam, m):
    return mp.gammainc(m, mp.mpf(lam) / 2, mp.inf, regularized=True)


if __name__ == "__main__":
    print("// snr, lambda, m, P_d, P_f")
    for m in (2, 5, 8):
        for lam in (1, 5, 16, 30):
            for snr in ("0.01", "0.5", "1", "10", "100", "1000", "100000"):
                print("    {%s, %s, %d, %s, %s}," % (
                    snr, lam, m, mp.nstr(pd(snr, lam, m), 20), mp.nstr(pf(lam, m), 20)))
