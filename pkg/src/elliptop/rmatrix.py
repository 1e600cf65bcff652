"""Belavin R-matrix, its classical expansion, the symmetric GL_N x GL_M
R-matrix, the rational analogue, and the associated checkers.

Leg conventions:

* Belavin objects act on (C^N)^(x2) or (C^N)^(x3) with kron ordering.
* Four-leg objects act on (C^N (x) C^M)^(x2) with the fixed leg ordering
  (1, 1~, 2, 2~);  R_{21,...} variants are realized by explicit
  permutation matrices built once per (N, M).
* The sublattice relations identify Z_{NM}^2 with Z_N^2 x Z_M^2 through
  a factorized T-basis on C^N (x) C^M:

      a  ->  T_{M^{-1} a mod N} (x) T~_{N^{-1} a mod M}    (P12 relation)
      a  ->  T_{a mod N}        (x) T~_{a mod M}           (P~12 relation)

  i.e. the right-hand sides of the relations are the size-NM Belavin sum
  written in these bases; no clock-shift similarity transform realizes
  them, so the identification is part of the statement.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .elliptic import EllipticParams, eisenstein_E1, weierstrass_p
from .fourier import f_alpha, omega_of, phi_alpha, phi_big
from .torus import T, lattice, permutation_operator


def belavin_R(z, hbar, n: int, p: EllipticParams) -> np.ndarray:
    """R^hbar_12(z) = sum_a T_a (x) T_{-a} varphi_a(z, omega_a + hbar)."""
    out = np.zeros((n * n, n * n), dtype=complex)
    for a in lattice(n):
        out += np.kron(T(a, n), T((-a[0], -a[1]), n)) \
            * complex(phi_alpha(z, hbar, a[0], a[1], n, p))
    return out


def classical_expansion(z, n: int, p: EllipticParams) -> tuple[np.ndarray, np.ndarray]:
    """(r12, m12) of R^hbar(z) = 1/hbar + r12 + hbar m12 + O(hbar^2)."""
    e1 = complex(eisenstein_E1(z, p))
    wp = complex(weierstrass_p(z, p))
    eye = np.eye(n * n, dtype=complex)
    r12 = e1 * eye
    m12 = 0.5 * (e1 * e1 - wp) * eye
    for a in lattice(n):
        if a == (0, 0):
            continue
        pair = np.kron(T(a, n), T((-a[0], -a[1]), n))
        r12 = r12 + pair * complex(phi_alpha(z, 0.0, a[0], a[1], n, p))
        m12 = m12 + pair * complex(f_alpha(z, a[0], a[1], n, p))
    return r12, m12


def lax_from_R(smat: np.ndarray, z, eta, n: int, p: EllipticParams) -> np.ndarray:
    """L^eta(z, S) as the normalized partial trace (1/N) tr_2(R^eta_12(z) S_2).

    The 1/N makes this literally equal to the top's Lax matrix
    sum_a T_a S_a varphi_a(z, eta + omega_a), since tr(T_{-a} T_b) = N delta.
    """
    r = belavin_R(z, eta, n, p)
    return _partial_trace_2(r @ np.kron(np.eye(n), smat), n) / n


def m_from_r(smat: np.ndarray, z, n: int, p: EllipticParams) -> np.ndarray:
    """-(1/N) tr_2(r_12(z) S_2); differs from the top's M-matrix by the
    scalar E1(z) S_0 1_N, which cancels in the Lax equations."""
    r12, _ = classical_expansion(z, n, p)
    return -_partial_trace_2(r12 @ np.kron(np.eye(n), smat), n) / n


def _partial_trace_2(mat: np.ndarray, n: int) -> np.ndarray:
    return np.trace(mat.reshape(n, n, n, n), axis1=1, axis2=3)


def fourier_swap_residual(z, hbar, n: int, p: EllipticParams) -> float:
    """|| R^hbar_12(z) P_12 - R^{z/N}_12(N hbar) || / || . ||."""
    lhs = belavin_R(z, hbar, n, p) @ permutation_operator(n)
    rhs = belavin_R(n * hbar, z / n, n, p)
    return float(np.abs(lhs - rhs).max() / np.abs(rhs).max())


def belavin_unitarity_residual(z, hbar, n: int, p: EllipticParams) -> float:
    """R^h_12(z) R^h_21(-z) = N^2 (wp(N hbar) - wp(z)) 1, checked with the
    explicit factor."""
    perm = permutation_operator(n)
    r12 = belavin_R(z, hbar, n, p)
    r21 = perm @ belavin_R(-z, hbar, n, p) @ perm
    fac = n * n * (complex(weierstrass_p(n * hbar, p)) - complex(weierstrass_p(z, p)))
    return float(np.abs(r12 @ r21 - fac * np.eye(n * n)).max() / abs(fac))


# --------------------------------------------------------------------------
# three-site embeddings and the associative Yang-Baxter equation
# --------------------------------------------------------------------------

def _embed_pair(r: np.ndarray, i: int, j: int, sites: int, dim: int) -> np.ndarray:
    """Place a two-site operator on legs (i, j) of a ``sites``-site chain."""
    rt = r.reshape(dim, dim, dim, dim)
    order = [i, j] + [s for s in range(sites) if s not in (i, j)]
    full = rt
    for _ in range(sites - 2):
        full = np.tensordot(full, np.eye(dim), axes=0)
    # axes: out_i, out_j, in_i, in_j, (out_s, in_s) per free leg
    out_axes = [0, 1] + [4 + 2 * t for t in range(sites - 2)]
    in_axes = [2, 3] + [5 + 2 * t for t in range(sites - 2)]
    perm = np.argsort(order)
    src_out = [out_axes[k] for k in perm]
    src_in = [in_axes[k] for k in perm]
    full = np.transpose(full, src_out + src_in)
    return full.reshape(dim ** sites, dim ** sites)


def check_aybe_belavin(n: int, p: EllipticParams, z_points, hbar, eta) -> float:
    """Residual of R^h_12(z12) R^e_23(z23) = R^e_13(z13) R^{h-e}_12(z12)
    + R^{e-h}_23(z23) R^h_13(z13) at one point tuple."""
    z1, z2, z3 = z_points
    if abs(hbar - eta) < 1e-12:
        raise ValueError("hbar = eta makes the AYBE degenerate (pole of R^0)")
    z12, z23, z13 = z1 - z2, z2 - z3, z1 - z3
    e = _embed_pair
    lhs = e(belavin_R(z12, hbar, n, p), 0, 1, 3, n) @ \
        e(belavin_R(z23, eta, n, p), 1, 2, 3, n)
    rhs = e(belavin_R(z13, eta, n, p), 0, 2, 3, n) @ \
        e(belavin_R(z12, hbar - eta, n, p), 0, 1, 3, n) + \
        e(belavin_R(z23, eta - hbar, n, p), 1, 2, 3, n) @ \
        e(belavin_R(z13, hbar, n, p), 0, 2, 3, n)
    return float(np.abs(lhs - rhs).max() / np.abs(lhs).max())


# --------------------------------------------------------------------------
# symmetric GL_N x GL_M R-matrix
# --------------------------------------------------------------------------

def _check_coprime(n: int, m: int):
    if math.gcd(n, m) != 1:
        raise ValueError(f"N = {n} and M = {m} must be coprime")


def _kron4(a, b, c, d):
    return np.kron(np.kron(a, b), np.kron(c, d))


def symmetric_R(z, hbar, n: int, m: int, p: EllipticParams) -> np.ndarray:
    """sum_{a,ta} Phi_{a,ta}(z, hbar) T_a (x) T~_ta (x) T_{-a} (x) T~_{-ta},
    acting on (C^N (x) C^M)^(x2) with leg ordering (1, 1~, 2, 2~)."""
    _check_coprime(n, m)
    d = (n * m) ** 2
    out = np.zeros((d, d), dtype=complex)
    for a in lattice(n):
        for ta in lattice(m):
            out += _kron4(T(a, n), T(ta, m),
                          T((-a[0], -a[1]), n), T((-ta[0], -ta[1]), m)) \
                * complex(phi_big(z, hbar, a[0], a[1], ta[0], ta[1], n, m, p))
    return out


def rational_symmetric_R(z, hbar, n: int, m: int) -> np.ndarray:
    """M (1 (x) 1 (x) P~) / hbar + N (P (x) 1~ (x) 1~) / z."""
    if z == 0 or hbar == 0:
        raise ValueError("rational R-matrix is singular at z = 0 or hbar = 0")
    return m * swap_tilde_legs(n, m) / hbar + n * swap_n_legs(n, m) / z


@lru_cache(maxsize=16)
def swap_n_legs(n: int, m: int) -> np.ndarray:
    """Permutation matrix exchanging the two N-legs in ordering (1, 1~, 2, 2~)."""
    d = n * m
    x = np.zeros((d * d, d * d))
    for i1 in range(n):
        for j1 in range(m):
            for i2 in range(n):
                for j2 in range(m):
                    x[((i2 * m + j1) * n + i1) * m + j2,
                      ((i1 * m + j1) * n + i2) * m + j2] = 1.0
    x.setflags(write=False)
    return x


@lru_cache(maxsize=16)
def swap_tilde_legs(n: int, m: int) -> np.ndarray:
    """Permutation matrix exchanging the two M-legs."""
    d = n * m
    x = np.zeros((d * d, d * d))
    for i1 in range(n):
        for j1 in range(m):
            for i2 in range(n):
                for j2 in range(m):
                    x[((i1 * m + j2) * n + i2) * m + j1,
                      ((i1 * m + j1) * n + i2) * m + j2] = 1.0
    x.setflags(write=False)
    return x


def symmetric_unitarity_residual(z, hbar, n: int, m: int, p: EllipticParams) -> float:
    """R_{12,1~2~}(z,h) R_{21,1~2~}(-z,h) = N^2 M^2 (wp(N h) - wp(M z)) 1."""
    _check_coprime(n, m)
    sn = swap_n_legs(n, m)
    r = symmetric_R(z, hbar, n, m, p)
    r21 = sn @ symmetric_R(-z, hbar, n, m, p) @ sn
    fac = n * n * m * m * (complex(weierstrass_p(n * hbar, p))
                           - complex(weierstrass_p(m * z, p)))
    return float(np.abs(r @ r21 - fac * np.eye((n * m) ** 2)).max() / abs(fac))


def _embed_sym(r4: np.ndarray, a: int, b: int, ta: int, tb: int,
               n: int, m: int) -> np.ndarray:
    """Place a 4-leg operator (legs x, x~, y, y~) on N-legs (a, b) and M-legs
    (ta, tb) of the 6-leg space ordered (1, 2, 3, 1~, 2~, 3~)."""
    rt = r4.reshape(n, m, n, m, n, m, n, m)
    # rearrange to out (x, y, x~, y~), in (x, y, x~, y~)
    rt = np.transpose(rt, (0, 2, 1, 3, 4, 6, 5, 7))
    dims = [n, n, n, m, m, m]
    fn = [s for s in (0, 1, 2) if s not in (a, b)][0]
    fm = [s for s in (3, 4, 5) if s not in (3 + ta, 3 + tb)][0]
    full = np.tensordot(np.tensordot(rt, np.eye(n), axes=0), np.eye(m), axes=0)
    # axes of full: xo yo x~o y~o xi yi x~i y~i, no ni, mo mi
    src = {a: 0, b: 1, 3 + ta: 2, 3 + tb: 3, fn: 8, fm: 10}
    src_in = {a: 4, b: 5, 3 + ta: 6, 3 + tb: 7, fn: 9, fm: 11}
    order = [src[s] for s in range(6)] + [src_in[s] for s in range(6)]
    full = np.transpose(full, order)
    dtot = (n * m) ** 3
    return full.reshape(dtot, dtot)


def check_aybe_symmetric(n: int, m: int, p: EllipticParams, z_points,
                         h_points) -> float:
    """Residual of R_{12,1~2~} R_{23,3~2~} = R_{13,3~2~} R_{12,1~3~}
    + R_{23,3~1~} R_{13,1~2~} with arguments (z_a - z_b, h_a~ - h_b~)."""
    _check_coprime(n, m)
    z1, z2, z3 = z_points
    h1, h2, h3 = h_points

    def rr(za, zb, ha, hb, legs):
        r4 = symmetric_R(za - zb, ha - hb, n, m, p)
        return _embed_sym(r4, *legs, n, m)

    lhs = rr(z1, z2, h1, h2, (0, 1, 0, 1)) @ rr(z2, z3, h3, h2, (1, 2, 2, 1))
    rhs = rr(z1, z3, h3, h2, (0, 2, 2, 1)) @ rr(z1, z2, h1, h3, (0, 1, 0, 2)) \
        + rr(z2, z3, h3, h1, (1, 2, 2, 0)) @ rr(z1, z3, h1, h2, (0, 2, 0, 1))
    return float(np.abs(lhs - rhs).max() / np.abs(lhs).max())


def sublattice_residuals(z, hbar, n: int, m: int, p: EllipticParams) -> tuple[float, float]:
    """Residuals of the two sublattice Fourier relations.

    First:  R(z,h) P_12  = size-NM Belavin sum in the factorized basis
            T_{M^{-1} a} (x) T~_{N^{-1} a}, arguments (N hbar, z/N).
    Second: R(z,h) P~_12 = same with basis T_{a mod N} (x) T~_{a mod M},
            arguments (M z, hbar/M).
    """
    _check_coprime(n, m)
    nm = n * m
    r = symmetric_R(z, hbar, n, m, p)
    minv = pow(m, -1, n) if n > 1 else 0
    ninv = pow(n, -1, m) if m > 1 else 0

    def big_sum(x, y, dict_n, dict_m):
        d = (n * m) ** 2
        out = np.zeros((d, d), dtype=complex)
        for a1 in range(nm):
            for a2 in range(nm):
                g = (dict_n * a1 % n, dict_n * a2 % n)
                t = (dict_m * a1 % m, dict_m * a2 % m)
                out += _kron4(T(g, n), T(t, m),
                              T((-g[0], -g[1]), n), T((-t[0], -t[1]), m)) \
                    * complex(phi_alpha(x, y, a1, a2, nm, p))
        return out

    lhs1 = r @ swap_n_legs(n, m)
    rhs1 = big_sum(n * hbar, z / n, minv, ninv)
    lhs2 = r @ swap_tilde_legs(n, m)
    rhs2 = big_sum(m * z, hbar / m, 1, 1)
    res1 = float(np.abs(lhs1 - rhs1).max() / np.abs(rhs1).max())
    res2 = float(np.abs(lhs2 - rhs2).max() / np.abs(rhs2).max())
    return res1, res2


def classical_limit_slope(z, n: int, p: EllipticParams,
                          k_range=range(3, 11)) -> tuple[float, list]:
    """Log-log slope of || R^h(z) - 1/h - r - h m || over h = 2^{-k}.

    The printed expansion is second order, so the fitted slope is 2.
    """
    r12, m12 = classical_expansion(z, n, p)
    eye = np.eye(n * n)
    hs, resids = [], []
    for k in k_range:
        h = 2.0 ** (-k)
        res = np.abs(belavin_R(z, h, n, p) - eye / h - r12 - h * m12).max()
        hs.append(h)
        resids.append(res)
    slope = np.polyfit(np.log(hs), np.log(resids), 1)[0]
    return float(slope), resids
