"""Lax pairs, equations of motion, and reduction constraints for the
elliptic top family.

Models (the CLI kind strings in parentheses):

* scalar non-relativistic top (``nonrel-top``):
    L = sum'_a T_a S_a varphi_a(z, omega_a),  M = sum'_a T_a S_a f_a(z, omega_a),
    dS/dt = [S, J(S)] with J_a = -wp(omega_a)
* scalar relativistic top (``rel-top``):
    L = sum_a T_a S_a varphi_a(z, eta + omega_a),
    M = -sum'_a T_a S_a varphi_a(z, omega_a),
    J^eta_a = E1(eta + omega_a) - E1(omega_a)
* matrix top (``matrix-top``), blocks S_a in Mat(M), coupling eta/N,
  constraints: S_0 scalar, S_a / varphi_a(eta/N, omega_a) symmetric in a -> -a
* Gaudin-like lattice top (``gaudin-lattice``), blocks A^a in Mat(K),
  same constraint pattern
* coupled GL_N x GL_M model (``coupled``):
    L(z, eta) = sum_{a, ta} A^{a,ta} Phi_{a,ta}(z, eta)  in Mat(K),
    M(z) = -sum_{a != 0, ta} A^{a,ta} Phi_{a,ta}(z, 0)
           - sum_ta A^{0,ta} E1(z + N*tw_ta)
  with the zero-mode sum constrained to a scalar and the Z2-type
  constraint imposed on the Z_M-Fourier-transformed coefficients at
  lattice size N*M.

The coupled-model equations of motion are obtained by expanding
[L(z), M(z)] back in the Phi basis: the commutator is projected onto the
quasi-periodicity sectors of the z variable and the residue at each of
the M^2 simple poles is extracted by circle quadrature.  The expansion
exists exactly when the constraints hold; the same machinery therefore
yields the unconstrained negative control (a large Lax residual).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .elliptic import (TWO_PI_I, EllipticParams, eisenstein_E1, kronecker_phi,
                       lattice_distance, weierstrass_p)
from .fourier import f_alpha, omega_of, phi_alpha, phi_big, phi_big_swapped
from .parallel import thread_map
from .torus import T, kappa, lattice, reduction_sign

MODEL_KINDS = ("nonrel-top", "rel-top", "matrix-top", "gaudin-lattice", "coupled")
REDUCTION_KINDS = ("z2-nonrel", "z2-rel", "matrix-top-constraints",
                   "gaudin-constraints", "coupled-constraints")


@dataclass
class CoeffField:
    """Dynamical variables: one K x K block per lattice index.

    data has shape (N, N, K, K) on Z_N^2 and (N, N, M, M, K, K) on
    Z_N^2 x Z_M^2 (scalar models use K = 1).
    """

    lattice_shape: tuple
    K: int
    data: np.ndarray
    model_tag: str = ""
    coupling: complex | None = None

    def with_data(self, data: np.ndarray) -> "CoeffField":
        return CoeffField(self.lattice_shape, self.K, np.asarray(data, complex),
                          self.model_tag, self.coupling)

    def copy(self) -> "CoeffField":
        return self.with_data(self.data.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))


@dataclass
class LaxPair:
    """Spectral-parameter evaluators of the Lax matrices."""

    L: Callable
    M: Callable
    spectral_role: str
    pole_set: list


class EllipticTopModel:
    """Shared interface: fields, constraints, equations of motion, Lax data."""

    kind = ""
    reduction = None  # mandatory reduction kind, if any

    def __init__(self, n: int, params: EllipticParams):
        self.n = n
        self.params = params

    # -- fields ------------------------------------------------------------
    def field_shape(self) -> tuple:
        raise NotImplementedError

    def random_field(self, seed: int, scale: float = 1.0) -> CoeffField:
        """i.i.d. complex Gaussian entries, then projected onto constraints.

        ``scale`` multiplies the unit-variance draw; long integrations use a
        reduced amplitude so the quadratic flow stays within the fixed-step
        error budget (projection is linear, so scaling commutes with it).
        """
        rng = np.random.default_rng(seed)
        shape = self.field_shape()
        data = scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))
        return self.project(self._wrap(data))

    def _wrap(self, data) -> CoeffField:
        raise NotImplementedError

    # -- constraints ---------------------------------------------------------
    def project(self, field: CoeffField) -> CoeffField:
        return field

    def constraint_deviation(self, field: CoeffField) -> float:
        return field.with_data(field.data - self.project(field).data).norm()

    # -- dynamics ------------------------------------------------------------
    def eom_rhs(self, field: CoeffField) -> CoeffField:
        raise NotImplementedError

    def L_of(self, field: CoeffField, z: complex) -> np.ndarray:
        raise NotImplementedError

    def M_of(self, field: CoeffField, z: complex) -> np.ndarray:
        raise NotImplementedError

    @property
    def size(self) -> int:
        raise NotImplementedError

    def pole_set(self) -> list:
        return [0.0 + 0.0j]

    def lax_pair(self, field: CoeffField) -> LaxPair:
        return LaxPair(L=lambda z: self.L_of(field, z),
                       M=lambda z: self.M_of(field, z),
                       spectral_role="z", pole_set=self.pole_set())

    def spectral_samples(self, count: int, seed: int) -> list[complex]:
        """Generic spectral points away from the model's pole set."""
        rng = np.random.default_rng(seed)
        tau = self.params.tau
        poles = np.asarray(self.pole_set(), dtype=complex)
        out: list[complex] = []
        tries = 0
        while len(out) < count:
            tries += 1
            if tries > 200 + count:
                raise RuntimeError("could not sample pole-free spectral points")
            a, b = rng.uniform(0.05, 0.45, 2)
            z = a + b * tau
            if float(np.min(lattice_distance(z - poles, tau))) < 0.05:
                continue
            out.append(complex(z))
        return out


def _scalar_eom_tables(n: int, jvec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weights W[a,b] and gather table G[a,b] for dS_a = sum_b W S_b S_{G[a,b]}.

    W folds the structure constant C, the representative-reduction sign of
    T_{b+g}, and the inverse-inertia values J_g, g = (a-b) mod N.
    """
    pts = lattice(n)
    n2 = len(pts)
    w = np.zeros((n2, n2), dtype=complex)
    g = np.zeros((n2, n2), dtype=np.intp)
    for ia, a in enumerate(pts):
        if a == (0, 0):
            continue  # dS_0/dt = 0 exactly: C_{b,-b} vanishes identically
        for ib, b in enumerate(pts):
            gam = ((a[0] - b[0]) % n, (a[1] - b[1]) % n)
            g[ia, ib] = pts.index(gam)
            if b == (0, 0) or gam == (0, 0):
                continue
            c = kappa(b, gam, n) - kappa(gam, b, n)
            s = reduction_sign((b[0] + gam[0], b[1] + gam[1]), n)
            w[ia, ib] = c * s * jvec[pts.index(gam)]
    return w, g


class _ScalarTop(EllipticTopModel):
    """Common machinery for the two scalar tops."""

    def __init__(self, n: int, params: EllipticParams):
        super().__init__(n, params)
        self._j = self._j_values()
        jflat = np.zeros(n * n, dtype=complex)
        for i, a in enumerate(lattice(n)):
            if a != (0, 0):
                jflat[i] = self._j[a]
        self._w, self._g = _scalar_eom_tables(n, jflat)

    def _j_values(self) -> dict:
        raise NotImplementedError

    def field_shape(self):
        return (self.n, self.n, 1, 1)

    def _wrap(self, data):
        return CoeffField((self.n,), 1, np.asarray(data, complex), self.kind, None)

    @property
    def size(self):
        return self.n

    def eom_rhs(self, field: CoeffField) -> CoeffField:
        s = field.data[..., 0, 0].ravel()
        sdot = np.sum(self._w * s[None, :] * s[self._g], axis=1)
        return field.with_data(sdot.reshape(self.n, self.n, 1, 1))


class NonRelativisticTop(_ScalarTop):
    """Scalar elliptic top with J_a = -wp(omega_a)."""

    kind = "nonrel-top"

    def _j_values(self):
        n, p = self.n, self.params
        return {a: -weierstrass_p(omega_of(a[0], a[1], n, p.tau), p)
                for a in lattice(n) if a != (0, 0)}

    def L_of(self, field, z):
        n, p = self.n, self.params
        s = field.data[..., 0, 0]
        out = np.zeros((n, n), dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out += T(a, n) * s[a] * phi_alpha(z, 0.0, a[0], a[1], n, p)
        return out

    def M_of(self, field, z):
        n, p = self.n, self.params
        s = field.data[..., 0, 0]
        out = np.zeros((n, n), dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out += T(a, n) * s[a] * f_alpha(z, a[0], a[1], n, p)
        return out


class RelativisticTop(_ScalarTop):
    """One-parameter deformation with J^eta_a = E1(eta+omega_a) - E1(omega_a)."""

    kind = "rel-top"

    def __init__(self, n: int, params: EllipticParams, eta: complex):
        self.eta = complex(eta)
        super().__init__(n, params)

    def _j_values(self):
        n, p = self.n, self.params
        out = {}
        for a in lattice(n):
            if a == (0, 0):
                continue
            w = omega_of(a[0], a[1], n, p.tau)
            out[a] = eisenstein_E1(self.eta + w, p) - eisenstein_E1(w, p)
        return out

    def _wrap(self, data):
        return CoeffField((self.n,), 1, np.asarray(data, complex), self.kind, self.eta)

    def L_of(self, field, z):
        n, p = self.n, self.params
        s = field.data[..., 0, 0]
        out = np.zeros((n, n), dtype=complex)
        for a in lattice(n):
            out += T(a, n) * s[a] * phi_alpha(z, self.eta, a[0], a[1], n, p)
        return out

    def M_of(self, field, z):
        n, p = self.n, self.params
        s = field.data[..., 0, 0]
        out = np.zeros((n, n), dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out -= T(a, n) * s[a] * phi_alpha(z, 0.0, a[0], a[1], n, p)
        return out


class _BlockTop(EllipticTopModel):
    """Z_N^2 top with matrix blocks and coupling eta/N (matrix & Gaudin-like)."""

    def __init__(self, n: int, params: EllipticParams, eta: complex, k: int):
        super().__init__(n, params)
        self.eta = complex(eta)
        self.k = k
        self._j = {}
        self._phi_c = {}
        for a in lattice(n):
            if a == (0, 0):
                continue
            w = omega_of(a[0], a[1], n, params.tau)
            self._j[a] = (eisenstein_E1(self.eta / n + w, params)
                          - eisenstein_E1(w, params))
            self._phi_c[a] = complex(phi_alpha(self.eta / n, 0.0, a[0], a[1], n, params))
            an = (-a[0], -a[1])
            self._phi_c[an] = complex(phi_alpha(self.eta / n, 0.0, an[0], an[1], n, params))

    def field_shape(self):
        return (self.n, self.n, self.k, self.k)

    def _wrap(self, data):
        return CoeffField((self.n,), self.k, np.asarray(data, complex), self.kind,
                          self.eta)

    # matrix blocks paired with T_a pick up the representative-reduction sign
    # under a -> -a; plain phi-paired blocks do not
    _t_paired = False

    def project(self, field: CoeffField) -> CoeffField:
        """Zero block to a scalar; symmetrize c_a = S_a / varphi_a(eta/N, omega_a)."""
        n = self.n
        out = field.data.copy()
        blk = out[0, 0]
        out[0, 0] = np.trace(blk) / self.k * np.eye(self.k)
        done = set()
        for a in lattice(n):
            if a == (0, 0) or a in done:
                continue
            an = ((-a[0]) % n, (-a[1]) % n)
            if an == a:
                continue  # self-paired index: the constraint holds identically
            pa = self._phi_c[a]
            pn = self._phi_c[(-a[0], -a[1])]
            sg = reduction_sign((-a[0], -a[1]), n) if self._t_paired else 1.0
            avg = 0.5 * (out[a] / pa + sg * out[an] / pn)
            out[a] = avg * pa
            out[an] = sg * avg * pn
            done.update((a, an))
        return field.with_data(out)


class MatrixTop(_BlockTop):
    """Matrix extension: L = sum_a T_a (x) S_a varphi_a(z, omega_a + eta/N)."""

    kind = "matrix-top"
    reduction = "matrix-top-constraints"
    _t_paired = True

    def __init__(self, n: int, params: EllipticParams, eta: complex, m: int):
        self.m = m
        super().__init__(n, params, eta, k=m)

    @property
    def size(self):
        return self.n * self.m

    def eom_rhs(self, field: CoeffField) -> CoeffField:
        n, s = self.n, field.data
        out = np.zeros_like(s)
        for a in lattice(n):
            if a == (0, 0):
                continue
            acc = np.zeros((self.k, self.k), dtype=complex)
            for g in lattice(n):
                if g == (0, 0):
                    continue
                b = ((a[0] - g[0]) % n, (a[1] - g[1]) % n)
                sgn = reduction_sign((b[0] + g[0], b[1] + g[1]), n)
                acc += sgn * (kappa(b, g, n) * s[b] @ s[g]
                              - kappa(g, b, n) * s[g] @ s[b]) * self._j[g]
            out[a] = acc
        return field.with_data(out)

    def L_of(self, field, z):
        n, p = self.n, self.params
        out = np.zeros((self.size, self.size), dtype=complex)
        for a in lattice(n):
            out += np.kron(T(a, n), field.data[a]) \
                * phi_alpha(z, self.eta / n, a[0], a[1], n, p)
        return out

    def M_of(self, field, z):
        n, p = self.n, self.params
        out = np.zeros((self.size, self.size), dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out -= np.kron(T(a, n), field.data[a]) \
                * phi_alpha(z, 0.0, a[0], a[1], n, p)
        return out


class GaudinLatticeTop(_BlockTop):
    """Gaudin-type top: plain Mat(K) blocks, L = sum_a A^a varphi_a(z, omega_a + eta/N)."""

    kind = "gaudin-lattice"
    reduction = "gaudin-constraints"

    @property
    def size(self):
        return self.k

    def eom_rhs(self, field: CoeffField) -> CoeffField:
        n, s = self.n, field.data
        out = np.zeros_like(s)
        for a in lattice(n):
            if a == (0, 0):
                continue
            acc = np.zeros((self.k, self.k), dtype=complex)
            for g in lattice(n):
                if g == (0, 0):
                    continue
                b = ((a[0] - g[0]) % n, (a[1] - g[1]) % n)
                acc += (s[b] @ s[g] - s[g] @ s[b]) * self._j[g]
            out[a] = acc
        return field.with_data(out)

    def L_of(self, field, z):
        n, p = self.n, self.params
        out = np.zeros((self.k, self.k), dtype=complex)
        for a in lattice(n):
            out += field.data[a] * phi_alpha(z, self.eta / n, a[0], a[1], n, p)
        return out

    def M_of(self, field, z):
        n, p = self.n, self.params
        out = np.zeros((self.k, self.k), dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out -= field.data[a] * phi_alpha(z, 0.0, a[0], a[1], n, p)
        return out


# --------------------------------------------------------------------------
# coupled GL_N x GL_M model
# --------------------------------------------------------------------------

def _tilde_kappa_sq(a1, a2, ta1, ta2, m: int):
    """kappa~^2_{a,ta} = exp(2*pi*i*(ta1*a2 - a1*ta2)/M); a may live on Z_NM^2."""
    return np.exp(TWO_PI_I * (np.asarray(ta1) * np.asarray(a2)
                              - np.asarray(a1) * np.asarray(ta2)) / m)


class CoupledTop(EllipticTopModel):
    """N^2 x M^2 coupled tops in Mat(K) with both parameters on the curve."""

    kind = "coupled"
    reduction = "coupled-constraints"

    def __init__(self, n: int, params: EllipticParams, eta: complex, m: int, k: int,
                 quad_points: int = 16, quad_radius: float = 0.04):
        import math
        if math.gcd(n, m) != 1:
            raise ValueError(f"N = {n} and M = {m} must be coprime")
        super().__init__(n, params)
        self.eta = complex(eta)
        self.m = m
        self.k = k
        self.nm = n * m
        self._quad_points = quad_points
        self._quad_radius = quad_radius
        self._cache = None

    @property
    def size(self):
        return self.k

    def field_shape(self):
        return (self.n, self.n, self.m, self.m, self.k, self.k)

    def _wrap(self, data):
        return CoeffField((self.n, self.m), self.k, np.asarray(data, complex),
                          self.kind, self.eta)

    def pole_set(self) -> list:
        tau = self.params.tau
        return [-self.n * (t1 + t2 * tau) / self.m
                for t1 in range(self.m) for t2 in range(self.m)]

    # -- big-lattice (Z_NM^2) coordinates -----------------------------------
    def to_big(self, field: CoeffField) -> np.ndarray:
        """curly A^{a} = (1/M) sum_ta ktilde^2_{a,ta} A^{a mod N, ta}, a in Z_NM^2."""
        n, m, nm = self.n, self.m, self.nm
        out = np.zeros((nm, nm, self.k, self.k), dtype=complex)
        for a1 in range(nm):
            for a2 in range(nm):
                al = (a1 % n, a2 % n)
                for t1 in range(m):
                    for t2 in range(m):
                        out[a1, a2] += (_tilde_kappa_sq(a1, a2, t1, t2, m)
                                        * field.data[al[0], al[1], t1, t2])
        return out / m

    def from_big(self, big: np.ndarray) -> CoeffField:
        n, m, nm = self.n, self.m, self.nm
        data = np.zeros(self.field_shape(), dtype=complex)
        for al1 in range(n):
            for al2 in range(n):
                for tb1 in range(m):
                    for tb2 in range(m):
                        acc = np.zeros((self.k, self.k), dtype=complex)
                        for tg1 in range(m):
                            for tg2 in range(m):
                                a = ((al1 + n * tg1) % nm, (al2 + n * tg2) % nm)
                                acc += (_tilde_kappa_sq(a[0], a[1], tb1, tb2, m)
                                        .conjugate() * big[a])
                        data[al1, al2, tb1, tb2] = acc / m
        return self._wrap(data)

    def project(self, field: CoeffField) -> CoeffField:
        """Scalar zero mode of the big field plus Z2-type c-symmetrization.

        In the Z_NM^2 coordinates the constraints read exactly as for the
        Gaudin-like top: curlyA^0 proportional to the identity, and
        curlyA^a / varphi_a(eta/M, omega_a/M) symmetric under a -> -a.
        """
        n, m, nm, p = self.n, self.m, self.nm, self.params
        big = self.to_big(field)
        big[0, 0] = np.trace(big[0, 0]) / self.k * np.eye(self.k)
        done = set()
        for a1 in range(nm):
            for a2 in range(nm):
                a = (a1, a2)
                if a == (0, 0) or a in done:
                    continue
                an = ((-a1) % nm, (-a2) % nm)
                if an == a:
                    continue  # self-paired: constraint holds identically
                pa = complex(phi_alpha(self.eta / m, 0.0, a1, a2, nm, p))
                pn = complex(phi_alpha(self.eta / m, 0.0, -a1, -a2, nm, p))
                avg = 0.5 * (big[a] / pa + big[an] / pn)
                big[a] = avg * pa
                big[an] = avg * pn
                done.update((a, an))
        return self.from_big(big)

    # -- evaluators ----------------------------------------------------------
    def _grids(self):
        n, m = self.n, self.m
        a1, a2, t1, t2 = np.meshgrid(np.arange(n), np.arange(n),
                                     np.arange(m), np.arange(m), indexing="ij")
        return a1.ravel(), a2.ravel(), t1.ravel(), t2.ravel()

    def _l_coeffs(self, z) -> np.ndarray:
        """Phi_{a,ta}(z, eta) over the flat index grid; z scalar or (nz,)."""
        n, m, p = self.n, self.m, self.params
        a1, a2, t1, t2 = self._grids()
        z = np.asarray(z, dtype=complex)
        return phi_big(z[..., None], self.eta, a1, a2, t1, t2, n, m, p)

    def _m_coeffs(self, z) -> np.ndarray:
        """Coefficients of the M-matrix over the flat index grid."""
        n, m, p = self.n, self.m, self.params
        a1, a2, t1, t2 = self._grids()
        z = np.asarray(z, dtype=complex)
        zero = (a1 % n == 0) & (a2 % n == 0)
        out = np.zeros(z.shape + a1.shape, dtype=complex)
        out[..., ~zero] = -phi_big(z[..., None], 0.0, a1[~zero], a2[~zero],
                                   t1[~zero], t2[~zero], n, m, p)
        tw = omega_of(t1[zero], t2[zero], m, p.tau)
        out[..., zero] = -eisenstein_E1(z[..., None] + n * tw, p)
        return out

    def L_of(self, field: CoeffField, z: complex) -> np.ndarray:
        flat = field.data.reshape(-1, self.k, self.k)
        return np.einsum("i,ijk->jk", self._l_coeffs(complex(z)), flat)

    def M_of(self, field: CoeffField, z: complex) -> np.ndarray:
        flat = field.data.reshape(-1, self.k, self.k)
        return np.einsum("i,ijk->jk", self._m_coeffs(complex(z)), flat)

    # -- equations of motion via residue matching ----------------------------
    def _nodes(self):
        """Quadrature nodes and cached basis/weight tensors for the expansion.

        Nodes are circles of radius quad_radius around each pole
        -N*tw_ta, replicated over the N x N cell translates used by the
        quasi-periodicity sector projection.  The weight tensor W folds
        the sector phases, one-pole residue normalization, and the
        quadrature weights, so the eom is three tensor contractions.
        """
        if self._cache is not None:
            return self._cache
        n, m, p = self.n, self.m, self.params
        tau = p.tau
        nq, r = self._quad_points, self._quad_radius
        circle = r * np.exp(TWO_PI_I * np.arange(nq) / nq)
        poles = [-n * omega_of(t1, t2, m, tau)
                 for t1 in range(m) for t2 in range(m)]
        zs = np.empty(m * m * nq * n * n, dtype=complex)
        wgt = np.zeros((n * n * m * m, zs.size), dtype=complex)
        eta = self.eta
        pos = 0
        for ip in range(m * m):
            t1, t2 = divmod(ip, m)
            for iq in range(nq):
                for ms in range(n):
                    for ns in range(n):
                        zs[pos] = poles[ip] + circle[iq] + ms + ns * tau
                        for al1 in range(n):
                            for al2 in range(n):
                                row = ((al1 * n + al2) * m + t1) * m + t2
                                wgt[row, pos] = (
                                    np.exp(-TWO_PI_I * (ms * al2 - ns * al1) / n
                                           + TWO_PI_I * ns * eta)
                                    * circle[iq]
                                    * np.exp(-TWO_PI_I * eta * n * t2 / m)
                                    / (nq * n * n))
                        pos += 1
        lco = self._l_coeffs(zs)    # (nodes, N^2 M^2)
        mco = self._m_coeffs(zs)
        self._cache = (lco, mco, wgt)
        return self._cache

    def eom_rhs(self, field: CoeffField) -> CoeffField:
        """Expand [L(z), M(z)] in the Phi basis: project [L, M] onto the
        z-quasi-periodicity sectors and read the residue at each of the M^2
        simple poles by circle quadrature."""
        lco, mco, wgt = self._nodes()
        flat = field.data.reshape(-1, self.k, self.k)
        lv = np.einsum("ni,ijk->njk", lco, flat)
        mv = np.einsum("ni,ijk->njk", mco, flat)
        g = lv @ mv - mv @ lv
        # wgt row order matches the (al1, al2, t1, t2) flat index layout;
        # the per-row weights already include the residue normalization of
        # Phi at its pole, exp(2*pi*i*eta*N*ta2/M)
        data = np.einsum("rn,njk->rjk", wgt, g)
        return field.with_data(data.reshape(self.field_shape()))


# --------------------------------------------------------------------------
# inverse-inertia operators
# --------------------------------------------------------------------------

def j_nonrel(field: CoeffField, n: int, params: EllipticParams) -> CoeffField:
    """(J(S))_a = -wp(omega_a) S_a for a != 0, zero at the zero mode."""
    out = np.zeros_like(field.data)
    for a in lattice(n):
        if a == (0, 0):
            continue
        out[a] = -complex(weierstrass_p(omega_of(a[0], a[1], n, params.tau), params)) \
            * field.data[a]
    return field.with_data(out)


def j_rel(field: CoeffField, eta: complex, n: int, params: EllipticParams) -> CoeffField:
    """(J^eta(S))_a = (E1(eta + omega_a) - E1(omega_a)) S_a for a != 0."""
    out = np.zeros_like(field.data)
    for a in lattice(n):
        if a == (0, 0):
            continue
        w = omega_of(a[0], a[1], n, params.tau)
        out[a] = (complex(eisenstein_E1(eta + w, params))
                  - complex(eisenstein_E1(w, params))) * field.data[a]
    return field.with_data(out)


# --------------------------------------------------------------------------
# model factory, reductions, Lax residual, relativization
# --------------------------------------------------------------------------

def make_model(kind: str, n: int, params: EllipticParams, eta: complex | None = None,
               m: int = 1, k: int = 1) -> EllipticTopModel:
    if kind == "nonrel-top":
        return NonRelativisticTop(n, params)
    if kind == "rel-top":
        return RelativisticTop(n, params, _need_eta(kind, eta))
    if kind == "matrix-top":
        return MatrixTop(n, params, _need_eta(kind, eta), m)
    if kind == "gaudin-lattice":
        return GaudinLatticeTop(n, params, _need_eta(kind, eta), k)
    if kind == "coupled":
        return CoupledTop(n, params, _need_eta(kind, eta), m, k)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def _need_eta(kind: str, eta) -> complex:
    if eta is None:
        raise ValueError(f"model {kind!r} needs the coupling parameter eta")
    return complex(eta)


def project_constraints(field: CoeffField, reduction: str,
                        model: EllipticTopModel) -> CoeffField:
    """Project onto a reduction's constraint set (exact in c-coordinates)."""
    n, p = model.n, model.params
    if reduction == "z2-nonrel":
        # fixed points of S -> h S h^{-1}; in canonical coefficients the
        # invariant submanifold carries the T-reduction sign of -a
        out = field.data.copy()
        for a in lattice(n):
            an = ((-a[0]) % n, (-a[1]) % n)
            if an == a:
                continue  # self-paired: S_a = S_a, nothing to enforce
            sg = reduction_sign((-a[0], -a[1]), n)
            avg = 0.5 * (field.data[a] + sg * field.data[an])
            out[a] = avg
            out[an] = sg * avg
        return field.with_data(out)
    if reduction == "z2-rel":
        eta = getattr(model, "eta", None)
        if eta is None:
            raise ValueError("z2-rel reduction needs a relativistic model")
        out = field.data.copy()
        done = set()
        for a in lattice(n):
            if a == (0, 0) or a in done:
                continue
            an = ((-a[0]) % n, (-a[1]) % n)
            if an == a:
                continue  # self-paired: constraint holds identically
            pa = complex(phi_alpha(eta, 0.0, a[0], a[1], n, p))
            pn = complex(phi_alpha(eta, 0.0, -a[0], -a[1], n, p))
            sg = reduction_sign((-a[0], -a[1]), n)
            avg = 0.5 * (field.data[a] / pa + sg * field.data[an] / pn)
            out[a] = avg * pa
            out[an] = sg * avg * pn
            done.update((a, an))
        return field.with_data(out)
    if reduction in ("matrix-top-constraints", "gaudin-constraints",
                     "coupled-constraints"):
        return model.project(field)
    raise ValueError(f"unknown reduction {reduction!r}; expected one of "
                     f"{REDUCTION_KINDS}")


def constraint_deviation(field: CoeffField, reduction: str,
                         model: EllipticTopModel) -> float:
    proj = project_constraints(field, reduction, model)
    return field.with_data(field.data - proj.data).norm()


def lax_residual(model: EllipticTopModel, field: CoeffField,
                 spectral_samples, relative: bool = True) -> dict:
    """max_z || dL/dt (z) - [L(z), M(z)] || over the given spectral points.

    dL/dt is L evaluated on the eom output (L is linear in the
    coefficients), so the two sides go through independent code paths.
    """
    sdot = model.eom_rhs(field)

    def one(z):
        ldot = model.L_of(sdot, z)
        lm = model.L_of(field, z)
        mm = model.M_of(field, z)
        comm = lm @ mm - mm @ lm
        a = float(np.linalg.norm(ldot - comm))
        return a, a / max(float(np.linalg.norm(comm)), 1e-300)

    res = thread_map(one, list(spectral_samples))
    return {"max_abs": max(r[0] for r in res),
            "max_rel": max(r[1] for r in res)}


def relativize(field: CoeffField, eta: complex, model: EllipticTopModel) -> CoeffField:
    """Change of variables S_a -> S_a / varphi_a(eta, omega_a) (a != 0)."""
    n, p = model.n, model.params
    out = field.data.copy()
    for a in lattice(n):
        if a == (0, 0):
            continue
        out[a] = field.data[a] / complex(phi_alpha(eta, 0.0, a[0], a[1], n, p))
    return field.with_data(out)


def check_relativization(field: CoeffField, eta: complex, z: complex,
                         model: EllipticTopModel) -> float:
    """Residual of L^eta(z - eta, L0(eta, S)) = phi(z - eta, eta) L0(z, S)."""
    n, p = model.n, model.params
    from .torus import decompose

    def l0(zz):
        out = field.data[0, 0, 0, 0] * np.eye(n, dtype=complex)
        for a in lattice(n):
            if a == (0, 0):
                continue
            out += T(a, n) * field.data[a][0, 0] * phi_alpha(zz, 0.0, a[0], a[1], n, p)
        return out

    sprime = decompose(l0(eta), n)
    lhs = np.zeros((n, n), dtype=complex)
    for a in lattice(n):
        lhs += T(a, n) * sprime[a] * phi_alpha(z - eta, eta, a[0], a[1], n, p)
    rhs = complex(kronecker_phi(z - eta, eta, p)) * l0(z)
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


# --------------------------------------------------------------------------
# Gaudin reductions of the coupled model
# --------------------------------------------------------------------------

@dataclass
class GaudinReduction:
    """Reduced Lax data: marked points, declared residues, and the evaluator."""

    variant: int
    marked_points: list
    residues: list
    scalars: dict
    L: Callable

    def extract_residue(self, i: int, quad_points: int = 24,
                        radius: float = 0.05) -> np.ndarray:
        """Numerical residue at marked point i by circle quadrature."""
        c = self.marked_points[i]
        ws = radius * np.exp(TWO_PI_I * np.arange(quad_points) / quad_points)
        out = None
        for w in ws:
            v = self.L(c + w) * w
            out = v if out is None else out + v
        return out / quad_points


def gaudin_reduce(field: CoeffField, variant: int, eta: complex,
                  model: CoupledTop) -> GaudinReduction:
    """Project a coupled-model field onto the Gaudin form.

    Variant 1 (requires K = N) keeps the Z_N-Fourier-transformed blocks
    proportional to T_gamma and yields M^2 marked points at -N*tw_ta;
    variant 2 (requires K = M) is the mirror with N^2 points at -M*w_a.
    """
    n, m, p = model.n, model.m, model.params
    tau = p.tau
    eta = complex(eta)
    if variant == 1:
        if model.k != n:
            raise ValueError("variant 1 needs K = N blocks")
        scalars = {}
        atil = {}
        for t1 in range(m):
            for t2 in range(m):
                for g in lattice(n):
                    blk = sum(kappa(g, al, n) ** 2 * field.data[al[0], al[1], t1, t2]
                              for al in lattice(n)) / n
                    s = np.exp(TWO_PI_I * eta * t2) * np.trace(
                        T((-g[0], -g[1]), n) @ blk) / n
                    scalars[((t1, t2), g)] = s
                    atil[(g, (t1, t2))] = (np.exp(-TWO_PI_I * eta * t2) * s * T(g, n))
        marked, resid = [], []
        for t1 in range(m):
            for t2 in range(m):
                marked.append(complex(-n * omega_of(t1, t2, m, tau)))
                resid.append(np.exp(TWO_PI_I * eta * t2 * (n - m) / m)
                             * sum(scalars[((t1, t2), g)] * T(g, n)
                                   for g in lattice(n)))

        def L(z):
            out = np.zeros((n, n), dtype=complex)
            for (g, ta), blk in atil.items():
                out += blk * complex(phi_big(z, eta, g[0], g[1], ta[0], ta[1], n, m, p))
            return out

        return GaudinReduction(1, marked, resid, scalars, L)

    if variant == 2:
        if model.k != m:
            raise ValueError("variant 2 needs K = M blocks")
        km = lambda tg, ta: kappa(tg, ta, m)
        scalars = {}
        atil = {}
        for al in lattice(n):
            for tg in lattice(m):
                blk = sum(km(tg, ta) ** 2 * field.data[al[0], al[1], ta[0], ta[1]]
                          for ta in lattice(m)) / m
                s = np.exp(TWO_PI_I * eta * al[1]) * np.trace(
                    T((-tg[0], -tg[1]), m) @ blk) / m
                scalars[(al, tg)] = s
                atil[(al, tg)] = np.exp(-TWO_PI_I * eta * al[1]) * s * T(tg, m)
        marked, resid = [], []
        for al in lattice(n):
            marked.append(complex(-m * omega_of(al[0], al[1], n, tau)))
            resid.append(np.exp(TWO_PI_I * eta * al[1] * (m - n) / n)
                         * sum(scalars[(al, tg)] * T(tg, m) for tg in lattice(m)))

        def L(z):
            out = np.zeros((m, m), dtype=complex)
            for (al, tg), blk in atil.items():
                out += blk * complex(
                    phi_big_swapped(z, eta, tg[0], tg[1], al[0], al[1], n, m, p))
            return out

        return GaudinReduction(2, marked, resid, scalars, L)

    raise ValueError("variant must be 1 or 2")


# --------------------------------------------------------------------------
# the four equivalent coefficient forms of the coupled-model matrix
# --------------------------------------------------------------------------

def coupled_form_base(model: CoupledTop, field: CoeffField, z, eta) -> np.ndarray:
    n, m, p = model.n, model.m, model.params
    out = np.zeros((model.k, model.k), dtype=complex)
    for al in lattice(n):
        for ta in lattice(m):
            out += field.data[al[0], al[1], ta[0], ta[1]] * complex(
                phi_big(z, eta, al[0], al[1], ta[0], ta[1], n, m, p))
    return out


def coupled_form_w303(model: CoupledTop, field: CoeffField, z, eta) -> np.ndarray:
    """Big-lattice form sum_a curlyA^a varphi_a(M z, omega_a + eta/M)."""
    n, m, nm, p = model.n, model.m, model.nm, model.params
    big = model.to_big(field)
    out = np.zeros((model.k, model.k), dtype=complex)
    for a1 in range(nm):
        for a2 in range(nm):
            out += big[a1, a2] * complex(phi_alpha(m * z, eta / m, a1, a2, nm, p))
    return out


def coupled_form_w305(model: CoupledTop, field: CoeffField, z, eta) -> np.ndarray:
    """Dual big-lattice form sum_a curlyA'^a varphi_a(N eta, omega_a + z/N)."""
    n, m, nm, p = model.n, model.m, model.nm, model.params
    out = np.zeros((model.k, model.k), dtype=complex)
    for g in lattice(n):
        for ta in lattice(m):
            a = ((m * g[0] + n * ta[0]) % nm, (m * g[1] + n * ta[1]) % nm)
            blk = sum(kappa(g, al, n) ** 2 * field.data[al[0], al[1], ta[0], ta[1]]
                      for al in lattice(n)) / n
            out += blk * complex(phi_alpha(n * eta, z / n, a[0], a[1], nm, p))
    return out


def coupled_form_w307(model: CoupledTop, field: CoeffField, z, eta) -> np.ndarray:
    """Z_N-Fourier of the big field, evaluated as Phi_{g,ta}(N eta/M, M z/N)."""
    n, m, nm, p = model.n, model.m, model.nm, model.params
    big = model.to_big(field)
    out = np.zeros((model.k, model.k), dtype=complex)
    for g in lattice(n):
        for ta in lattice(m):
            blk = np.zeros((model.k, model.k), dtype=complex)
            for al in lattice(n):
                a = ((m * al[0] + n * ta[0]) % nm, (m * al[1] + n * ta[1]) % nm)
                blk += kappa(g, al, n) ** 2 * big[a]
            out += blk / n * complex(
                phi_big(n * eta / m, m * z / n, g[0], g[1], ta[0], ta[1], n, m, p))
    return out


def coupled_form_w308(model: CoupledTop, field: CoeffField, z, eta) -> np.ndarray:
    """Z_M-Fourier of the big field, evaluated as Phi~_{tg,al}(eta, z)."""
    n, m, nm, p = model.n, model.m, model.nm, model.params
    big = model.to_big(field)
    out = np.zeros((model.k, model.k), dtype=complex)
    for al in lattice(n):
        for tg in lattice(m):
            blk = np.zeros((model.k, model.k), dtype=complex)
            for ta in lattice(m):
                a = ((m * al[0] + n * ta[0]) % nm, (m * al[1] + n * ta[1]) % nm)
                blk += kappa(tg, ta, m) ** 2 * big[a]
            out += blk / m * complex(
                phi_big_swapped(eta, z, tg[0], tg[1], al[0], al[1], n, m, p))
    return out
