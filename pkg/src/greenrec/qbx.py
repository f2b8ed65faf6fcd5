"""Line-Taylor QBX for the 2D single-layer potential on closed curves.

For every source-target pair the geometry is rotated about the expansion
center so that the center-to-target direction becomes x1.  The expansion then
only needs d^i/dx1^i of the kernel, which come from a derivative backend:

* ``recurrence``: the hybrid large/small-|x1| evaluator, O(1) work per order;
* ``direct``: closed-form chain-rule tables, O(p) work per order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import CapabilityError, ConfigError, GeometryError, ReferenceNotConverged
from .evaluator import HybridConfig, HybridEvaluator
from .flops import FlopCounter
from .kernels import hankel1_01_array, bessel_k01_array
from .symcore import sqrt_coefficient_table, square_coefficient_table

DIRECT_KERNELS = ("laplace2d", "helmholtz2d", "yukawa2d", "biharmonic2d")


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float
    angle: float = 0.0  # rigid rotation of the whole curve about the origin

    def _rot(self, v):
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])

    def point(self, t):
        return self._rot(np.array([self.a * np.cos(t), self.b * np.sin(t)]))

    def speed(self, t):
        return np.hypot(self.a * np.sin(t), self.b * np.cos(t))

    def normal(self, t):
        sp = self.speed(t)
        return self._rot(np.array([self.b * np.cos(t), self.a * np.sin(t)]) / sp)

    def discretize(self, N):
        if N < 8:
            raise ConfigError("a closed curve needs at least 8 nodes")
        t = 2 * np.pi * np.arange(N) / N
        speed = self.speed(t)
        return CurveDiscretization(self, t, self.point(t), self.normal(t), speed, 2 * np.pi / N * speed)


@dataclass(frozen=True, eq=False)
class CurveDiscretization:
    shape: Ellipse
    t: np.ndarray
    nodes: np.ndarray  # (2, N)
    normals: np.ndarray  # (2, N), outward, unit
    speed: np.ndarray
    weights: np.ndarray  # periodic trapezoid weights including the speed factor

    @property
    def N(self):
        return len(self.t)

    def spacing(self):
        """Local node spacing h_j = |gamma'(t_j)| * 2 pi / N."""
        return self.weights

    def rotated(self, angle):
        return Ellipse(self.shape.a, self.shape.b, self.shape.angle + angle).discretize(self.N)

    def refined(self, N):
        return self.shape.discretize(N)


def discretize_ellipse(a, b, N):
    if not (a > 0 and b > 0):
        raise ConfigError("semi-axes must be positive")
    return Ellipse(a, b).discretize(N)


def rotate_frame(target, center, normal, source):
    """Rotate about ``center`` so that ``normal`` becomes (1, 0)."""
    nu = np.asarray(normal, dtype=float)
    if abs(math.hypot(nu[0], nu[1]) - 1) > 1e-12:
        raise GeometryError("normal is not a unit vector")
    c = np.asarray(center, dtype=float)

    def rot(v):
        v = np.asarray(v, dtype=float) - c
        return np.array([nu[0] * v[0] + nu[1] * v[1], -nu[1] * v[0] + nu[0] * v[1]]) + c

    return rot(target), rot(source)


# ---------------------------------------------------------------------------
# backends


class RecurrenceBackend:
    name = "recurrence"

    def __init__(self, kernel, hybrid=None):
        self.kernel = kernel
        self.hybrid = hybrid or HybridConfig()
        self.evaluator = HybridEvaluator(kernel, self.hybrid)

    def derivatives(self, z, p, counter=None):
        """(p+1, M) array of d^i/dx1^i G at the columns of z."""
        return self.evaluator.evaluate_batch(z, p, counter).values


class DirectBackend:
    """Closed-form chain-rule tables for d^m G(|z|) along z1, no recurrence.

    With f(s) = G(sqrt s) and s = |z|^2,

        d^m G = sum_k sq(m,k) z1^{2k-m} f^(k),  f^(k) = sum_l sr(k,l) |z|^{l-2k} G^(l).

    ``expanded`` (default) stores, for each order m, the fully expanded list
    of terms c * z1^a * |z|^-b * G^(l), the shape of a symbolic derivative
    after common-subexpression elimination of powers and radial derivatives;
    its cost grows faster than linearly per order.  ``factored`` shares
    f^(k) across orders and costs O(m) at order m.
    """

    name = "direct"

    def __init__(self, kernel, p_max=16, mode="expanded"):
        if kernel.id not in DIRECT_KERNELS:
            raise CapabilityError(f"no direct derivative tables for {kernel.id}")
        if mode not in ("expanded", "factored"):
            raise ConfigError("direct mode is 'expanded' or 'factored'")
        self.kernel = kernel
        self.mode = mode
        self._grow(p_max)

    def _grow(self, p):
        self.p_max = p
        sq = square_coefficient_table(p)
        sr = sqrt_coefficient_table(p)
        self.sq = [[float(sq[m][k]) for k in range(m + 1)] for m in range(p + 1)]
        self.sr = [[float(sr[k][l]) for l in range(k + 1)] for k in range(p + 1)]
        self.table = [[(1.0, 0, 0, 0)]]
        for m in range(1, p + 1):
            terms = []
            for k in range((m + 1) // 2, m + 1):
                for l in range(1, k + 1):
                    c = sq[m][k] * sr[k][l]
                    if c:
                        terms.append((float(c), 2 * k - m, 2 * k - l, l))
            self.table.append(terms)

    def radial(self, r, p, counter):
        """[G^(0) .. G^(p)] at r."""
        kid, k = self.kernel.id, self.kernel.k
        M = r.size
        inv = 1.0 / r
        out = []
        if kid == "laplace2d":
            out.append(-np.log(r) / (2 * np.pi))
            g = -inv / (2 * np.pi)
            for l in range(1, p + 1):
                out.append(g)
                g = g * (-l) * inv
            _count(counter, M, adds=0, mults=2 + 2 * p, calls=1)
            return out
        if kid == "biharmonic2d":
            lg = np.log(r)
            c = 1 / (8 * np.pi)
            out.append(c * r * r * lg)
            if p >= 1:
                out.append(c * (2 * r * lg + r))
            if p >= 2:
                out.append(c * (2 * lg + 3))
            g = 2 * c * inv
            for l in range(3, p + 1):
                out.append(g)
                g = g * (-(l - 2)) * inv
            _count(counter, M, adds=3, mults=9 + 2 * max(p - 2, 0), calls=1)
            return out
        z = k * r
        if kid == "helmholtz2d":
            h0, h1 = hankel1_01_array(z)
            orders = [h0, h1]
            two_over = 2 / z
            for nu in range(1, p):
                orders.append(nu * two_over * orders[nu] - orders[nu - 1])
            sign, scale = -1, 0.25j
        else:
            k0, k1 = bessel_k01_array(z)
            orders = [k0, k1]
            two_over = 2 / z
            for nu in range(1, p):
                orders.append(nu * two_over * orders[nu] + orders[nu - 1])
            sign, scale = 1, 1 / (2 * np.pi)
        _count(counter, M, adds=max(p - 1, 0), mults=2 + 2 * max(p - 1, 0), calls=2)

        def h(nu):
            if nu >= 0:
                return orders[nu]
            return orders[-nu] * (-1) ** nu if kid == "helmholtz2d" else orders[-nu]

        half = k / 2 if kid == "helmholtz2d" else -k / 2
        for l in range(p + 1):
            acc = 0
            for j in range(l + 1):
                acc = acc + (sign ** j) * math.comb(l, j) * h(2 * j - l)
            out.append(scale * half ** l * acc)
            _count(counter, M, adds=l, mults=l + 1 + 2)
        return out

    def derivatives(self, z, p, counter=None):
        if p > self.p_max:
            self._grow(p)
        z = np.asarray(z, dtype=float)
        x1 = z[0]
        r2 = np.sum(z * z, axis=0)
        r = np.sqrt(r2)
        M = r.size
        _count(counter, M, adds=z.shape[0] - 1, mults=z.shape[0], calls=1)
        g = self.radial(r, p, counter)
        inv = 1.0 / r
        invpow = [np.ones_like(r)]
        for _ in range(2 * p):
            invpow.append(invpow[-1] * inv)
        xpow = [np.ones_like(r)]
        for _ in range(p):
            xpow.append(xpow[-1] * x1)
        _count(counter, M, mults=1 + max(2 * p - 1, 0) + max(p - 1, 0))
        if self.mode == "factored":
            return self._factored(g, xpow, invpow, p, counter, M)
        out = [g[0]]
        for m in range(1, p + 1):
            acc = 0
            adds = mults = 0
            for c, a, b, l in self.table[m]:
                term = c * g[l]
                mults += 1
                if a:
                    term = term * xpow[a]
                    mults += 1
                if b:
                    term = term * invpow[b]
                    mults += 1
                acc = acc + term
                adds += 1
            out.append(acc)
            _count(counter, M, adds=adds - 1, mults=mults)
        return np.array(out)

    def _factored(self, g, xpow, invpow, p, counter, M):
        f = [g[0]]
        for kk in range(1, p + 1):
            acc = 0
            for l in range(1, kk + 1):
                acc = acc + self.sr[kk][l] * invpow[2 * kk - l] * g[l]
            f.append(acc)
            _count(counter, M, adds=kk - 1, mults=2 * kk)
        out = []
        for m in range(p + 1):
            acc = 0
            lo = (m + 1) // 2
            for kk in range(lo, m + 1):
                acc = acc + self.sq[m][kk] * xpow[2 * kk - m] * f[kk]
            out.append(acc)
            _count(counter, M, adds=m - lo, mults=2 * (m - lo + 1))
        return np.array(out)


def _count(counter, M, adds=0, mults=0, calls=0):
    if counter is not None:
        counter.add(adds, mults, calls, times=M)


_BACKENDS = {}


def make_backend(kind, kernel, hybrid=None):
    """``recurrence``, ``direct`` (expanded tables) or ``direct-factored``; objects pass through."""
    if not isinstance(kind, str):
        return kind
    key = (kind, kernel, hybrid)
    if key not in _BACKENDS:
        if kind == "recurrence":
            _BACKENDS[key] = RecurrenceBackend(kernel, hybrid)
        elif kind == "direct":
            _BACKENDS[key] = DirectBackend(kernel)
        elif kind == "direct-factored":
            _BACKENDS[key] = DirectBackend(kernel, mode="factored")
        else:
            raise ConfigError(f"unknown backend {kind!r}")
    return _BACKENDS[key]


# ---------------------------------------------------------------------------
# expansions


def _taylor_weights(r, p, counter, M):
    """r^i / i! for i = 0..p."""
    out = [np.ones_like(r)]
    for i in range(1, p + 1):
        out.append(out[-1] * r / i)
    _count(counter, M, mults=2 * p)
    return np.array(out)


def line_taylor_contribution(kernel, target, source, r, p_qbx, backend="recurrence", counter=None):
    """sum_{i<=p} d^i/dt^i K(target + t e1, source)|_{t=-r} r^i / i!, frame already rotated."""
    if r <= 0:
        raise ConfigError("expansion radius must be positive")
    be = make_backend(backend, kernel)
    z = (np.asarray(target, dtype=float) - np.array([r, 0.0])) - np.asarray(source, dtype=float)
    if not np.any(z):
        raise GeometryError("expansion center coincides with a source")
    D = be.derivatives(z[:, None], p_qbx, counter)[:, 0]
    w = _taylor_weights(np.array([float(r)]), p_qbx, counter, 1)[:, 0]
    _count(counter, 1, adds=p_qbx, mults=p_qbx + 1)
    return complex(np.sum(D * w)) if np.iscomplexobj(D) else float(np.sum(D * w))


@dataclass(frozen=True)
class QbxConfig:
    p_qbx: int = 5
    radius_factor: float = 2.5
    backend: str = "recurrence"
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    # sources are the curve resampled at oversample * N nodes; radii follow the target grid
    oversample: int = 4
    jobs: int = 1
    chunk_pairs: int = 200_000

    def __post_init__(self):
        if self.p_qbx < 0:
            raise ConfigError("p_qbx must be non-negative")
        if not self.radius_factor > 0:
            raise ConfigError("radius_factor must be positive")
        if self.oversample < 1 or self.jobs < 1:
            raise ConfigError("oversample and jobs must be at least 1")


def expansion_radii(curve, cfg):
    r = cfg.radius_factor * curve.spacing()
    if np.any(r < 1e-12):
        raise ConfigError("expansion radius below 1e-12")
    return r


def _density_samples(curve, density):
    if callable(density):
        return np.asarray(density(curve.t), dtype=float)
    sigma = np.asarray(density)
    if sigma.shape != (curve.N,):
        raise ConfigError("density needs one sample per node")
    return sigma


def _resample(curve, density, N):
    """Density at N equispaced parameters; node samples are extended trigonometrically."""
    if callable(density):
        return np.asarray(density(2 * np.pi * np.arange(N) / N), dtype=float)
    sigma = _density_samples(curve, density)
    if N == curve.N:
        return sigma
    coeffs = np.fft.rfft(sigma)
    if curve.N % 2 == 0:
        coeffs[-1] *= 0.5  # split the Nyquist mode symmetrically
    return np.fft.irfft(coeffs, n=N) * (N / curve.N)


def _targets_block(curve, sources, wsig, idx, radii, p, backend, counter):
    Ns = sources.N
    T = len(idx)
    nu = curve.normals[:, idx]
    rad = radii[idx]
    c = curve.nodes[:, idx] - rad * nu
    d = c[:, :, None] - sources.nodes[:, None, :]
    # rotation about the center sending nu to e1
    z = np.stack([nu[0][:, None] * d[0] + nu[1][:, None] * d[1],
                  -nu[1][:, None] * d[0] + nu[0][:, None] * d[1]]).reshape(2, T * Ns)
    if np.any(np.all(z == 0, axis=0)):
        raise GeometryError("expansion center coincides with a source")
    _count(counter, T * Ns, adds=4, mults=4)
    D = backend.derivatives(z, p, counter).reshape(p + 1, T, Ns)
    w = _taylor_weights(rad, p, counter, T)
    contrib = np.einsum("it,itn->tn", w, D)
    _count(counter, T * Ns, adds=p + 1, mults=p + 2)
    return contrib @ wsig


def single_layer_qbx(curve, density, targets=None, cfg=None, kernel=None, counter=None):
    """QBX values of S[sigma] at the curve nodes listed in ``targets`` (all nodes by default)."""
    from .kernels import get_kernel

    cfg = cfg or QbxConfig()
    kernel = kernel or get_kernel("laplace2d")
    if kernel.dimension != 2:
        raise CapabilityError("QBX is implemented for 2D kernels")
    targets = np.arange(curve.N) if targets is None else np.asarray(targets, dtype=int)
    radii = expansion_radii(curve, cfg)
    sources = curve if cfg.oversample == 1 else curve.refined(curve.N * cfg.oversample)
    wsig = sources.weights * _resample(curve, density, sources.N)
    backend = make_backend(cfg.backend, kernel, cfg.hybrid)
    per_block = max(1, cfg.chunk_pairs // sources.N)
    blocks = [targets[i:i + per_block] for i in range(0, len(targets), per_block)]
    counters = [FlopCounter() for _ in blocks]

    def run(j):
        return _targets_block(curve, sources, wsig, blocks[j], radii, cfg.p_qbx, backend, counters[j])

    if cfg.jobs == 1 or len(blocks) == 1:
        results = [run(j) for j in range(len(blocks))]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(run, range(len(blocks))))
    if counter is not None:
        for c in counters:
            counter.merge(c)
    return np.concatenate(results) if results else np.zeros(0)


# ---------------------------------------------------------------------------
# reference values


def _kress_single_layer(shape, N, sigma_fine, target_nodes):
    """Laplace single layer at nodes of an N-point grid by the logarithmic-split rule.

    log|y(t) - y(s)| = 1/2 log(4 sin^2((t - s)/2)) + smooth part; the first
    term is integrated exactly against the trigonometric interpolant.
    """
    t = 2 * np.pi * np.arange(N) / N
    y = shape.point(t)
    f = sigma_fine * shape.speed(t)
    n = N // 2
    m = np.arange(1, n)
    # R(t_i - t_j) depends on i - j only
    Rw = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) @ (1.0 / m)) - (np.pi / n ** 2) * np.cos(n * t)
    j = np.arange(N)
    out = []
    for i in target_nodes:
        dt = t[i] - t
        diff2 = np.sum((y[:, [i]] - y) ** 2, axis=0)
        s2 = 4 * np.sin(dt / 2) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.log(diff2 / s2)
        smooth[i] = np.log(shape.speed(t[i]) ** 2)
        val = 0.5 * np.dot(Rw[(i - j) % N], f) + 0.5 * (2 * np.pi / N) * np.dot(smooth, f)
        out.append(-val / (2 * np.pi))
    return np.array(out)


def reference_potential(curve, density, targets=None, oversample=4, tol=1e-10, method="kress", p_qbx=5):
    """Self-certified Laplace single-layer values at curve nodes.

    ``kress`` uses spectral product quadrature for the logarithmic kernel;
    ``qbx`` runs the direct backend at order p_qbx + 4 on the oversampled
    curve.  Either way the result at oversample and 2 * oversample must agree
    to ``tol`` (relative to the largest value).
    """
    if oversample < 4:
        raise ConfigError("oversample must be at least 4")
    targets = np.arange(curve.N) if targets is None else np.asarray(targets, dtype=int)

    def at(os):
        N = curve.N * os
        fine_targets = targets * os
        sigma = _resample(curve, density, N)
        if method == "kress":
            return _kress_single_layer(curve.shape, N, sigma, fine_targets)
        if method == "qbx":
            fine = curve.refined(N)
            cfg = QbxConfig(p_qbx=p_qbx + 4, backend="direct")
            return single_layer_qbx(fine, sigma, fine_targets, cfg)
        raise ConfigError(f"unknown reference method {method!r}")

    a = at(oversample)
    b = at(2 * oversample)
    scale = max(np.max(np.abs(b)), 1e-300)
    change = float(np.max(np.abs(a - b)) / scale)
    if change > tol:
        raise ReferenceNotConverged(change, tol)
    return b


def circle_single_layer(R, m, theta):
    """Exact on-surface S[cos(m t)] for the circle of radius R (m = 0: constant density)."""
    if m == 0:
        return -R * math.log(R) * np.ones_like(np.asarray(theta, dtype=float))
    return R * np.cos(m * np.asarray(theta)) / (2 * m)
