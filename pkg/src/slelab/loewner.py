"""Chordal Loewner numerics: forward trace, curve unzipping, capacity.

Discretization is the vertical-slit zipper.  A step with capacity increment
dt and driving value w uses the elementary map

    advance (hull removal):  z -> w + sqrt((z - w)^2 + 4 dt)
    inverse (hull growth):   z -> w + sqrt((z - w)^2 - 4 dt)

with the square root branch fixing the upper half-plane; points within 1e-12
of the branch cut are nudged by +1e-12j before mapping.  The elementary map
is exact for piecewise-constant driving, and its expansion at infinity is
z + 2 dt / z + O(z^-2), so capacities add and the hull coefficient a_{-1}
equals twice the accumulated time.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateSegmentError, InvalidCurveError,
                     SolverFailureError)
from .rng import as_generator, derive_rng_stream

_NUDGE = 1e-12


@dataclass(eq=False)
class DrivingFunction:
    """Sampled driving term W(t) on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(self.times) < 1 or self.times[0] != 0.0:
            raise ValueError("time grid must start at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.values))):
            raise ValueError("driving samples must be finite")

    @property
    def horizon(self):
        return float(self.times[-1])

    def interpolate(self, grid):
        """Linear interpolation onto another time grid."""
        return np.interp(grid, self.times, self.values)

    def to_csv_rows(self):
        return list(zip(self.times.tolist(), self.values.tolist()))


@dataclass(eq=False)
class PlanarCurve:
    """Polyline in the closed upper half-plane starting on the real axis."""

    points: np.ndarray
    mesh: float = None
    model: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if len(pts) < 1:
            raise ValueError("curve needs at least one point")
        if abs(pts[0].imag) > 1e-9 * _scale(pts):
            raise InvalidCurveError("curve must start on the real axis")
        pts[0] = complex(pts[0].real, 0.0)
        if np.any(pts.imag < -1e-9 * _scale(pts)):
            raise InvalidCurveError("curve dips below the real axis")
        pts = pts.real + 1j * np.maximum(pts.imag, 0.0)
        if len(pts) > 1 and np.any(pts[1:] == pts[:-1]):
            raise ValueError("consecutive curve points must be distinct")
        self.points = pts

    def __len__(self):
        return len(self.points)

    def diameter(self):
        pts = self.points
        return float(max(np.ptp(pts.real), np.ptp(pts.imag)))

    def to_json(self):
        return {
            "mesh": self.mesh,
            "model": self.model,
            "points": [[float(z.real), float(z.imag)] for z in self.points],
        }

    @staticmethod
    def from_json(obj):
        pts = np.array([complex(x, y) for x, y in obj["points"]])
        return PlanarCurve(pts, mesh=obj.get("mesh"), model=obj.get("model", ""))


def _scale(pts):
    m = np.max(np.abs(pts)) if len(pts) else 0.0
    return max(1.0, float(m))


def normalize_to_halfplane(points, start_point, clamp_depth=0.0):
    """Translate so `start_point` maps to 0 and clamp shallow dips to ℝ.

    Interface extractors hand in lattice polylines whose excursions along a
    free boundary may sit up to `clamp_depth` below the starting level; those
    are projected onto the axis after translation.
    """
    pts = np.asarray(points, dtype=complex) - start_point
    low = pts.imag.min()
    if low < -abs(clamp_depth) - 1e-9:
        raise InvalidCurveError(f"curve dips {-low:.3g} below its start")
    pts = pts.real + 1j * np.maximum(pts.imag, 0.0)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = pts[1:] != pts[:-1]
    return pts[keep]


@dataclass(eq=False)
class HullState:
    """Chronological (dt, w) steps whose slit maps compose to the hull map."""

    steps: tuple  # of (dt, w) pairs

    @property
    def total_capacity_coefficient(self):
        """The a_{-1} coefficient of the composed map: 2 * sum(dt)."""
        return 2.0 * sum(dt for dt, _ in self.steps)


def _sqrt_upper(zeta):
    """Branch of sqrt mapping C minus the positive reals into the UHP."""
    return 1j * np.sqrt(-zeta)


def _nudge_up(z):
    """Lift points hugging the real axis slightly into the UHP."""
    im = np.imag(z)
    needs = np.abs(im) < _NUDGE
    if np.any(needs):
        z = np.where(needs, np.real(z) + 1j * _NUDGE, z)
    return z


def slit_advance(z, w, dt):
    """Elementary hull-removal map for a step (dt, w)."""
    zz = _nudge_up(np.asarray(z, dtype=complex) - w)
    return w + _sqrt_upper(zz * zz + 4.0 * dt)


def slit_inverse(z, w, dt):
    """Elementary hull-growth map; inverse of slit_advance."""
    zz = _nudge_up(np.asarray(z, dtype=complex) - w)
    return w + _sqrt_upper(zz * zz - 4.0 * dt)


def sample_sle_driving(kappa, horizon, steps, seed):
    """Brownian driving with variance parameter kappa on a uniform grid."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = as_generator(seed)
    dt = horizon / steps
    increments = rng.standard_normal(steps) * np.sqrt(kappa * dt)
    values = np.concatenate([[0.0], np.cumsum(increments)])
    times = np.linspace(0.0, horizon, steps + 1)
    times[-1] = horizon
    return DrivingFunction(times, values)


def sample_sle_ensemble(kappa, horizon, steps, replicas, master_seed):
    """Independent drivings, one Philox stream per replica."""
    return [sample_sle_driving(kappa, horizon, steps,
                               derive_rng_stream(master_seed, i))
            for i in range(replicas)]


def forward_trace(driving, model="sle"):
    """Trace gamma(t_k) of the Loewner flow driven by `driving`.

    Composes the inverse elementary maps in reverse chronological order; the
    output curve has one point per time sample plus the starting point.
    """
    t = driving.times
    w = driving.values
    n = len(t) - 1
    if n < 1:
        return PlanarCurve(np.array([complex(w[0], 0.0)]), model=model)
    dts = np.diff(t)
    pts = w[1:].astype(complex)  # evaluation points W(t_k)
    for j in range(n, 0, -1):
        pts[j - 1:] = slit_inverse(pts[j - 1:], w[j], dts[j - 1])
        bad = np.imag(pts[j - 1:]) < -1e-9
        if np.any(bad):
            raise SolverFailureError("trace left the upper half-plane",
                                     step=int(j))
    out = np.concatenate([[complex(w[0], 0.0)], pts])
    return PlanarCurve(out, model=model)


def _unzip_core(pts, max_steps, capacity_cap, max_refinement):
    """Shared unzip loop.

    capacity_cap, when given, is an absolute per-step capacity bound:
    vertices above it are split by chord midpoints.  Returns
    (times, values, steps, vertex_times) where vertex_times[k] is the
    cumulative capacity after the k-th *original* vertex was absorbed.
    """
    scale = _scale(pts)
    work = pts.copy()
    work.imag[:] = np.maximum(work.imag, 0.0)
    # origin[k]: index of the original vertex the working vertex came from
    origin = list(range(len(work)))
    times = [0.0]
    values = [float(work[0].real)]
    steps = []
    vertex_times = np.zeros(len(pts))
    t_total = 0.0
    eps_cap = 1e-30 * scale * scale

    i = 1
    inserted = 0
    while i < len(work):
        z = work[i]
        dt = 0.25 * z.imag * z.imag
        if dt <= eps_cap:
            if abs(z.real - values[-1]) <= 1e-14 * scale:
                raise DegenerateSegmentError(
                    f"vertex {origin[i]} maps onto the current base point")
            if origin[i] >= 0:
                vertex_times[origin[i]] = t_total
            i += 1  # zero-capacity touch of the axis: no hull growth
            continue
        if capacity_cap is not None and dt > capacity_cap and inserted < max_refinement:
            mid = 0.5 * (complex(values[-1], 0.0) + z)
            work = np.insert(work, i, mid)
            origin.insert(i, -1)
            inserted += 1
            continue
        inserted = 0
        w = float(z.real)
        t_total += dt
        times.append(t_total)
        values.append(w)
        steps.append((dt, w))
        if origin[i] >= 0:
            vertex_times[origin[i]] = t_total
        if i + 1 < len(work):
            work[i + 1:] = slit_advance(work[i + 1:], w, dt)
        i += 1
        if max_steps is not None and len(steps) >= max_steps:
            break
    return times, values, steps, vertex_times


def unzip_curve(curve, max_steps=None, capacity_fraction=1e-2,
                max_refinement=48):
    """Recover the driving term and hull steps of a half-plane curve.

    Each vertex is sent to the real line by a vertical slit map (capacity
    v^2/4, driving u for a vertex at u+iv in current coordinates), which is
    then applied to all remaining vertices.  When any single vertex carries
    more than `capacity_fraction` of the curve's total capacity, the unzip
    reruns with chord-midpoint refinement capping each step at that
    fraction; curves already resolved below the cap unzip exactly one vertex
    per step.  Vertices carrying no capacity and no driving motion raise
    DegenerateSegmentError; bare zero-capacity vertices (lattice curves
    touching the axis) are skipped.
    """
    pts = np.asarray(curve.points, dtype=complex)
    scale = _scale(pts)
    if np.any(pts.imag < -1e-9 * scale):
        raise InvalidCurveError("curve dips below the real axis")
    if len(pts) < 2:
        w0 = 0.0 if len(pts) == 0 else float(pts[0].real)
        return (DrivingFunction(np.array([0.0]), np.array([w0])),
                HullState(steps=()))
    times, values, steps, _ = _unzip_core(pts, max_steps, None, max_refinement)
    if capacity_fraction is not None and np.isfinite(capacity_fraction) and steps:
        cap = capacity_fraction * times[-1]
        if max(dt for dt, _ in steps) > cap:
            times, values, steps, _ = _unzip_core(pts, max_steps, cap,
                                                  max_refinement)
    return (DrivingFunction(np.array(times), np.array(values)),
            HullState(steps=tuple(steps)))


def capacity_parametrization(curve):
    """Capacity time of every curve vertex: (vertex_times, points).

    The map t -> point, linearly interpolated between vertices, is the
    curve's half-plane-capacity parametrization used by the d* metric.
    """
    pts = np.asarray(curve.points, dtype=complex)
    if len(pts) < 2:
        return np.zeros(len(pts)), pts.copy()
    _, _, _, vertex_times = _unzip_core(pts, None, None, 48)
    vertex_times = np.maximum.accumulate(vertex_times)
    return vertex_times, pts.copy()


def halfplane_capacity(curve):
    """Half-plane capacity of the curve's hull (a_{-1} = 2 * capacity)."""
    if len(curve.points) < 2:
        return 0.0
    driving, _ = unzip_curve(curve)
    return float(driving.times[-1])


def winding_number(curve):
    """Total turning of the polyline divided by 2*pi."""
    pts = np.asarray(curve.points, dtype=complex)
    if len(pts) < 3:
        raise ValueError("winding number needs at least 3 points")
    d = np.diff(pts)
    turns = np.angle(d[1:] / d[:-1])
    return float(np.sum(turns) / (2.0 * np.pi))


def winding_angle(points, about=0j):
    """Unwrapped angle swept by points-about from first to last sample."""
    z = np.asarray(points, dtype=complex) - about
    z = z[np.abs(z) > 0]
    theta = np.unwrap(np.angle(z))
    return float(theta[-1] - theta[0])


@dataclass
class KappaEstimate:
    """Least-squares diffusivity fit with its bootstrap half-width."""

    kappa: float
    half_width: float
    quadratic_variation: float
    grid: np.ndarray = field(repr=False, default=None)
    variance: np.ndarray = field(repr=False, default=None)


def estimate_kappa(drivings, align="interpolate", grid_size=64,
                   bootstrap=200, seed=0):
    """Fit kappa as the slope of Var W(t) against t across an ensemble.

    Mixed capacity grids are linearly interpolated onto a uniform common
    grid over [0, min final time]; align="strict" instead raises on any grid
    mismatch.  The mean normalized quadratic variation is reported as a
    cross-check.  Confidence half-width is a bootstrap over replicas.
    """
    drivings = list(drivings)
    if len(drivings) < 30:
        raise ValueError("kappa estimation needs at least 30 drivings")
    grids = [d.times for d in drivings]
    same = all(len(g) == len(grids[0]) and np.allclose(g, grids[0]) for g in grids)
    if align == "strict":
        if not same:
            raise ValueError("drivings are not on a common grid")
        grid = grids[0]
        mat = np.stack([d.values for d in drivings])
    elif align == "interpolate":
        if same:
            grid = grids[0]
            mat = np.stack([d.values for d in drivings])
        else:
            t_end = min(float(g[-1]) for g in grids)
            if t_end <= 0:
                raise ValueError("drivings have no common time window")
            grid = np.linspace(0.0, t_end, grid_size)
            mat = np.stack([d.interpolate(grid) for d in drivings])
    else:
        raise ValueError(f"unknown align mode {align!r}")

    mat = mat - mat[:, :1]  # variance growth from the common start
    var = mat.var(axis=0, ddof=1)
    slope = _ls_slope(grid, var)
    qv = float(np.mean(np.sum(np.diff(mat, axis=1) ** 2, axis=1)) / grid[-1]) \
        if grid[-1] > 0 else 0.0

    rng = derive_rng_stream(seed, 0)
    m = len(drivings)
    boots = np.empty(bootstrap)
    for b in range(bootstrap):
        pick = rng.integers(0, m, size=m)
        boots[b] = _ls_slope(grid, mat[pick].var(axis=0, ddof=1))
    half = float(1.96 * boots.std(ddof=1))
    return KappaEstimate(kappa=float(slope), half_width=half,
                         quadratic_variation=qv, grid=grid, variance=var)


def _ls_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    denom = np.sum((x - xm) ** 2)
    if denom == 0:
        return 0.0
    return float(np.sum((x - xm) * (y - ym)) / denom)


def box_dimension(curve, scales):
    """Box-counting dimension from a log-log fit of occupied-box counts.

    Segments are resampled at half the box scale so counts follow the
    polyline, not just its vertices.  Scales must span at least a decade.
    """
    scales = np.asarray(scales, dtype=float)
    if len(scales) < 2 or np.any(scales <= 0):
        raise ValueError("need at least 2 positive scales")
    if np.max(scales) / np.min(scales) < 10.0 - 1e-9:
        raise ValueError("scales must span at least one decade")
    pts = np.asarray(curve.points, dtype=complex)
    counts = []
    for s in scales:
        counts.append(_occupied_boxes(pts, s))
    logn = np.log(np.asarray(counts, dtype=float))
    logi = np.log(1.0 / scales)
    return _ls_slope(logi, logn)


def _occupied_boxes(pts, s):
    if len(pts) == 1:
        return 1
    seg = np.diff(pts)
    lengths = np.abs(seg)
    nsub = np.maximum(1, np.ceil(lengths / (0.5 * s)).astype(int))
    xs = [np.array([pts[0].real]), ]
    ys = [np.array([pts[0].imag]), ]
    for k in range(len(seg)):
        frac = np.arange(1, nsub[k] + 1) / nsub[k]
        xs.append(pts[k].real + frac * seg[k].real)
        ys.append(pts[k].imag + frac * seg[k].imag)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    bx = np.floor(x / s).astype(np.int64)
    by = np.floor(y / s).astype(np.int64)
    return len(np.unique(bx + (by << 32)))
