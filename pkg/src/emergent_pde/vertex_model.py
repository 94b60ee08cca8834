"""Ring-of-cells vertex model: energy, analytic forces, overdamped stepping and the backbone."""

import math
from pathlib import Path

import numpy as np
from loguru import logger

from emergent_pde.models.parameters import MechParams
from emergent_pde.models.vertex import Backbone, RestGeometry, VertexState
from emergent_pde.utils.errors import NumericalError

MAX_DT_HALVINGS = 10
PATTERN_HALF_WIDTH = math.pi / 4


def nominal_edge_lengths(N_c: int, R_a: float, l_l: float) -> tuple[float, float]:
    """Apical and basal edge lengths 2*pi*R/N_c of the homogeneous ring.

    >>> [round(v, 4) for v in nominal_edge_lengths(80, 8.5, 3.0)]
    [0.6676, 0.432]
    """
    return 2 * math.pi * R_a / N_c, 2 * math.pi * (R_a - l_l) / N_c


def sample_apical_radius(
    rng: np.random.Generator, mean: float = 8.5, sd: float = 0.25, lo: float = 8.25, hi: float = 8.75
) -> float:
    """Draw one apical radius for an ensemble member, clipped to [lo, hi]."""
    return float(np.clip(rng.normal(mean, sd), lo, hi))


def polygon_areas(points: np.ndarray) -> np.ndarray:
    """Shoelace areas of polygons given as an (..., k, 2) array; positive when counterclockwise."""
    x, y = points[..., 0], points[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def _area_gradient(points: np.ndarray) -> np.ndarray:
    """d(area)/d(vertex) for every polygon vertex, same shape as ``points``."""
    nxt = np.roll(points, -1, axis=-2)
    prv = np.roll(points, 1, axis=-2)
    grad = np.empty_like(points)
    grad[..., 0] = 0.5 * (nxt[..., 1] - prv[..., 1])
    grad[..., 1] = 0.5 * (prv[..., 0] - nxt[..., 0])
    return grad


def _edges(n_cells: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    k = np.arange(n_cells)
    nxt = (k + 1) % n_cells
    return {
        "apical": (k, nxt),
        "basal": (n_cells + k, n_cells + nxt),
        "lateral": (k, n_cells + k),
    }


def edge_lengths(state: VertexState) -> dict[str, np.ndarray]:
    """Lengths of the apical, basal and lateral edges (edge ``c`` of cell ``c``)."""
    pos = state.positions
    return {
        kind: np.linalg.norm(pos[j] - pos[i], axis=1)
        for kind, (i, j) in _edges(state.n_cells).items()
    }


def cell_areas(state: VertexState) -> np.ndarray:
    """Area of every cell."""
    return polygon_areas(state.positions[state.cells])


def yolk_area(state: VertexState) -> float:
    """Area enclosed by the basal vertices."""
    return float(polygon_areas(state.basal))


def apical_tension(theta: float | np.ndarray, params: MechParams) -> float | np.ndarray:
    """Apical line tension, raised in a Gaussian bump around theta = 0.

    >>> round(float(apical_tension(0.0, MechParams())), 4)
    3.1702
    """
    theta = np.asarray(theta, dtype=float)
    bump = 1.0 + params.P * np.exp(-(theta**2) / params.G_width**2)
    sigma = np.where(np.abs(theta) < PATTERN_HALF_WIDTH, params.sigma_a0 * bump, params.sigma_a0)
    return float(sigma) if sigma.ndim == 0 else sigma


def edge_tensions(state: VertexState, params: MechParams) -> tuple[np.ndarray, np.ndarray]:
    """Apical and basal tensions at the current configuration.

    Apical tension is evaluated at the angle of each apical edge midpoint. With patterning
    off both tensions take their homogeneous values.
    """
    n = state.n_cells
    if not params.patterned:
        return np.full(n, params.sigma_a0), np.full(n, params.sigma_b0)
    i, j = _edges(n)["apical"]
    mid = 0.5 * (state.positions[i] + state.positions[j])
    theta = np.arctan2(mid[:, 1], mid[:, 0])
    return np.asarray(apical_tension(theta, params)), np.full(n, params.f_basal * params.sigma_b0)


def _targets(state: VertexState, params: MechParams) -> tuple[float, float, float]:
    A_c0 = params.A_c0 if params.A_c0 is not None else state.rest.A_c0
    A_Y0 = params.A_Y0 if params.A_Y0 is not None else state.rest.A_Y0
    R_c = params.R_c if params.R_c is not None else state.rest.R_c
    return A_c0, A_Y0, R_c


def init_homogeneous(N_c: int, l_l: float, R_a: float, params: MechParams) -> VertexState:
    """Build the ring of identical trapezoids.

    Apical vertices sit on radius ``R_a`` and basal ones on ``R_b = R_a - l_l``, cell 0
    spanning angles 0 to 2*pi/N_c. Target areas left unset in ``params`` are chosen so the
    ring is a stationary point of the un-patterned energy; the membrane defaults to
    ``membrane_factor * R_a``.

    Raises:
        ValueError: If ``N_c < 3``, ``R_a <= l_l`` or the derived yolk target is not positive.
    """
    if N_c < 3:  # noqa: PLR2004
        msg = f"N_c must be >= 3, got {N_c}"
        raise ValueError(msg)
    if R_a <= l_l:
        msg = f"R_a={R_a} must exceed the lateral length l_l={l_l}"
        raise ValueError(msg)

    R_b = R_a - l_l
    angles = 2 * np.pi * np.arange(N_c) / N_c
    ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    positions = np.vstack([R_a * ring, R_b * ring])
    k = np.arange(N_c)
    cells = np.stack([k, (k + 1) % N_c, N_c + (k + 1) % N_c, N_c + k], axis=1)

    delta = 2 * np.pi / N_c
    s = math.sin(math.pi / N_c)
    R_c = params.R_c if params.R_c is not None else params.membrane_factor * R_a
    if R_c <= R_a:
        msg = f"membrane radius {R_c} must exceed the apical radius {R_a}"
        raise ValueError(msg)

    A_c = 0.5 * (R_a**2 - R_b**2) * math.sin(delta)
    A_Y = 0.5 * N_c * R_b**2 * math.sin(delta)
    membrane = params.n_rep * params.eps_mem * (R_c - R_a) ** (-params.n_rep - 1)

    A_c0 = params.A_c0
    if A_c0 is None:
        A_c0 = A_c + (2 * params.sigma_a0 * s + params.sigma_l + membrane) / (
            2 * params.B * R_a * math.sin(delta)
        )
    A_Y0 = params.A_Y0
    if A_Y0 is None:
        basal = params.sigma_l - 2 * params.sigma_b0 * s + 2 * params.B * (A_c - A_c0) * R_b * math.sin(delta)
        A_Y0 = A_Y - basal / (2 * params.B_Y * R_b * math.sin(delta)) if params.B_Y > 0 else A_Y
    if A_Y0 <= 0:
        msg = f"derived yolk target area {A_Y0:.4g} is not positive for these tensions"
        raise ValueError(msg)

    rest = RestGeometry(A_c0=A_c0, A_Y0=A_Y0, R_c=R_c, R_a=R_a, l_l=l_l)
    logger.trace(f"Homogeneous ring: A_c0={A_c0:.6g} A_Y0={A_Y0:.6g} R_c={R_c:.6g}")
    return VertexState(positions=positions, cells=cells, rest=rest)


def energy_terms(
    state: VertexState,
    params: MechParams,
    tensions: tuple[np.ndarray, np.ndarray] | None = None,
) -> dict[str, float]:
    """Line-tension, cell-area, yolk and membrane parts of the energy.

    The membrane part is ``inf`` once an apical vertex reaches the membrane.
    """
    sigma_a, sigma_b = tensions if tensions is not None else edge_tensions(state, params)
    A_c0, A_Y0, R_c = _targets(state, params)
    lengths = edge_lengths(state)
    line = (
        float(np.sum(sigma_a * lengths["apical"]))
        + float(np.sum(sigma_b * lengths["basal"]))
        + params.sigma_l * float(np.sum(lengths["lateral"]))
    )
    area = params.B * float(np.sum((cell_areas(state) - A_c0) ** 2))
    yolk = params.B_Y * (yolk_area(state) - A_Y0) ** 2

    gap = R_c - np.linalg.norm(state.apical, axis=1)
    membrane = math.inf if np.any(gap <= 0) else params.eps_mem * float(np.sum(gap ** (-params.n_rep)))
    return {"line": line, "area": area, "yolk": yolk, "membrane": membrane}


def energy(
    state: VertexState,
    params: MechParams,
    tensions: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Total energy; ``inf`` signals a vertex at or beyond the membrane."""
    return sum(energy_terms(state, params, tensions).values())


def gradient(
    state: VertexState,
    params: MechParams,
    tensions: tuple[np.ndarray, np.ndarray] | None = None,
    *,
    membrane: bool = True,
) -> np.ndarray:
    """Analytic gradient of the energy with tensions held fixed, shape (2 * N_c, 2).

    Raises:
        NumericalError: If an apical vertex is at or beyond the membrane.
    """
    sigma_a, sigma_b = tensions if tensions is not None else edge_tensions(state, params)
    A_c0, A_Y0, R_c = _targets(state, params)
    pos = state.positions
    grad = np.zeros_like(pos)

    weights = {"apical": sigma_a, "basal": sigma_b, "lateral": params.sigma_l}
    for kind, (i, j) in _edges(state.n_cells).items():
        d = pos[i] - pos[j]
        unit = d / np.linalg.norm(d, axis=1)[:, None]
        force = np.broadcast_to(np.asarray(weights[kind], dtype=float), i.shape)[:, None] * unit
        np.add.at(grad, i, force)
        np.add.at(grad, j, -force)

    cell_points = pos[state.cells]
    pressure = 2 * params.B * (polygon_areas(cell_points) - A_c0)
    np.add.at(grad, state.cells, pressure[:, None, None] * _area_gradient(cell_points))

    basal = state.basal
    grad[state.n_cells :] += (
        2 * params.B_Y * (float(polygon_areas(basal)) - A_Y0) * _area_gradient(basal)
    )

    if membrane and params.eps_mem > 0:
        radius = np.linalg.norm(state.apical, axis=1)
        gap = R_c - radius
        if np.any(gap <= 0):
            msg = "apical vertex at or beyond the membrane"
            raise NumericalError(msg)
        coef = params.eps_mem * params.n_rep * gap ** (-params.n_rep - 1) / radius
        grad[: state.n_cells] += coef[:, None] * state.apical
    return grad


def finite_difference_gradient(
    state: VertexState,
    params: MechParams,
    tensions: tuple[np.ndarray, np.ndarray] | None = None,
    h: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient of :func:`energy` with the given (or current) tensions frozen."""
    frozen = tensions if tensions is not None else edge_tensions(state, params)
    base = state.positions
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (
            energy(state.with_positions(plus), params, frozen)
            - energy(state.with_positions(minus), params, frozen)
        ) / (2 * h)
    return grad


def gradient_error(state: VertexState, params: MechParams, h: float = 1e-6) -> float:
    """Max deviation between analytic and central-difference gradients, relative to the largest component."""
    frozen = edge_tensions(state, params)
    analytic = gradient(state, params, frozen)
    numeric = finite_difference_gradient(state, params, frozen, h=h)
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


def step(state: VertexState, params: MechParams, dt: float | None = None) -> VertexState:
    """One overdamped forward-Euler step, x <- x - (dt / eta) * grad E.

    The step is retried with half the time step while it would push an apical vertex
    through the membrane.

    Raises:
        NumericalError: If the energy is not finite, or after 10 halvings.
    """
    tensions = edge_tensions(state, params)
    if not math.isfinite(energy(state, params, tensions)):
        msg = "vertex state has infinite energy"
        raise NumericalError(msg)
    grad = gradient(state, params, tensions)
    _, _, R_c = _targets(state, params)

    dt = params.dt if dt is None else dt
    for attempt in range(MAX_DT_HALVINGS + 1):
        moved = state.positions - (dt / params.eta) * grad
        if np.all(np.isfinite(moved)) and np.all(np.linalg.norm(moved[: state.n_cells], axis=1) < R_c):
            if attempt:
                logger.trace(f"vertex step accepted after {attempt} halvings (dt={dt:g})")
            return state.with_positions(moved)
        dt /= 2
    msg = f"membrane penetration persists after {MAX_DT_HALVINGS} time-step halvings"
    raise NumericalError(msg)


def simulate_mechanics(
    state: VertexState, params: MechParams, n_steps: int, record_every: int = 0
) -> list[VertexState]:
    """Run ``n_steps`` overdamped steps.

    Returns:
        The recorded states: the initial one, every ``record_every``-th step and the last.
    """
    trajectory = [state]
    for n in range(1, n_steps + 1):
        state = step(state, params)
        if (record_every and n % record_every == 0) or n == n_steps:
            trajectory.append(state)
    logger.debug(f"Vertex model: {n_steps} steps, final energy {energy(state, params):.6g}")
    return trajectory


def backbone_curve(state: VertexState, sector: tuple[float, float] | None = None) -> Backbone:
    """Lateral-edge midpoints ordered by angle, with cumulative arclength.

    Args:
        state: Ring state.
        sector: Angle range ``(lo, hi)`` in radians within (-pi, pi]. ``None`` takes the
            full ring, which is then closed.

    Raises:
        ValueError: If no midpoint falls in the sector.
    """
    n = state.n_cells
    mid = 0.5 * (state.apical + state.basal)
    theta = np.arctan2(mid[:, 1], mid[:, 0])
    if sector is None:
        keep = np.arange(n)
        key = np.mod(theta, 2 * np.pi)
        closed = True
    else:
        lo, hi = sector
        keep = np.flatnonzero((theta >= lo) & (theta <= hi))
        key = theta
        closed = False
    if keep.size == 0:
        msg = f"no lateral edge lies in sector {sector}"
        raise ValueError(msg)

    keep = keep[np.argsort(key[keep], kind="stable")]
    points = mid[keep]
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg)])
    return Backbone(points=points, arclength=arclength, edges=keep.tolist(), closed=closed)


def cell_arclengths(state: VertexState) -> np.ndarray:
    """Arclength of every cell center along the closed backbone, from the first midpoint in angle order."""
    backbone = backbone_curve(state)
    position = np.empty(state.n_cells)
    position[np.asarray(backbone.edges)] = backbone.arclength
    following = np.roll(position, -1)
    following = np.where(following <= position, following + backbone.length, following)
    return np.mod(0.5 * (position + following), backbone.length)


def export_snapshot(state: VertexState, concentrations: np.ndarray, path: Path) -> Path:
    """Write vertex positions and per-cell concentration as ``cell,vertex,kind,x,y,concentration``.

    Returns:
        Path: The file written.
    """
    kinds = ("apical", "apical", "basal", "basal")
    lines = ["cell,vertex,kind,x,y,concentration"]
    for c, vertices in enumerate(state.cells):
        for kind, v in zip(kinds, vertices, strict=True):
            x, y = state.positions[v]
            lines.append(f"{c},{int(v)},{kind},{x:.17g},{y:.17g},{float(concentrations[c]):.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_snapshot(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a snapshot CSV back into cell polygons (N_c, 4, 2) and per-cell concentration."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 3, 4, 5), ndmin=2)
    n_cells = int(rows[:, 0].max()) + 1
    polygons = rows[:, 1:3].reshape(n_cells, 4, 2)
    return polygons, rows[::4, 3]
