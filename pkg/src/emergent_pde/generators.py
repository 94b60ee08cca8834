"""Ground-truth generators: the Chafee-Infante demo and the ring-of-cells signal ensemble."""

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from emergent_pde.constants import MAX_ABS_CHAFEE_INFANTE, Axis
from emergent_pde.emergent_coords import resample_axis
from emergent_pde.models.data_tensor import AxisMeta, DataTensor
from emergent_pde.models.parameters import (
    ChafeeInfanteConfig,
    MechParams,
    ParameterSample,
    SamplingConfig,
    SignalParams,
    StoppingTimeRule,
)
from emergent_pde.models.vertex import VertexState
from emergent_pde.utils.console import console
from emergent_pde.utils.errors import NumericalError
from emergent_pde.utils.helpers import derive_seed, make_rng
from emergent_pde.vertex_model import (
    cell_arclengths,
    init_homogeneous,
    sample_apical_radius,
    simulate_mechanics,
)


def output_times(t_end: float, n_out: int) -> np.ndarray:
    """Uniform output times from 0 to ``t_end`` inclusive."""
    return np.linspace(0.0, t_end, n_out)


def _substeps(interval: float, dt: float) -> tuple[int, float]:
    """Steps per output interval and the effective step that divides it evenly."""
    n = max(1, math.ceil(interval / dt - 1e-9))
    return n, interval / n


def solve_chafee_infante(cfg: ChafeeInfanteConfig) -> DataTensor:
    """Integrate u_t = u - u^3 + nu * u_xx with u = 0 at both ends.

    Method of lines with the second-order central Laplacian and forward Euler. The
    initial state is ``u0`` in the interior.

    Returns:
        A (1, n_out, n_x) tensor with time and position as axis metadata. The space
        metadata also carries ``fold``, the distance to the nearer end, which is all the
        mirror-symmetric solution can reveal about position.

    Raises:
        NumericalError: If any |u| exceeds 10.
    """
    x = np.linspace(0.0, cfg.length, cfg.n_x)
    times = output_times(cfg.t_end, cfg.n_out)
    n_sub, dt = _substeps(times[1] - times[0], cfg.step)
    r = cfg.nu * dt / cfg.dx**2

    u = np.full(cfg.n_x, cfg.u0, dtype=np.float64)
    u[[0, -1]] = 0.0
    field = np.empty((cfg.n_out, cfg.n_x))
    field[0] = u
    logger.debug(f"Chafee-Infante: {cfg.n_x} points, dt={dt:.3g}, {n_sub} steps per output")

    for k in range(1, cfg.n_out):
        for _ in range(n_sub):
            interior = u[1:-1]
            u[1:-1] = interior + dt * (interior - interior**3) + r * (u[2:] - 2 * interior + u[:-2])
        if not np.all(np.abs(u) <= MAX_ABS_CHAFEE_INFANTE):
            msg = f"Chafee-Infante solution left |u| <= {MAX_ABS_CHAFEE_INFANTE} before t={times[k]:.4g}"
            raise NumericalError(msg)
        field[k] = u

    return DataTensor(
        values=field[None],
        axis_meta={
            Axis.PARAMETER: AxisMeta(columns=["nu"], values=[cfg.nu]),
            Axis.TIME: AxisMeta(columns=["time"], values=times),
            Axis.SPACE: AxisMeta(
                columns=["x", "fold"], values=np.column_stack([x, np.minimum(x, cfg.length - x)])
            ),
        },
    )


def production_rate(t: float | np.ndarray, p: SignalParams) -> float | np.ndarray:
    """Signal production: k * t^2 up to t_s, then exponential decay at rate alpha.

    >>> round(production_rate(40.0, SignalParams()), 12)
    0.08
    """
    t = np.asarray(t, dtype=float)
    peak = p.k * p.t_s**2
    rate = np.where(t < p.t_s, p.k * t**2, peak * np.exp(-p.alpha * (t - p.t_s)))
    return float(rate) if rate.ndim == 0 else rate


def simulate_signal(
    p: SignalParams, n_out: int = 61, initial: np.ndarray | None = None
) -> np.ndarray:
    """Integrate the ring of cells with forward Euler.

    dC_i/dt = D_e (C_{i+1} - 2 C_i + C_{i-1}) + r(t) G(i) - d C_i, periodic in i.

    Args:
        p: Signal parameters.
        n_out: Number of uniform output times over [0, t_end].
        initial: Initial concentrations; zero when omitted.

    Returns:
        Concentrations of shape (n_out, n_cells).

    Raises:
        NumericalError: On NaN or negative concentrations.
    """
    times = output_times(p.t_end, n_out)
    n_sub, dt = _substeps(times[1] - times[0], p.dt)
    source = p.source_mask
    c = np.zeros(p.n_cells) if initial is None else np.array(initial, dtype=np.float64)

    field = np.empty((n_out, p.n_cells))
    field[0] = c
    for k in range(1, n_out):
        start = times[k - 1]
        for n in range(n_sub):
            rate = production_rate(start + n * dt, p)
            lap = np.roll(c, -1) + np.roll(c, 1) - 2 * c
            c = c + dt * (p.D_e * lap + rate * source - p.d * c)
        if np.isnan(c).any() or (c < 0).any():
            msg = f"signal concentration became NaN or negative before t={times[k]:.4g}"
            raise NumericalError(msg)
        field[k] = c
    return field


def sample_parameters(
    n: int,
    seed: int,
    sampling: SamplingConfig | None = None,
    rule: StoppingTimeRule | None = None,
) -> list[ParameterSample]:
    """Draw (D_e, d) from truncated normals and derive t_s from them.

    Draws farther than ``truncation`` standard deviations from the mean are redrawn.

    Raises:
        ValueError: If ``n < 1``.
    """
    if n < 1:
        msg = f"need at least one sample, got {n}"
        raise ValueError(msg)
    sampling = sampling or SamplingConfig()
    rule = rule or StoppingTimeRule()
    rng = make_rng(seed)

    def truncated(mean: float, sd: float) -> np.ndarray:
        draws = rng.normal(mean, sd, size=n)
        bad = np.abs(draws - mean) > sampling.truncation * sd
        while bad.any():
            draws[bad] = rng.normal(mean, sd, size=int(bad.sum()))
            bad = np.abs(draws - mean) > sampling.truncation * sd
        return draws

    D_e = truncated(sampling.D_e_mean, sampling.D_e_sd)
    d = truncated(sampling.d_mean, sampling.d_sd)
    return [
        ParameterSample(D_e=float(a), d=float(b), t_s=rule(float(a), float(b)))
        for a, b in zip(D_e, d, strict=True)
    ]


def sample_single_run_d(seed: int, mean: float = 0.08, sd: float = 0.008) -> float:
    """Degradation rate for a single simulation, clipped to three standard deviations."""
    return float(np.clip(make_rng(seed).normal(mean, sd), mean - 3 * sd, mean + 3 * sd))


class MechanicsCoupling(BaseModel):
    """Vertex-model settings used when the ensemble moves its sampling backbone."""

    model_config = ConfigDict(frozen=True)

    params: MechParams = Field(default_factory=MechParams)
    l_l: float = Field(default=3.0, gt=0)
    n_steps: int = Field(default=1000, ge=1)
    randomize_radius: bool = True
    R_a: float = Field(default=8.5, gt=0)


class EnsembleLayout(BaseModel):
    """Which part of the ring is observed and how it is sampled."""

    model_config = ConfigDict(frozen=True)

    observed_cells: tuple[int, int] | None = None
    n_backbone_points: int | None = Field(default=None, ge=4)
    R_a: float = Field(default=8.5, gt=0)
    l_l: float = Field(default=3.0, gt=0)


def relaxed_ring(
    index: int, seed: int, n_cells: int, coupling: MechanicsCoupling
) -> VertexState:
    """Relax one ensemble member's ring under apical patterning."""
    R_a = coupling.R_a
    if coupling.randomize_radius:
        R_a = sample_apical_radius(make_rng(derive_seed(seed, f"radius:{index}")))
    state = init_homogeneous(n_cells, coupling.l_l, R_a, coupling.params)
    return simulate_mechanics(state, coupling.params, coupling.n_steps)[-1]


def static_cell_arclengths(n_cells: int, R_a: float, l_l: float) -> np.ndarray:
    """Cell-center arclength along the midline polygon of radius R_a - l_l/2."""
    chord = 2 * (R_a - l_l / 2) * math.sin(math.pi / n_cells)
    return (np.arange(n_cells) + 0.5) * chord


def with_sample(base: SignalParams, sample: ParameterSample) -> SignalParams:
    """Signal parameters of one ensemble member."""
    return SignalParams.model_validate(
        base.model_dump() | {"D_e": sample.D_e, "d": sample.d, "t_s": sample.t_s}
    )


def _simulate_sample(
    job: tuple[int, ParameterSample, SignalParams, int, int, MechanicsCoupling | None],
) -> tuple[np.ndarray, np.ndarray | None]:
    index, sample, base, n_out, seed, coupling = job
    params = with_sample(base, sample)
    try:
        field = simulate_signal(params, n_out=n_out)
    except NumericalError as e:
        msg = f"sample {index} (D_e={sample.D_e:.4g}, d={sample.d:.4g}): {e}"
        raise NumericalError(msg) from e
    arclength = None
    if coupling is not None:
        arclength = cell_arclengths(relaxed_ring(index, seed, base.n_cells, coupling))
    return field, arclength


def generate_ensemble(
    samples: list[ParameterSample],
    base: SignalParams,
    n_out_times: int = 61,
    *,
    layout: EnsembleLayout | None = None,
    coupling: MechanicsCoupling | None = None,
    seed: int = 0,
    workers: int = 1,
) -> DataTensor:
    """Simulate every parameter sample and stack the fields.

    Args:
        samples: Parameter samples, one slab each.
        base: Signal parameters shared by all samples.
        n_out_times: Number of output times.
        layout: Observed cell window and backbone resampling.
        coupling: Vertex-model coupling; each sample then gets its own backbone.
        seed: Seed for per-sample geometry draws.
        workers: Process count; 1 runs in-process.

    Returns:
        A (N_p, N_t, N_s) tensor with parameters, times and arclengths as axis metadata.

    Raises:
        ValueError: If ``samples`` is empty.
    """
    if not samples:
        msg = "need at least one parameter sample"
        raise ValueError(msg)
    layout = layout or EnsembleLayout()
    jobs = [(i, s, base, n_out_times, seed, coupling) for i, s in enumerate(samples)]

    results: list[tuple[np.ndarray, np.ndarray | None]] = []
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task("Simulating ensemble", total=len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(_simulate_sample, jobs):
                    results.append(result)
                    progress.advance(task)
        else:
            for job in jobs:
                results.append(_simulate_sample(job))
                progress.advance(task)

    fields = np.stack([field for field, _ in results])
    static = static_cell_arclengths(base.n_cells, layout.R_a, layout.l_l)
    arclengths = np.stack([static if arc is None else arc for _, arc in results])

    cells = np.arange(base.n_cells)
    if layout.observed_cells is not None:
        lo, hi = layout.observed_cells
        if not 1 <= lo < hi <= base.n_cells:
            msg = f"observed_cells {layout.observed_cells} must satisfy 1 <= lo < hi <= {base.n_cells}"
            raise ValueError(msg)
        cells = cells[lo - 1 : hi]
    fields = fields[:, :, cells]
    arclengths = arclengths[:, cells]
    periodic = cells.size == base.n_cells

    space_meta: AxisMeta
    if layout.n_backbone_points is None:
        space_meta = AxisMeta(
            columns=["arclength", "cell"],
            values=np.column_stack([arclengths.mean(axis=0), cells + 1]),
        )
    else:
        fields, arclengths = _resample_backbone(fields, arclengths, layout.n_backbone_points, periodic)
        space_meta = AxisMeta(columns=["arclength"], values=arclengths)

    logger.debug(f"Ensemble tensor {fields.shape}")
    return DataTensor(
        values=fields,
        axis_meta={
            Axis.PARAMETER: AxisMeta(
                columns=["D_e", "d", "t_s"], values=[s.as_row() for s in samples]
            ),
            Axis.TIME: AxisMeta(columns=["time"], values=output_times(base.t_end, n_out_times)),
            Axis.SPACE: space_meta,
        },
    )


def _resample_backbone(
    fields: np.ndarray, arclengths: np.ndarray, n_points: int, periodic: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Resample every slab onto ``n_points`` equally spaced backbone positions.

    Each slab is resampled against its own arclengths, expressed as a fraction of the
    observed span so that ensemble members with different geometry share one grid.
    """
    out = np.empty((*fields.shape[:2], n_points))
    positions = np.empty((fields.shape[0], n_points))
    for i, (slab, arc) in enumerate(zip(fields, arclengths, strict=True)):
        if periodic:
            origin, span = 0.0, arc[-1] + arc[0]
        else:
            origin, span = arc[0], arc[-1] - arc[0]
        fraction = (arc - origin) / span
        grid, out[i] = resample_axis(slab, fraction, n_points, period=1.0 if periodic else None)
        positions[i] = origin + grid * span
    return out, positions.mean(axis=0)
