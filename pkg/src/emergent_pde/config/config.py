"""Pipeline configuration: global settings and one block per stage."""

from pathlib import Path
from typing import Annotated, ClassVar, Literal
from typing_extensions import Self

from confz import BaseConfig, ConfigSources, EnvSource, FileSource
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from emergent_pde.constants import (
    CONFIG_PATH,
    PACKAGE_NAME,
    STATE_DIR,
    Axis,
    GeneratorKind,
    PlotKind,
    Scheme,
)
from emergent_pde.emergent_coords import CorridorConfig
from emergent_pde.generators import EnsembleLayout, MechanicsCoupling
from emergent_pde.learner.training import RHS_HIDDEN, SOURCE_HIDDEN, SURROGATE_HIDDEN, SVD_ENERGY
from emergent_pde.models import (
    ChafeeInfanteConfig,
    DiffusionConfig,
    QuestConfig,
    SamplingConfig,
    SignalParams,
    StoppingTimeRule,
    TrainConfig,
)
from emergent_pde.utils.helpers import derive_seed

PATH_CONFIG_DEFAULT = Path(__file__).parent.parent / "default_config.toml"


def pass_opt_without_value(value: str) -> bool:
    """Treat any non-empty value as True so a bare ``--log-to-file`` flag reads as a boolean.

    Returns:
        bool: True if value is not empty, otherwise False.
    """
    return bool(value)


OPT_BOOLEAN = Annotated[
    bool,
    BeforeValidator(pass_opt_without_value),
]


class MechanicsConfig(MechanicsCoupling):
    """Vertex-model coupling of the ensemble; off unless ``enabled``."""

    enabled: bool = False


class GenerateConfig(BaseModel):
    """Ground-truth data: the Chafee-Infante demo or the signal ensemble."""

    model_config = ConfigDict(frozen=True)

    kind: GeneratorKind = GeneratorKind.CHAFEE_INFANTE
    chafee_infante: ChafeeInfanteConfig = Field(default_factory=ChafeeInfanteConfig)
    signal: SignalParams = Field(default_factory=SignalParams)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    stopping: StoppingTimeRule = Field(default_factory=StoppingTimeRule)
    n_samples: int = Field(default=200, ge=1)
    n_out_times: int = Field(default=61, ge=2)
    layout: EnsembleLayout = Field(default_factory=EnsembleLayout)
    mechanics: MechanicsConfig = Field(default_factory=MechanicsConfig)


class ScrambleConfig(BaseModel):
    """Which axes are shuffled, what fraction of channels is dropped and of entries masked."""

    model_config = ConfigDict(frozen=True)

    axes: list[Axis] = Field(default_factory=lambda: list(Axis))
    drop_fraction: dict[Axis, float] = Field(default_factory=dict)
    mask_fraction: float = Field(default=0.0, ge=0, lt=1)
    identity: bool = False

    @field_validator("drop_fraction")
    @classmethod
    def _check_fractions(cls, value: dict[Axis, float]) -> dict[Axis, float]:
        for axis, fraction in value.items():
            if not 0 <= fraction < 1:
                msg = f"drop fraction for '{axis.value}' must lie in [0, 1)"
                raise ValueError(msg)
        return value


class OrganizeConfig(BaseModel):
    """Questionnaire loop and the diffusion map applied to its final distances."""

    model_config = ConfigDict(frozen=True)

    quest: QuestConfig = Field(default_factory=QuestConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)


class CoordsConfig(BaseModel):
    """Emergent coordinates and the chart of one parameter slab."""

    model_config = ConfigDict(frozen=True)

    n_coords: int | None = Field(default=None, ge=1)
    k: int | None = Field(default=None, ge=2)
    slab: int = Field(default=0, ge=0)
    n_psi: int = Field(default=128, ge=7)
    n_phi: int = Field(default=1500, ge=3)
    time_kind: Literal["emergent", "physical"] = "emergent"
    time_anchor: Literal["min-mass", "max-mass"] = "min-mass"
    corridors: CorridorConfig = Field(default_factory=CorridorConfig)


class LearnConfig(BaseModel):
    """Networks fitted to the chart, and the optional voxel surrogate."""

    model_config = ConfigDict(frozen=True)

    rhs: TrainConfig = Field(default_factory=TrainConfig)
    rhs_hidden: list[int] = Field(default_factory=lambda: list(RHS_HIDDEN))
    source: bool = True
    source_train: TrainConfig = Field(default_factory=TrainConfig)
    source_hidden: list[int] = Field(default_factory=lambda: list(SOURCE_HIDDEN))
    surrogate: bool = False
    surrogate_train: TrainConfig = Field(default_factory=TrainConfig)
    surrogate_hidden: list[int] = Field(default_factory=lambda: list(SURROGATE_HIDDEN))
    max_samples: int | None = Field(default=None, ge=1)

    @field_validator("rhs_hidden", "source_hidden", "surrogate_hidden")
    @classmethod
    def _positive_widths(cls, value: list[int]) -> list[int]:
        if not value or any(width < 1 for width in value):
            msg = "hidden layer widths must be a non-empty list of positive integers"
            raise ValueError(msg)
        return value


class IntegrateConfig(BaseModel):
    """Time stepping of the learned model."""

    model_config = ConfigDict(frozen=True)

    scheme: Scheme = Scheme.RK4
    substeps: int = Field(default=4, ge=1)
    svd_energy: float | None = Field(default=SVD_ENERGY, gt=0, le=1)


class EvalConfig(BaseModel):
    """Ground-truth columns compared against the recovered structure."""

    model_config = ConfigDict(frozen=True)

    time_column: str | None = None
    space_column: str | None = None
    param_columns: list[str] = Field(default_factory=lambda: ["D_e", "d"])
    r2_scale: float = Field(default=3.0, gt=0)


class PlotConfig(BaseModel):
    """Figures rendered by ``run-all``."""

    model_config = ConfigDict(frozen=True)

    kinds: list[PlotKind] = Field(
        default_factory=lambda: [PlotKind.SPACETIME, PlotKind.EMBEDDING, PlotKind.LOSS, PlotKind.REPORT]
    )
    color_by: str | None = None
    csv: bool = False


class EpdeConfig(BaseConfig):  # type: ignore [misc]
    """Configuration class for emergent-pde."""

    model_config = ConfigDict(populate_by_name=True)

    seed: int = Field(default=42, ge=0)
    out_dir: Path = Path("epde-out")
    threads: int = Field(default=1, ge=1)
    log_to_file: OPT_BOOLEAN = False
    log_file: Path = STATE_DIR / f"{PACKAGE_NAME}.log"
    generate: GenerateConfig = Field(default_factory=GenerateConfig)
    scramble: ScrambleConfig = Field(default_factory=ScrambleConfig)
    organize: OrganizeConfig = Field(default_factory=OrganizeConfig)
    coords: CoordsConfig = Field(default_factory=CoordsConfig)
    learn: LearnConfig = Field(default_factory=LearnConfig)
    integrate: IntegrateConfig = Field(default_factory=IntegrateConfig)
    evaluate: EvalConfig = Field(default_factory=EvalConfig, alias="eval")
    plot: PlotConfig = Field(default_factory=PlotConfig)

    CONFIG_SOURCES: ClassVar[ConfigSources | None] = [
        FileSource(file=CONFIG_PATH),
        EnvSource(allow=["seed"], prefix="EPDE_"),
    ]

    @model_validator(mode="after")
    def _check_slab(self) -> Self:
        if self.generate.kind == GeneratorKind.CHAFEE_INFANTE and self.coords.slab != 0:
            msg = "the Chafee-Infante demo has a single slab; coords.slab must be 0"
            raise ValueError(msg)
        if self.generate.kind == GeneratorKind.SIGNAL_ENSEMBLE and self.coords.slab >= self.generate.n_samples:
            msg = f"coords.slab={self.coords.slab} is not below generate.n_samples={self.generate.n_samples}"
            raise ValueError(msg)
        return self

    def stage_seed(self, stage: str) -> int:
        """Seed of one stage, derived from the global seed."""
        return derive_seed(self.seed, stage)
