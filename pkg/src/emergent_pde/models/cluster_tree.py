"""Hierarchical partition of one axis' channels."""

from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from rich.table import Table


class ClusterTree(BaseModel):
    """Nested partitions of ``n_channels`` channels, from singletons up to one root.

    ``levels[0]`` is the singleton partition and every later level is a union of clusters
    of the level below. ``thresholds[l]`` is the join threshold that produced level ``l``
    (0 for the singleton level). Clusters are kept sorted, ordered by their smallest member.
    """

    model_config = ConfigDict(frozen=True)

    n_channels: int = Field(ge=1)
    levels: list[list[list[int]]]
    thresholds: list[float]
    forced_root: bool = False

    @model_validator(mode="after")
    def _check_nesting(self) -> Self:
        if len(self.levels) != len(self.thresholds):
            msg = "one threshold per level is required"
            raise ValueError(msg)
        if self.levels[0] != [[i] for i in range(self.n_channels)]:
            msg = "level 0 must be the singleton partition"
            raise ValueError(msg)

        for level, clusters in enumerate(self.levels):
            members = sorted(i for cluster in clusters for i in cluster)
            if members != list(range(self.n_channels)):
                msg = f"level {level} does not partition the {self.n_channels} channels"
                raise ValueError(msg)
            if level == 0:
                continue
            parent = self.labels(level)
            for child in self.levels[level - 1]:
                if len({parent[i] for i in child}) != 1:
                    msg = f"level {level} splits a cluster of level {level - 1}"
                    raise ValueError(msg)

        if np.any(np.diff(self.thresholds) <= 0):
            msg = "thresholds must increase strictly with level"
            raise ValueError(msg)
        return self

    @classmethod
    def singletons(cls, n_channels: int) -> "ClusterTree":
        """Tree truncated to the singleton level."""
        return cls(n_channels=n_channels, levels=[[[i] for i in range(n_channels)]], thresholds=[0.0])

    @property
    def n_levels(self) -> int:
        """Number of recorded levels, singleton level included."""
        return len(self.levels)

    @property
    def is_complete(self) -> bool:
        """Whether the top level is a single root cluster."""
        return len(self.levels[-1]) == 1

    def clusters(self, level: int) -> list[list[int]]:
        """Clusters of one level (negative levels count from the root)."""
        return self.levels[level]

    def labels(self, level: int) -> np.ndarray:
        """Cluster number of every channel at ``level``."""
        labels = np.empty(self.n_channels, dtype=int)
        for k, cluster in enumerate(self.levels[level]):
            labels[cluster] = k
        return labels

    def indicators(self, level: int) -> np.ndarray:
        """0/1 matrix with one row per cluster of ``level`` and one column per channel."""
        clusters = self.levels[level]
        matrix = np.zeros((len(clusters), self.n_channels))
        for k, cluster in enumerate(clusters):
            matrix[k, cluster] = 1.0
        return matrix

    def level_with(self, n_clusters: int) -> int | None:
        """First level holding exactly ``n_clusters`` clusters, if any."""
        for level, clusters in enumerate(self.levels):
            if len(clusters) == n_clusters:
                return level
        return None

    def as_table(self, title: str = "Cluster tree") -> Table:
        """Per-level cluster counts and thresholds."""
        table = Table(title=title, title_justify="left")
        table.add_column("level", justify="right")
        table.add_column("clusters", justify="right")
        table.add_column("threshold", justify="right")
        for level, (clusters, threshold) in enumerate(
            zip(self.levels, self.thresholds, strict=True)
        ):
            table.add_row(str(level), str(len(clusters)), f"{threshold:.4g}")
        if self.forced_root:
            table.caption = "root forced at the level cap"
        return table
