"""
Static grid description.

A grid is a set of substations joined by lines, with generators and loads
attached to substations. Every line endpoint, generator and load is an
*element* occupying one slot of its substation; the slot order is derived
deterministically (line endpoints by line id, then generators, then loads)
and is the order bus configurations are expressed in.
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.exceptions import GridSpecError
from src.monitoring.logger import get_logger

logger = get_logger(__name__)

GRID_SCHEMA_VERSION = 1
BUNDLED_CASE5 = Path(__file__).parent / "data" / "case5.json"


class ElementKind(str, Enum):
    LINE_ORIGIN = "line_or"
    LINE_EXTREMITY = "line_ex"
    GENERATOR = "gen"
    LOAD = "load"

    @property
    def is_line(self) -> bool:
        return self in (ElementKind.LINE_ORIGIN, ElementKind.LINE_EXTREMITY)


class SubstationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    name: Optional[str] = None


class LineSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    from_substation: int = Field(ge=0)
    to_substation: int = Field(ge=0)
    reactance: float = Field(gt=0, description="Series reactance, p.u.")
    limit_mw: float = Field(gt=0, description="Thermal limit, MW")


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    substation: int = Field(ge=0)
    p_max_mw: float = Field(gt=0)


class LoadSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    substation: int = Field(ge=0)


@dataclass(frozen=True)
class ElementSlot:
    """One element of a substation, addressed by its global element index."""

    index: int
    kind: ElementKind
    ref: int
    substation: int
    position: int


@dataclass(frozen=True)
class GridLayout:
    """Index arrays derived from a GridSpec."""

    slots: Tuple[ElementSlot, ...]
    substation_elements: Tuple[Tuple[int, ...], ...]
    line_origin_element: np.ndarray
    line_extremity_element: np.ndarray
    generator_element: np.ndarray
    load_element: np.ndarray
    element_substation: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.slots)


class GridSpec(BaseModel):
    """Validated static grid. Ids are contiguous and equal to list position."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = GRID_SCHEMA_VERSION
    name: str = "grid"
    substations: List[SubstationSpec]
    lines: List[LineSpec]
    generators: List[GeneratorSpec]
    loads: List[LoadSpec]

    _layout: Optional[GridLayout] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def validate_references(self) -> "GridSpec":
        for category, items in (
            ("substation", self.substations),
            ("line", self.lines),
            ("generator", self.generators),
            ("load", self.loads),
        ):
            ids = [item.id for item in items]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate {category} ids: {ids}")
            if ids != list(range(len(ids))):
                raise ValueError(f"{category} ids must be 0..{len(ids) - 1} in listed order, got {ids}")
        if not self.substations:
            raise ValueError("grid has no substations")

        n_subs = len(self.substations)
        for line in self.lines:
            for end in (line.from_substation, line.to_substation):
                if end >= n_subs:
                    raise ValueError(f"line {line.id} references unknown substation {end}")
            if line.from_substation == line.to_substation:
                raise ValueError(f"line {line.id} connects substation {line.from_substation} to itself")
        for element in [*self.generators, *self.loads]:
            if element.substation >= n_subs:
                raise ValueError(f"{type(element).__name__} {element.id} references unknown substation {element.substation}")

        if n_subs > 1:
            rows = [line.from_substation for line in self.lines]
            cols = [line.to_substation for line in self.lines]
            adjacency = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_subs, n_subs))
            n_components, _ = connected_components(adjacency, directed=False)
            if n_components != 1:
                raise ValueError(f"grid with all lines in service has {n_components} components, expected 1")
        return self

    def _build_layout(self) -> GridLayout:
        per_sub: Dict[int, List[Tuple[ElementKind, int]]] = {s.id: [] for s in self.substations}
        for line in self.lines:
            per_sub[line.from_substation].append((ElementKind.LINE_ORIGIN, line.id))
            per_sub[line.to_substation].append((ElementKind.LINE_EXTREMITY, line.id))
        for gen in self.generators:
            per_sub[gen.substation].append((ElementKind.GENERATOR, gen.id))
        for load in self.loads:
            per_sub[load.substation].append((ElementKind.LOAD, load.id))

        slots: List[ElementSlot] = []
        substation_elements = []
        line_or = np.zeros(len(self.lines), dtype=np.int64)
        line_ex = np.zeros(len(self.lines), dtype=np.int64)
        gen_el = np.zeros(len(self.generators), dtype=np.int64)
        load_el = np.zeros(len(self.loads), dtype=np.int64)
        for sub in self.substations:
            indices = []
            for position, (kind, ref) in enumerate(per_sub[sub.id]):
                index = len(slots)
                slots.append(ElementSlot(index, kind, ref, sub.id, position))
                indices.append(index)
                if kind is ElementKind.LINE_ORIGIN:
                    line_or[ref] = index
                elif kind is ElementKind.LINE_EXTREMITY:
                    line_ex[ref] = index
                elif kind is ElementKind.GENERATOR:
                    gen_el[ref] = index
                else:
                    load_el[ref] = index
            substation_elements.append(tuple(indices))

        return GridLayout(
            slots=tuple(slots),
            substation_elements=tuple(substation_elements),
            line_origin_element=line_or,
            line_extremity_element=line_ex,
            generator_element=gen_el,
            load_element=load_el,
            element_substation=np.array([slot.substation for slot in slots], dtype=np.int64),
        )

    @property
    def layout(self) -> GridLayout:
        if self._layout is None:
            self._layout = self._build_layout()
        return self._layout

    @property
    def n_substations(self) -> int:
        return len(self.substations)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_elements(self) -> int:
        return self.layout.n_elements

    @property
    def reactances(self) -> np.ndarray:
        return np.array([line.reactance for line in self.lines], dtype=np.float64)

    @property
    def line_limits(self) -> np.ndarray:
        return np.array([line.limit_mw for line in self.lines], dtype=np.float64)

    @property
    def p_max(self) -> np.ndarray:
        return np.array([gen.p_max_mw for gen in self.generators], dtype=np.float64)

    def elements_at(self, substation: int) -> Tuple[ElementSlot, ...]:
        return tuple(self.layout.slots[i] for i in self.layout.substation_elements[substation])

    def substation_size(self, substation: int) -> int:
        return len(self.layout.substation_elements[substation])

    def incident_lines(self, substation: int) -> Tuple[int, ...]:
        return tuple(sorted({slot.ref for slot in self.elements_at(substation) if slot.kind.is_line}))

    def with_line_limits(self, limits: np.ndarray) -> "GridSpec":
        lines = [line.model_copy(update={"limit_mw": float(limit)}) for line, limit in zip(self.lines, limits)]
        return GridSpec(
            name=self.name,
            substations=self.substations,
            lines=lines,
            generators=self.generators,
            loads=self.loads,
        )


def load_grid(path: Union[str, Path] = BUNDLED_CASE5) -> GridSpec:
    """Parse and validate a grid description file."""
    path = Path(path)
    try:
        spec = GridSpec.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise GridSpecError(f"invalid grid file {path}: {e}") from e
    logger.info(
        "grid_loaded",
        path=str(path),
        substations=spec.n_substations,
        lines=spec.n_lines,
        generators=len(spec.generators),
        loads=len(spec.loads),
    )
    return spec


def dump_grid(spec: GridSpec, path: Union[str, Path]) -> None:
    """Write a grid description file."""
    Path(path).write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")
