"""Run documents: JSON configuration validated with pydantic, then turned into domain objects."""
from __future__ import annotations
import csv
import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from nct.config import settings
from nct.quadrature.sphere import AngularQuadrature, build_product_quadrature
from nct.scattering.phase import PhaseFunction
from nct.stats.laws import PathLengthLaw, make_law
from nct.stats.models import (
    AngularModulation,
    AngularWeight,
    ConstantCrossSection,
    CrossSectionModel,
    DirectionModulatedCrossSection,
    FreePathPdfCrossSection,
    TabulatedCrossSection,
)
from nct.transport.montecarlo import RunConfig
from nct.transport.source import GaussianSource, PointSource, Source, UniformSource
from nct.utils.errors import ConfigError, ModelError
from nct.utils.grid import SpatialGrid
from nct.utils.validators import odd_coefficients

SCHEMA_VERSION = 1

Vec3 = Tuple[float, float, float]
PositiveFloat = Annotated[float, Field(gt=0.0, allow_inf_nan=False)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---- path-length laws ----

class ConstantLawSpec(_Section):
    law: Literal["constant"]
    sigma: PositiveFloat


class ExponentialSpec(_Section):
    law: Literal["exponential"]
    rate: PositiveFloat


class UniformSpec(_Section):
    law: Literal["uniform"]
    length: PositiveFloat


class ShapeScaleSpec(_Section):
    law: Literal["gamma", "weibull", "lomax"]
    shape: PositiveFloat
    scale: PositiveFloat = 1.0


class PdfTableSpec(_Section):
    law: Literal["pdf_table"]
    s: Optional[List[float]] = None
    pdf: Optional[List[float]] = None
    file: Optional[str] = None
    renormalize: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.s is not None and self.pdf is not None
        if inline == (self.file is not None):
            raise ValueError("give either inline s/pdf columns or a CSV file (s,pdf)")
        return self


LawSpec = Annotated[
    Union[ConstantLawSpec, ExponentialSpec, UniformSpec, ShapeScaleSpec, PdfTableSpec],
    Field(discriminator="law"),
]


# ---- cross-section models ----

class ModulationSpec(_Section):
    form: Literal["polar", "quadratic"] = "polar"
    coefficients: List[float] = [1.0]
    matrix: Optional[List[List[float]]] = None
    target: Literal["cross_section", "mean_free_path"] = "cross_section"

    @model_validator(mode="after")
    def _even_and_complete(self):
        if self.form == "polar":
            odd = odd_coefficients(self.coefficients)
            if odd:
                raise ValueError(
                    f"angular modulation must be even, m(Ω) = m(-Ω); remove odd powers of μ {odd}"
                )
        elif self.matrix is None or np.shape(self.matrix) != (3, 3):
            raise ValueError("quadratic modulation needs a 3x3 matrix")
        return self


class ConstantModelSpec(_Section):
    kind: Literal["constant"]
    sigma: PositiveFloat


class ModulatedModelSpec(_Section):
    kind: Literal["direction_modulated"]
    base: LawSpec
    modulation: ModulationSpec


class TableNodeSpec(_Section):
    mu: float = Field(ge=0.0, le=1.0)
    s: Optional[List[float]] = None
    optical_depth: Optional[List[float]] = None
    file: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.s is not None and self.optical_depth is not None
        if inline == (self.file is not None):
            raise ValueError("give either inline s/optical_depth columns or a CSV file")
        return self


class TabulatedModelSpec(_Section):
    kind: Literal["tabulated"]
    nodes: List[TableNodeSpec] = Field(min_length=1)


class FromPdfModelSpec(_Section):
    kind: Literal["from_pdf"]
    distribution: LawSpec


ModelSpec = Annotated[
    Union[ConstantModelSpec, ModulatedModelSpec, TabulatedModelSpec, FromPdfModelSpec],
    Field(discriminator="kind"),
]

_TAGS = {"constant", "direction_modulated", "tabulated", "from_pdf", "exponential", "uniform",
         "gamma", "weibull", "lomax", "pdf_table"}
_UNION_FIELDS = {"model", "base", "distribution"}


# ---- remaining sections ----

class PhaseSpec(_Section):
    legendre: List[float] = [1.0]

    @field_validator("legendre")
    @classmethod
    def _bounded(cls, v: List[float]) -> List[float]:
        if not v or v[0] != 1.0:
            raise ValueError("the first Legendre coefficient a_0 must be 1")
        if len(v) - 1 > settings.max_legendre_order:
            raise ValueError(f"expansion order is capped at {settings.max_legendre_order}")
        return v


class SourceSpec(_Section):
    kind: Literal["uniform", "point", "gaussian"] = "uniform"
    q0: PositiveFloat = 1.0
    lower: Optional[Vec3] = None
    upper: Optional[Vec3] = None
    position: Optional[Vec3] = None
    center: Optional[Vec3] = None
    width: Optional[PositiveFloat] = None
    rate: PositiveFloat = 1.0

    @model_validator(mode="after")
    def _required(self):
        if self.kind == "point" and self.position is None:
            raise ValueError("a point source needs a position")
        if self.kind == "gaussian" and (self.center is None or self.width is None):
            raise ValueError("a gaussian source needs a center and a width")
        return self


class DomainSpec(_Section):
    lower: Vec3 = (-5.0, -5.0, -5.0)
    upper: Vec3 = (5.0, 5.0, 5.0)
    shape: Tuple[int, int, int] = (10, 10, 10)


class QuadratureSpec(_Section):
    n_polar: int = Field(default_factory=lambda: settings.n_polar)
    n_azimuthal: int = Field(default_factory=lambda: settings.n_azimuthal)

    @field_validator("n_polar")
    @classmethod
    def _even(cls, v: int) -> int:
        if v < 2 or v % 2:
            raise ValueError("n_polar must be even and >= 2")
        return v

    @field_validator("n_azimuthal")
    @classmethod
    def _quarter(cls, v: int) -> int:
        if v < 4 or v % 4:
            raise ValueError("n_azimuthal must be a multiple of 4 and >= 4")
        return v


class XiSpec(_Section):
    form: Literal["uniform", "polar"] = "uniform"
    coefficients: List[float] = [1.0]

    @model_validator(mode="after")
    def _even(self):
        odd = odd_coefficients(self.coefficients)
        if self.form == "polar" and odd:
            raise ValueError(f"angular weight must be even in Ω; remove odd powers of μ {odd}")
        return self


class McSpec(_Section):
    histories: int = Field(100_000, gt=0)
    batches: int = Field(default_factory=lambda: settings.min_batches)
    boundary: Literal["periodic", "vacuum"] = "periodic"
    n_mu: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _batches(self):
        if self.batches < settings.min_batches:
            raise ValueError(f"at least {settings.min_batches} batches are required")
        if self.histories < self.batches:
            raise ValueError("need at least one history per batch")
        return self


class IntegralSpec(_Section):
    cutoff: Optional[PositiveFloat] = None
    tol: PositiveFloat = Field(default_factory=lambda: settings.picard_tol)
    max_iter: int = Field(default_factory=lambda: settings.picard_max_iter, gt=0)
    directions: List[Vec3] = []


class DiffusionSpec(_Section):
    boundary: Literal["dirichlet", "periodic"] = "dirichlet"
    tol: PositiveFloat = Field(default_factory=lambda: settings.diffusion_tol)
    max_iter: int = Field(default_factory=lambda: settings.diffusion_max_iter, gt=0)


class OutputsSpec(_Section):
    csv: Optional[str] = None
    json: Optional[str] = None


class RunDocument(_Section):
    schema_version: Literal[1]
    model: ModelSpec
    phase: PhaseSpec = PhaseSpec()
    c: float = Field(0.0, ge=0.0, le=1.0)
    source: SourceSpec = SourceSpec()
    domain: DomainSpec = DomainSpec()
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    xi: XiSpec = XiSpec()
    mc: McSpec = Field(default_factory=McSpec)
    integral: IntegralSpec = Field(default_factory=IntegralSpec)
    diffusion: DiffusionSpec = Field(default_factory=DiffusionSpec)
    seed: int = Field(0, ge=0, lt=2**64)
    outputs: OutputsSpec = OutputsSpec()


def _path(loc) -> str:
    parts = []
    for i, item in enumerate(loc):
        if isinstance(item, str) and item in _TAGS and i and loc[i - 1] in _UNION_FIELDS:
            continue
        parts.append(str(item))
    return ".".join(parts)


def parse_config(text: str, base_dir: Optional[Path] = None) -> RunDocument:
    """Validated run document; every problem is reported with its field path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError.at("", f"malformed JSON: {exc}") from exc
    try:
        doc = RunDocument.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError((_path(e["loc"]), e["msg"]) for e in exc.errors()) from exc
    # physics-level checks need the constructed objects
    build_model(doc, base_dir)
    build_phase(doc)
    return doc


def load_config(path: Path) -> RunDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError.at("", f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.parent)


def _read_columns(file: str, names: Tuple[str, str], base_dir: Optional[Path], where: str):
    path = Path(file) if base_dir is None else base_dir / file
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(row for row in fh if not row.startswith("#")))
        return tuple(np.array([float(r[n]) for r in rows]) for n in names)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError.at(where, f"cannot read columns {names} from {path}: {exc}") from exc


def _build_law(spec, base_dir: Optional[Path], where: str) -> PathLengthLaw:
    data = spec.model_dump()
    if spec.law == "pdf_table" and spec.file is not None:
        data["s"], data["pdf"] = _read_columns(spec.file, ("s", "pdf"), base_dir, where + ".file")
    data.pop("file", None)
    return make_law(data)


def build_model(doc: RunDocument, base_dir: Optional[Path] = None) -> CrossSectionModel:
    spec = doc.model
    try:
        if spec.kind == "constant":
            return ConstantCrossSection(spec.sigma)
        if spec.kind == "from_pdf":
            return FreePathPdfCrossSection(_build_law(spec.distribution, base_dir, "model.distribution"))
        if spec.kind == "direction_modulated":
            mod = spec.modulation
            modulation = AngularModulation(
                form=mod.form,
                coefficients=tuple(mod.coefficients),
                matrix=tuple(tuple(r) for r in mod.matrix) if mod.matrix is not None else None,
                target=mod.target,
            )
            return DirectionModulatedCrossSection(_build_law(spec.base, base_dir, "model.base"),
                                                  modulation)
        nodes = sorted(spec.nodes, key=lambda n: n.mu)
        rows = []
        for i, node in enumerate(nodes):
            if node.file is not None:
                rows.append(_read_columns(node.file, ("s", "optical_depth"), base_dir,
                                          f"model.nodes.{i}.file"))
            else:
                rows.append((node.s, node.optical_depth))
        return TabulatedCrossSection.from_rows([n.mu for n in nodes], rows)
    except ModelError as exc:
        raise ConfigError.at("model", exc.detail) from exc


def build_phase(doc: RunDocument) -> PhaseFunction:
    try:
        return PhaseFunction(tuple(doc.phase.legendre))
    except ModelError as exc:
        raise ConfigError.at("phase.legendre", exc.detail) from exc


def build_grid(doc: RunDocument) -> SpatialGrid:
    d = doc.domain
    return SpatialGrid(tuple(d.lower), tuple(d.upper), tuple(d.shape))


def build_source(doc: RunDocument) -> Source:
    s, d = doc.source, doc.domain
    if s.kind == "uniform":
        return UniformSource(s.q0, tuple(s.lower or d.lower), tuple(s.upper or d.upper))
    if s.kind == "point":
        return PointSource(tuple(s.position), s.rate)
    return GaussianSource(tuple(s.center), s.width, s.rate, tuple(d.lower), tuple(d.upper))


def build_quadrature(doc: RunDocument) -> AngularQuadrature:
    return build_product_quadrature(doc.quadrature.n_polar, doc.quadrature.n_azimuthal)


def build_xi(doc: RunDocument) -> AngularWeight:
    if doc.xi.form == "uniform":
        return AngularWeight.uniform()
    try:
        return AngularWeight(tuple(doc.xi.coefficients))
    except ModelError as exc:
        raise ConfigError.at("xi", exc.detail) from exc


def build_run_config(doc: RunDocument, base_dir: Optional[Path] = None, threads: int = 1) -> RunConfig:
    return RunConfig(
        model=build_model(doc, base_dir),
        phase=build_phase(doc),
        c=doc.c,
        source=build_source(doc),
        grid=build_grid(doc),
        histories=doc.mc.histories,
        seed=doc.seed,
        boundary=doc.mc.boundary,
        batches=doc.mc.batches,
        n_mu=doc.mc.n_mu,
        threads=threads,
    )
