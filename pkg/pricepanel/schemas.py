"""
Pydantic models (schemas) for input records, pipeline rows and results.
"""
from __future__ import annotations

from decimal import Decimal
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .services.timevars import BASE_MONTH, WINDOW_HI, WINDOW_LO, YearMonth

PRICE_DECIMALS = 6


# --- Input records ---

class RecordBase(BaseModel):
    model_config = ConfigDict(frozen=True, coerce_numbers_to_str=True, extra="forbid")


class ProductRecord(RecordBase):
    prod_id: str = Field(min_length=1)
    name: str
    born_ts: int

    @field_validator("born_ts")
    def validate_born_ts(cls, v):
        if v < 0:
            raise ValueError("negative born_ts")
        return v


class OfferRecord(RecordBase):
    offer_id: str = Field(min_length=1)
    prod_id: str = Field(min_length=1)
    ret_id: str = Field(min_length=1)
    ts: int
    price: Decimal

    @field_validator("ts")
    def validate_ts(cls, v):
        if v < 0:
            raise ValueError("negative timestamp")
        return v

    @field_validator("price")
    def validate_price(cls, v: Decimal):
        if not v.is_finite():
            raise ValueError("price is not finite")
        if v < 0:
            raise ValueError("negative price")
        if v.as_tuple().exponent < -PRICE_DECIMALS:
            raise ValueError(f"price has more than {PRICE_DECIMALS} decimal places")
        return v


class ClickRecord(RecordBase):
    prod_id: str = Field(min_length=1)
    ret_id: str = Field(min_length=1)
    ts: int
    clicks: int

    @field_validator("ts")
    def validate_ts(cls, v):
        if v < 0:
            raise ValueError("negative timestamp")
        return v

    @field_validator("clicks")
    def validate_clicks(cls, v):
        if v < 0:
            raise ValueError("negative clicks")
        return v


class RetailerRecord(RecordBase):
    ret_id: str = Field(min_length=1)
    ret_name: str
    ts: int

    @field_validator("ts")
    def validate_ts(cls, v):
        if v < 0:
            raise ValueError("negative timestamp")
        return v


class Reject(BaseModel):
    table: str
    line: int
    reason: str
    record: str


# --- Pipeline rows ---

class TimedRow(BaseModel):
    """Offer or click with the time variables attached."""
    model_config = ConfigDict(frozen=True)

    prod_id: str
    ret_id: str
    ts: int
    month: YearMonth
    week: str
    e: int
    price: Optional[Decimal] = None
    clicks: Optional[int] = None
    offer_id: Optional[str] = None


class MonthlyClicks(BaseModel):
    model_config = ConfigDict(frozen=True)

    prod_id: str
    ret_id: str
    month: YearMonth
    clk: int


class PanelCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    prod_id: str
    ret_id: str
    month: YearMonth
    mean_price: Decimal
    clk: Optional[int] = None
    e: int
    bin: int

    @model_validator(mode="after")
    def validate_bin(self):
        if self.bin != 3 * (self.e // 3):
            raise ValueError(f"bin {self.bin} does not match event month {self.e}")
        return self


class IndexedObservation(PanelCell):
    base_price: Optional[Decimal] = None
    P: Optional[Decimal] = None
    logP: Optional[float] = None


class AnalysisRow(BaseModel):
    """One row of the exported analysis table, in export column order."""
    model_config = ConfigDict(frozen=True)

    prod_id: str
    ret_id: str
    ret_name: Optional[str] = None
    month: YearMonth
    e: int
    b: int
    P: Optional[float] = None
    logP: Optional[float] = None
    clk: Optional[int] = None


OBS_COLUMNS = ["prod_id", "ret_id", "ret_name", "month", "e", "b", "P", "logP", "clk"]


class SupPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    category: str
    pattern: str


class SupPatternSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: str = "1"
    patterns: list[SupPattern] = Field(default_factory=list)


class PanelDiagnostics(BaseModel):
    cohort_size: int = 0
    sup_products: int = 0
    sup_by_category: dict[str, int] = Field(default_factory=dict)
    control_products: int = 0
    strict_products: int = 0
    offers_in_window: int = 0
    clicks_in_window: int = 0
    offers_out_of_window: int = 0
    clicks_out_of_window: int = 0
    cells: int = 0
    pairs: int = 0
    pairs_without_base: int = 0
    pairs_with_zero_base: int = 0
    obs_rows: int = 0


# --- Estimation results ---

class ConvergenceInfo(BaseModel):
    iterations: int
    max_change: float


class EventStudyFit(BaseModel):
    group: str = "sample"
    outcome: Literal["P", "logP"] = "P"
    ref_bin: int = 0
    bins: list[int]
    beta: list[float]
    vcov: Optional[list[list[float]]] = None
    n_obs: int
    n_products: int
    n_retailers: int
    n_pairs: int
    dropped_bins: list[int] = Field(default_factory=list)
    rmse: float
    adj_r2: Optional[float] = None
    within_r2: Optional[float] = None
    dof_inference: int
    ssc: Literal["standard", "none"] = "standard"
    retailer_key: Literal["ret_name", "ret_id"] = "ret_name"
    psd_repaired: bool = False
    singleton_products: int = 0
    singleton_retailers: int = 0
    convergence: ConvergenceInfo

    @model_validator(mode="after")
    def validate_shapes(self):
        if len(self.beta) != len(self.bins):
            raise ValueError("beta and bins differ in length")
        if self.vcov is not None:
            k = len(self.bins)
            if len(self.vcov) != k or any(len(row) != k for row in self.vcov):
                raise ValueError("vcov dimension does not match bins")
        return self

    def vcov_array(self) -> Optional[np.ndarray]:
        if self.vcov is None:
            return None
        return np.asarray(self.vcov, dtype=float).reshape(len(self.bins), len(self.bins))

    def coef(self, b: int) -> float:
        if b == self.ref_bin:
            return 0.0
        return self.beta[self.bins.index(b)]

    def std_error(self, b: int) -> Optional[float]:
        if b == self.ref_bin:
            return 0.0
        if self.vcov is None:
            return None
        i = self.bins.index(b)
        return float(np.sqrt(max(self.vcov[i][i], 0.0)))


class FixedEffectsSolution(BaseModel):
    alpha: dict[str, float]
    delta: dict[str, float]
    iterations: int
    residual_norm: float


# --- Summaries ---

class DiDSummary(BaseModel):
    group: str
    window: Literal["6m", "12m", "full"]
    estimate: float
    se: Optional[float] = None
    t: Optional[float] = None
    p: Optional[float] = None
    stars: str = ""
    dof: Optional[int] = None
    degenerate: bool = False
    contrast: dict[int, float]
    missing_bins: list[int] = Field(default_factory=list)


class StarScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    thresholds: list[tuple[float, str]] = Field(
        default_factory=lambda: [(0.01, "***"), (0.05, "**"), (0.10, "*"), (0.15, ".")]
    )

    @field_validator("thresholds")
    def validate_thresholds(cls, v):
        cuts = [cut for cut, _ in v]
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("star thresholds must be strictly increasing")
        return v


class PlotPoint(BaseModel):
    bin: int
    estimate: float
    lower: float
    upper: float


class PlotSeries(BaseModel):
    group: str
    level: float = 0.90
    points: list[PlotPoint]


# --- Simulation ---

class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_products: int = Field(24, ge=2)
    n_retailers: int = Field(6, ge=2)
    sup_share: float = Field(0.5, ge=0, le=1)
    start_month: str = "2020-02"
    end_month: str = "2025-02"
    true_effect: float = 10.0
    noise_sd: float = Field(5.0, ge=0)
    product_sd: float = Field(2.0, ge=0)
    retailer_sd: float = Field(2.0, ge=0)
    missing_rate: float = Field(0.0, ge=0, le=1)
    offers_per_cell: int = Field(1, ge=1)
    retailer_versions: int = Field(3, ge=1)
    mean_clicks: float = Field(20.0, ge=0)
    seed: int = 0

    @field_validator("start_month", "end_month")
    def validate_month(cls, v):
        YearMonth.parse(v)
        return v

    @model_validator(mode="after")
    def validate_range(self):
        if YearMonth.parse(self.end_month) < YearMonth.parse(self.start_month):
            raise ValueError("end_month precedes start_month")
        n_sup = round(self.n_products * self.sup_share)
        if n_sup < 1 or self.n_products - n_sup < 1:
            raise ValueError("sup_share must leave at least one SUP and one control product")
        return self


# --- Run configuration and manifest ---

class SimulateSection(SimConfig):
    pass


class IngestSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    products: Optional[str] = None
    offers: Optional[str] = None
    clicks: Optional[str] = None
    retailers: Optional[str] = None
    strict_refs: bool = False


class BuildPanelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    patterns: Optional[str] = None
    base_month: str = str(BASE_MONTH)
    window: str = f"{WINDOW_LO}:{WINDOW_HI}"


class FitSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    outcome: Literal["P", "logP"] = "P"
    ref_bin: int = 0
    ssc: Literal["standard", "none"] = "standard"
    retailer_key: Literal["ret_name", "ret_id"] = "ret_name"
    rmse_denominator: Literal["n", "dof"] = "n"
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(10_000, ge=1)


class DidSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    windows: list[str] = Field(default_factory=lambda: ["6", "12", "full"])
    dof_rule: Literal["treated", "min"] = "treated"
    strict: bool = False


class ReportSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["latex", "csv"] = "latex"


class PlotSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: float = Field(0.90, gt=0, lt=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out: str = "out"
    simulate: Optional[SimulateSection] = None
    ingest: IngestSection = Field(default_factory=IngestSection)
    build_panel: BuildPanelSection = Field(default_factory=BuildPanelSection)
    fit: FitSection = Field(default_factory=FitSection)
    did: DidSection = Field(default_factory=DidSection)
    report: ReportSection = Field(default_factory=ReportSection)
    plot: PlotSection = Field(default_factory=PlotSection)


class RunManifest(BaseModel):
    command: list[str]
    config_hash: str
    version: str
    started_at: str
    finished_at: Optional[str] = None
    inputs: dict[str, str] = Field(default_factory=dict)
    outputs: dict[str, str] = Field(default_factory=dict)
