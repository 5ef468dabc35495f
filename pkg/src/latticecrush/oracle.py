"""Deterministic synthetic crush oracle.

Produces the four output arrays a crush experiment would measure — reaction
force at the fixed plate, plastic dissipation, damage dissipation, and
elastic strain energy — for one (geometry, wall thickness, strain rate,
final strain) input.  The model is a 1D rate-dependent column-crush
recurrence:  Johnson-Cook-form hardening, a slenderness-driven geometric
softening multiplier, linear damage knockdown between two plastic-strain
thresholds, and a reaction force gated to zero until the elastic wave has
crossed the column height.  It reproduces the qualitative physics a
surrogate must learn (rate hardening, thickness scaling, geometry
dependence, wave delay, damage softening) at negligible cost.  It is a
stand-in for shell finite-element simulation, not a replacement: no claim
of quantitative agreement with any FE result is made.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CurveMeasurements, CurveSet, build_unit_cell, geometry_features, measure_curves, scale_to_box, tessellate
from .keys import DesignKey, format_key, parse_key

BOX_SIDE_MM = 20.0
HEIGHT_MM = 10.0
CELL_GRID = 2
FINAL_STRAIN_DEFAULT = 0.20
FINE_STEPS = 100
OUTPUT_STEPS = 50

SIM_BATCH_MAGIC = "lcsim"
SIM_BATCH_VERSION = 1

CSV_COLUMNS = (
    "key",
    "thickness_mm",
    "rate_1_per_s",
    "final_strain",
    "step",
    "time_s",
    "strain",
    "rf_N",
    "pd_J",
    "dmd_J",
    "else_J",
)


class OracleError(ValueError):
    """Contract violation in oracle inputs."""


class IntegrationError(RuntimeError):
    """Non-finite intermediate during crush integration."""

    def __init__(self, step: int, detail: str) -> None:
        self.step = step
        super().__init__(f"integration produced a non-finite value at step {step}: {detail}")


@dataclass(frozen=True)
class MaterialConfig:
    """Material and model constants of the crush recurrence.

    Johnson-Cook-form hardening sigma = (A + B * eps_p^n) * (1 + C * ln(rate/ref))
    with the temperature term omitted (isothermal).  Defaults are typical
    Ti-6Al-4V literature values plus tuning constants for the damage and
    buckling terms; all are configuration, overridable via file.
    """

    elastic_modulus: float = 113.8e9  # Pa
    density: float = 4430.0  # kg/m^3
    jc_a: float = 1098e6  # Pa
    jc_b: float = 1092e6  # Pa
    jc_n: float = 0.93
    jc_c: float = 0.014
    ref_rate: float = 1.0  # 1/s
    damage_onset: float = 0.05  # plastic strain at damage initiation
    damage_failure: float = 0.30  # plastic strain at full damage
    damage_max: float = 0.8  # maximum load knockdown, in [0, 1)
    buckling_coeff: float = 0.02  # slenderness softening coefficient

    def __post_init__(self) -> None:
        if not (self.elastic_modulus > 0 and self.density > 0 and self.jc_a > 0):
            raise OracleError("elastic_modulus, density, and jc_a must be positive")
        if not 0.0 <= self.damage_onset < self.damage_failure:
            raise OracleError("require 0 <= damage_onset < damage_failure")
        if not 0.0 <= self.damage_max < 1.0:
            raise OracleError("damage_max must lie in [0, 1)")
        if not 0.0 < self.jc_n <= 1.0:
            raise OracleError("jc_n must lie in (0, 1]")
        if self.jc_c < 0.0:
            raise OracleError("jc_c must be non-negative")
        if self.ref_rate <= 0.0:
            raise OracleError("ref_rate must be positive")


DEFAULT_MATERIAL = MaterialConfig()


@dataclass
class SimRecord:
    """One oracle run: scalar inputs plus 50-step output arrays.

    `work` is the trapezoidal external work accumulated on the internal fine
    grid; it is bookkeeping that makes the energy-balance invariant
    (pd + dmd + else = work) checkable from the record alone.
    """

    key: str
    thickness: float  # mm
    strain_rate: float  # 1/s
    height: float  # mm
    final_strain: float
    time: np.ndarray  # s
    strain: np.ndarray
    rf: np.ndarray  # N
    pd: np.ndarray  # J
    dmd: np.ndarray  # J
    else_: np.ndarray  # J
    work: np.ndarray  # J

    ARRAY_FIELDS = ("time", "strain", "rf", "pd", "dmd", "else_", "work")

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in self.ARRAY_FIELDS)

    def identical(self, other: "SimRecord") -> bool:
        """Bitwise equality of metadata and all arrays."""
        if (self.key, self.thickness, self.strain_rate, self.height, self.final_strain) != (
            other.key,
            other.thickness,
            other.strain_rate,
            other.height,
            other.final_strain,
        ):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def wave_arrival(height_mm: float, mat: MaterialConfig) -> float:
    """Transit time of the elastic wave over the column height: H / sqrt(E/rho)."""
    if not height_mm > 0.0:
        raise OracleError(f"height must be positive, got {height_mm}")
    return (height_mm * 1e-3) / math.sqrt(mat.elastic_modulus / mat.density)


def _rate_factor(rate: float, mat: MaterialConfig) -> float:
    return 1.0 + mat.jc_c * math.log(max(rate / mat.ref_rate, 1.0))


def _hardening(eps_p: float, rate_factor: float, mat: MaterialConfig) -> float:
    return (mat.jc_a + mat.jc_b * eps_p**mat.jc_n) * rate_factor

def flow_stress(eps_p: float, rate: float, mat: MaterialConfig) -> float:
    """Rate-dependent flow stress in Pa; the rate term never softens below 1."""
    if eps_p < 0.0:
        raise OracleError(f"plastic strain must be non-negative, got {eps_p}")
    if not rate > 0.0:
        raise OracleError(f"strain rate must be positive, got {rate}")
    return _hardening(eps_p, _rate_factor(rate, mat), mat)


def _plastic_return(eps: float, eps_p_lo: float, rate_factor: float, mat: MaterialConfig) -> float:
    """Solve E*(eps - p) = hardening(p) for p in [eps_p_lo, eps] by bisection.

    The left side decreases and the right side increases in p, so the root
    is unique; 64 fixed iterations keep the result deterministic.
    """
    e_mod = mat.elastic_modulus
    lo, hi = eps_p_lo, eps
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if e_mod * (eps - mid) - _hardening(mid, rate_factor, mat) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fine_grid_crush(
    measurements: CurveMeasurements,
    thickness_mm: float,
    strain_rate: float,
    final_strain: float,
    mat: MaterialConfig,
    height_mm: float = HEIGHT_MM,
    box_side_mm: float = BOX_SIDE_MM,
    n_steps: int = FINE_STEPS,
) -> dict[str, np.ndarray]:
    """Integrate the crush recurrence on a uniform fine strain grid.

    Energy bookkeeping is exact by construction: the stored elastic energy
    is capped by the work accumulated so far, so the inelastic increment
    never goes negative and pd + dmd + else equals the running trapezoidal
    work at every step.
    """
    density = measurements.total_length * thickness_mm / (box_side_mm * box_side_mm)
    if density >= 1.0:
        raise OracleError(f"degenerate geometry: relative density {density:.3f} >= 1")

    e_mod = mat.elastic_modulus
    area_m2 = measurements.total_length * thickness_mm * 1e-6
    height_m = height_mm * 1e-3
    t_e = wave_arrival(height_mm, mat)
    kappa = mat.buckling_coeff * (measurements.max_free_span / thickness_mm)
    rate_factor = _rate_factor(strain_rate, mat)
    damage_span = mat.damage_failure - mat.damage_onset

    strain = np.empty(n_steps)
    time = np.empty(n_steps)
    rf = np.empty(n_steps)
    pd = np.empty(n_steps)
    dmd = np.empty(n_steps)
    else_ = np.empty(n_steps)
    work = np.empty(n_steps)

    eps_p = 0.0
    w_total = 0.0
    pd_total = 0.0
    dmd_total = 0.0
    else_prev = 0.0
    rf_prev = 0.0
    delta_prev = 0.0

    for i in range(n_steps):
        frac = i / (n_steps - 1)
        eps = final_strain * frac
        t = eps / strain_rate
        delta = eps * height_m

        sigma_trial = e_mod * (eps - eps_p)
        sigma_yield = _hardening(eps_p, rate_factor, mat)
        if sigma_trial <= sigma_yield:
            sigma = sigma_trial
        else:
            eps_p = _plastic_return(eps, eps_p, rate_factor, mat)
            sigma = e_mod * (eps - eps_p)

        damage = mat.damage_max * min(max((eps_p - mat.damage_onset) / damage_span, 0.0), 1.0)
        soften = 1.0 / (1.0 + kappa * eps)
        force = 0.0 if t <= t_e else sigma * area_m2 * soften * (1.0 - damage)

        d_work = 0.5 * (force + rf_prev) * (delta - delta_prev)
        w_total += d_work
        else_target = force * force * height_m / (2.0 * e_mod * area_m2)
        else_now = min(else_target, else_prev + d_work)
        d_inelastic = d_work - (else_now - else_prev)
        pd_total += (1.0 - damage) * d_inelastic
        dmd_total += damage * d_inelastic

        if not (math.isfinite(force) and math.isfinite(w_total) and math.isfinite(pd_total)):
            raise IntegrationError(i, f"force={force}, work={w_total}, pd={pd_total}")

        strain[i] = eps
        time[i] = t
        rf[i] = force
        pd[i] = pd_total
        dmd[i] = dmd_total
        else_[i] = else_now
        work[i] = w_total
        rf_prev = force
        delta_prev = delta
        else_prev = else_now

    return {"strain": strain, "time": time, "rf": rf, "pd": pd, "dmd": dmd, "else_": else_, "work": work}


@functools.lru_cache(maxsize=2048)
def _key_measurements(key_text: str) -> CurveMeasurements:
    cell = build_unit_cell(parse_key(key_text), BOX_SIDE_MM / CELL_GRID)
    return measure_curves(tessellate(cell, CELL_GRID, CELL_GRID))


def build_key_curves(key: DesignKey | str) -> CurveSet:
    """The 2x2 tessellation of a key's unit cell, scaled to the crush box."""
    parsed = parse_key(key) if isinstance(key, str) else key
    cell = build_unit_cell(parsed, BOX_SIDE_MM / CELL_GRID)
    return scale_to_box(tessellate(cell, CELL_GRID, CELL_GRID), BOX_SIDE_MM)


def _validate_inputs(thickness_mm: float, strain_rate: float, final_strain: float) -> None:
    if not thickness_mm > 0.0:
        raise OracleError(f"thickness must be positive, got {thickness_mm}")
    if not strain_rate > 0.0:
        raise OracleError(f"strain rate must be positive, got {strain_rate}")
    if not 0.0 < final_strain <= FINAL_STRAIN_DEFAULT:
        raise OracleError(f"final strain must lie in (0, {FINAL_STRAIN_DEFAULT}], got {final_strain}")


def _downsample(
    key_text: str,
    thickness_mm: float,
    strain_rate: float,
    final_strain: float,
    fine: dict[str, np.ndarray],
    height_mm: float,
) -> SimRecord:
    # Keep odd fine-grid indices so the final output step lands exactly on
    # final_strain (100 internal steps -> 50 output steps).
    pick = slice(1, None, 2)
    return SimRecord(
        key=key_text,
        thickness=thickness_mm,
        strain_rate=strain_rate,
        height=height_mm,
        final_strain=final_strain,
        time=fine["time"][pick].copy(),
        strain=fine["strain"][pick].copy(),
        rf=fine["rf"][pick].copy(),
        pd=fine["pd"][pick].copy(),
        dmd=fine["dmd"][pick].copy(),
        else_=fine["else_"][pick].copy(),
        work=fine["work"][pick].copy(),
    )


def simulate(
    key: DesignKey | str,
    thickness_mm: float,
    strain_rate: float,
    final_strain: float = FINAL_STRAIN_DEFAULT,
    mat: MaterialConfig = DEFAULT_MATERIAL,
) -> SimRecord:
    """Run the oracle for one key-based design (2x2 cells in a 20 mm box)."""
    _validate_inputs(thickness_mm, strain_rate, final_strain)
    key_text = format_key(parse_key(key)) if isinstance(key, str) else format_key(key)
    measurements = _key_measurements(key_text)
    fine = fine_grid_crush(measurements, thickness_mm, strain_rate, final_strain, mat)
    return _downsample(key_text, thickness_mm, strain_rate, final_strain, fine, HEIGHT_MM)


def simulate_curves(
    curves: CurveSet,
    label: str,
    thickness_mm: float,
    strain_rate: float,
    final_strain: float = FINAL_STRAIN_DEFAULT,
    mat: MaterialConfig = DEFAULT_MATERIAL,
    measurements: CurveMeasurements | None = None,
) -> SimRecord:
    """Run the oracle for an arbitrary cross-section (scaled to the crush box).

    `label` stands in for the design key in records and files; it must be 8
    ASCII characters so record serialization stays fixed-width.
    """
    if len(label) != 8 or not label.isascii():
        raise OracleError(f"label must be 8 ASCII characters, got {label!r}")
    _validate_inputs(thickness_mm, strain_rate, final_strain)
    scaled = scale_to_box(curves, BOX_SIDE_MM)
    if measurements is None:
        measurements = measure_curves(scaled)
    fine = fine_grid_crush(measurements, thickness_mm, strain_rate, final_strain, mat)
    return _downsample(label, thickness_mm, strain_rate, final_strain, fine, HEIGHT_MM)


# --- batch files --------------------------------------------------------------


def save_records(records: list[SimRecord], path) -> None:
    """Compact binary batch: text header, then fixed-width record blobs.

    Per record: 8 ASCII key bytes, four little-endian float64 metadata
    values (thickness, strain rate, height, final strain), then the seven
    50-step arrays as little-endian float64.
    """
    steps = OUTPUT_STEPS
    header = f"{SIM_BATCH_MAGIC} {SIM_BATCH_VERSION}\ncount {len(records)}\nsteps {steps}\nend\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for rec in records:
            if len(rec.key) != 8:
                raise OracleError(f"record key must be 8 characters, got {rec.key!r}")
            fh.write(rec.key.encode("ascii"))
            meta = np.array(
                [rec.thickness, rec.strain_rate, rec.height, rec.final_strain], dtype="<f8"
            )
            fh.write(meta.tobytes())
            for arr in rec.arrays():
                if arr.shape != (steps,):
                    raise OracleError(f"record arrays must have shape ({steps},), got {arr.shape}")
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_records(path) -> list[SimRecord]:
    with open(path, "rb") as fh:
        data = fh.read()
    head_end = data.find(b"end\n")
    if head_end < 0:
        raise ValueError(f"missing batch header terminator in {path}")
    lines = data[:head_end].decode("ascii").splitlines()
    if not lines or lines[0] != f"{SIM_BATCH_MAGIC} {SIM_BATCH_VERSION}":
        raise ValueError(f"unrecognized batch header {lines[:1]!r} in {path}")
    fields = dict(line.split() for line in lines[1:])
    count = int(fields["count"])
    steps = int(fields["steps"])
    offset = head_end + 4
    rec_bytes = 8 + 4 * 8 + len(SimRecord.ARRAY_FIELDS) * steps * 8
    if len(data) - offset != count * rec_bytes:
        raise ValueError(f"batch payload size mismatch in {path}")
    records = []
    for _ in range(count):
        key = data[offset : offset + 8].decode("ascii")
        offset += 8
        meta = np.frombuffer(data, dtype="<f8", count=4, offset=offset)
        offset += 32
        arrays = []
        for _name in SimRecord.ARRAY_FIELDS:
            arrays.append(np.frombuffer(data, dtype="<f8", count=steps, offset=offset).copy())
            offset += steps * 8
        records.append(
            SimRecord(
                key=key,
                thickness=float(meta[0]),
                strain_rate=float(meta[1]),
                height=float(meta[2]),
                final_strain=float(meta[3]),
                time=arrays[0],
                strain=arrays[1],
                rf=arrays[2],
                pd=arrays[3],
                dmd=arrays[4],
                else_=arrays[5],
                work=arrays[6],
            )
        )
    return records


def records_to_csv(records: list[SimRecord]) -> str:
    """CSV export, one row per time step."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        for step in range(rec.time.size):
            writer.writerow(
                [
                    rec.key,
                    repr(rec.thickness),
                    repr(rec.strain_rate),
                    repr(rec.final_strain),
                    step,
                    repr(float(rec.time[step])),
                    repr(float(rec.strain[step])),
                    repr(float(rec.rf[step])),
                    repr(float(rec.pd[step])),
                    repr(float(rec.dmd[step])),
                    repr(float(rec.else_[step])),
                ]
            )
    return buf.getvalue()


def save_records_csv(records: list[SimRecord], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(records_to_csv(records))
