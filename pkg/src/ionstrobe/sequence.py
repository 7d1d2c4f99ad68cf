"""Experimental sequence composition: excite, synchronize, analyze, detect.

One sequence is: thermal initialization in |down>, an optional coherent
displacement or squeeze kick, a synchronization MW pi/2 pulse, the
stroboscopic analysis train at the scan phase, and projective detection
of P_down. Thermal motion is handled by Monte-Carlo draws over initial
Fock levels, deduplicated into a weighted ensemble.

The excitation phase is referenced to the stroboscopic sampling instants:
a free pre-delay of one motional period minus half a flash aligns every
flash center with the nominal wave-packet phase, so a displacement phase
of zero means "wave packet at maximum position at the sampling times".
Dephasing enters as a classical contrast envelope over the train duration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .dynamics import (
    DephasingSpec,
    PulseTrainSpec,
    apply_dephasing,
    free_evolve,
    mw_rotation,
    run_pulse_train,
)
from .errors import ConfigError, IonstrobeError, TruncationError
from .fitting import CosineFit, fit_cosine
from .hilbert import (
    SPIN_DOWN,
    CoherentAmp,
    FrameParams,
    HilbertSpec,
    ModeParams,
    SpinMotionState,
    SqueezeParam,
    check_truncation,
    displacement_operator,
    expect_n,
    expect_sigma_z,
    make_initial_state,
    squeeze_operator,
    thermal_ensemble,
)

REFERENCE_SEED_OFFSET = 1 << 20  # separates reference from measurement detection streams


@dataclass(frozen=True)
class SequenceSpec:
    """Everything needed to run one encode/analyze sequence."""

    hilbert: HilbertSpec
    mode: ModeParams
    frame: FrameParams
    analysis: PulseTrainSpec
    excitation: CoherentAmp | SqueezeParam | None = None
    dephasing: DephasingSpec = DephasingSpec(envelope="none")
    thermal_samples: int = 200
    thermal_seed: int = 0
    sync_phase: float = math.pi

    def pre_delay(self) -> float:
        """Free evolution that centers the first flash on the nominal phase."""
        return (self.mode.period - self.analysis.flash_dur / 2.0) % self.mode.period


@dataclass(frozen=True)
class ScanSpec:
    """Grid, detection, and referencing layout of one scan."""

    phi_grid: tuple
    outer_grid: tuple = (0.0,)
    outer_var: str = "none"
    detection_mode: str = "analytic"
    shots: int = 250
    base_seed: int = 0
    interleave_reference: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phi_grid", tuple(float(v) for v in self.phi_grid))
        object.__setattr__(self, "outer_grid", tuple(float(v) for v in self.outer_grid))
        if not self.phi_grid or not self.outer_grid:
            raise ConfigError("scan grids must be non-empty")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.outer_var not in ("none", "theta0", "zeta0", "alpha_abs"):
            raise ConfigError(f"unknown outer_var '{self.outer_var}'")
        if self.detection_mode not in ("analytic", "shots"):
            raise ConfigError(f"unknown detection mode '{self.detection_mode}'")


@dataclass(frozen=True)
class ScanRecord:
    """One scan point: corrected phase coordinate and detected observables."""

    phi: float
    outer: float
    p_down_mean: float
    p_down_sem: float
    sigma_z: float
    delta_n: float


@dataclass(frozen=True)
class PatternField:
    """Static traveling-wave pattern probed by displacing the ion."""

    wavelength: float
    rotation: float
    phase_origin: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")


@lru_cache(maxsize=24)
def _excitation_matrix(kind: str, magnitude: float, fock_dim: int) -> np.ndarray:
    spec = HilbertSpec(fock_dim=fock_dim, tail_tol=0.5)
    if kind == "coherent":
        op = displacement_operator(CoherentAmp(magnitude, 0.0), spec)
    else:
        op = squeeze_operator(SqueezeParam(magnitude, 0.0), spec)
    op.setflags(write=False)
    return op


def _apply_excitation(state: SpinMotionState, excitation) -> SpinMotionState:
    """Kick the motion; the phase enters by number-operator conjugation."""
    if excitation is None or excitation.magnitude == 0.0:
        return state
    n = state.fock_dim
    if isinstance(excitation, CoherentAmp):
        op = _excitation_matrix("coherent", excitation.magnitude, n)
        rot = excitation.phase
    elif isinstance(excitation, SqueezeParam):
        op = _excitation_matrix("squeeze", excitation.magnitude, n)
        rot = excitation.phase / 2.0
    else:
        raise ConfigError(f"unsupported excitation {type(excitation).__name__}")
    phases = np.exp(1j * rot * np.arange(n))
    blocks = []
    for block in state.spin_blocks():
        blocks.append(phases * (op @ (np.conj(phases) * block)))
    return SpinMotionState(np.concatenate(blocks), n)


class _SequenceRunner:
    """Caches the state just before the analysis train for repeated phi probes."""

    def __init__(self, spec: SequenceSpec):
        self.spec = spec
        levels, weights = thermal_ensemble(
            spec.mode.n_th, spec.thermal_samples, spec.thermal_seed
        )
        self.weights = weights
        self.envelope = apply_dephasing(1.0, spec.dephasing, spec.analysis.total_duration)
        pre_delay = spec.pre_delay()
        self.pre_train = []
        self.n_initial = []
        for level in levels:
            st = make_initial_state(SPIN_DOWN, int(level), spec.hilbert)
            st = _apply_excitation(st, spec.excitation)
            self.n_initial.append(expect_n(st))
            if pre_delay > 0:
                st = free_evolve(st, spec.mode, pre_delay)
            st = mw_rotation(st, math.pi / 2.0, spec.sync_phase)
            self.pre_train.append(st)
        for st in self.pre_train:
            rep = check_truncation(st, spec.hilbert)
            if not rep.passed:
                raise TruncationError(
                    f"excitation leaves {rep.tail_population:.3e} in the top "
                    f"{rep.tail_levels} Fock levels (tol {rep.tail_tol:g}); "
                    "increase fock_dim"
                )

    def evaluate(self, phi: float) -> tuple[float, float]:
        """(p_down, delta_n) at analysis phase phi, thermal averaged."""
        spec = self.spec
        train = replace(spec.analysis, base_phase=phi)
        p_down = 0.0
        delta_n = 0.0
        for w, st, n0 in zip(self.weights, self.pre_train, self.n_initial):
            out = run_pulse_train(st, train, spec.mode, spec.frame, spec.hilbert)
            p_down += w * (1.0 - expect_sigma_z(out)) / 2.0
            delta_n += w * (expect_n(out) - n0)
        p_down = 0.5 + (p_down - 0.5) * self.envelope
        return min(max(p_down, 0.0), 1.0), delta_n


def run_sequence(spec: SequenceSpec, phi: float) -> tuple[float, float]:
    """Run the full sequence once at analysis phase phi.

    Returns the thermal-averaged, envelope-attenuated P_down and the
    back-action delta<n> between the post-excitation and post-analysis
    states.
    """
    return _SequenceRunner(spec).evaluate(phi)


def sample_detection(p_down: float, shots: int, seed) -> tuple[float, float]:
    """Bernoulli projection of `shots` detections; deterministic per seed."""
    if not 0.0 <= p_down <= 1.0:
        raise ValueError("p_down must lie in [0, 1]")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    mean = float(np.count_nonzero(rng.random(shots) < p_down)) / shots
    sem = math.sqrt(mean * (1.0 - mean) / shots)
    return mean, sem


def _with_outer(spec: SequenceSpec, outer_var: str, value: float) -> SequenceSpec:
    if outer_var == "none":
        return spec
    exc = spec.excitation
    if outer_var == "theta0":
        if not isinstance(exc, CoherentAmp):
            raise ConfigError("outer_var 'theta0' needs a coherent excitation")
        return replace(spec, excitation=replace(exc, phase=value))
    if outer_var == "zeta0":
        if not isinstance(exc, SqueezeParam):
            raise ConfigError("outer_var 'zeta0' needs a squeeze excitation")
        return replace(spec, excitation=replace(exc, phase=value))
    if outer_var == "alpha_abs":
        base_phase = exc.phase if isinstance(exc, CoherentAmp) else 0.0
        return replace(spec, excitation=CoherentAmp(magnitude=value, phase=base_phase))
    raise ConfigError(f"unknown outer_var '{outer_var}'")


def reference_spec(spec: SequenceSpec) -> SequenceSpec:
    """The alpha = 0 phase-reference variant of a sequence."""
    return replace(spec, excitation=None)


def characterize_reference_fringe(spec: SequenceSpec, n_points: int = 8) -> CosineFit:
    """Analytic fringe of the alpha = 0 sequence; exact cosine by construction."""
    runner = _SequenceRunner(reference_spec(spec))
    phis = np.linspace(0.0, 2.0 * math.pi, n_points, endpoint=False)
    samples = [(float(phi), runner.evaluate(float(phi))[0], 0.0) for phi in phis]
    return fit_cosine(samples)


def _invert_reference(p_meas: float, fringe: CosineFit) -> float:
    """Drift estimate from one mid-fringe reference detection."""
    if fringe.contrast <= 0:
        return 0.0
    arg = (fringe.offset - p_meas) * 2.0 / fringe.contrast
    return math.asin(min(max(arg, -1.0), 1.0))


def run_scan(
    scan: ScanSpec,
    spec: SequenceSpec,
    drift_phases: np.ndarray | None = None,
    threads: int = 1,
) -> list[ScanRecord]:
    """Evaluate the sequence over (outer, phi) grids, outer-major.

    Per-point detection seeds are base_seed + point index. When
    interleave_reference is set, every measurement is preceded by an
    alpha = 0 reference realization at mid-fringe whose inferred drift is
    subtracted from the measurement's phase coordinate. drift_phases, if
    given, supplies one injected apparatus phase per realization.
    """
    n_phi = len(scan.phi_grid)
    n_points = len(scan.outer_grid) * n_phi
    reals_per_point = 2 if scan.interleave_reference else 1
    if drift_phases is not None and len(drift_phases) < n_points * reals_per_point:
        raise ConfigError(
            f"drift trace supplies {len(drift_phases)} phases, "
            f"need {n_points * reals_per_point}"
        )

    ref_runner = None
    ref_fringe = None
    if scan.interleave_reference:
        ref_runner = _SequenceRunner(reference_spec(spec))
        ref_fringe = characterize_reference_fringe(spec)
        phi_ref = ref_fringe.phase + math.pi / 2.0

    records: list[ScanRecord | None] = [None] * n_points

    def _drift(real_index: int) -> float:
        if drift_phases is None:
            return 0.0
        return float(drift_phases[real_index])

    def _one_point(args):
        outer_idx, outer, runner, phi_idx, phi = args
        idx = outer_idx * n_phi + phi_idx
        try:
            if scan.interleave_reference:
                ref_real, meas_real = 2 * idx, 2 * idx + 1
                p_ref = ref_runner.evaluate(phi_ref + _drift(ref_real))[0]
                if scan.detection_mode == "shots":
                    p_ref, _ = sample_detection(
                        p_ref, scan.shots, scan.base_seed + idx + REFERENCE_SEED_OFFSET
                    )
                drift_hat = _invert_reference(p_ref, ref_fringe)
                p, dn = runner.evaluate(phi + _drift(meas_real))
                phi_out = phi + drift_hat
            else:
                p, dn = runner.evaluate(phi + _drift(idx))
                phi_out = phi
            if scan.detection_mode == "shots":
                mean, sem = sample_detection(p, scan.shots, scan.base_seed + idx)
            else:
                mean, sem = p, 0.0
        except IonstrobeError as exc:
            raise type(exc)(f"at scan point (outer={outer:g}, phi={phi:g}): {exc}") from exc
        records[idx] = ScanRecord(
            phi=phi_out,
            outer=outer,
            p_down_mean=mean,
            p_down_sem=sem,
            sigma_z=1.0 - 2.0 * mean,
            delta_n=dn,
        )

    tasks = []
    for outer_idx, outer in enumerate(scan.outer_grid):
        try:
            runner = _SequenceRunner(_with_outer(spec, scan.outer_var, outer))
        except IonstrobeError as exc:
            raise type(exc)(f"at scan point (outer={outer:g}): {exc}") from exc
        for phi_idx, phi in enumerate(scan.phi_grid):
            tasks.append((outer_idx, outer, runner, phi_idx, phi))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(_one_point, tasks))
    else:
        for task in tasks:
            _one_point(task)
    return records  # type: ignore[return-value]


def static_pattern_probe(x, z, pattern: PatternField, contrast: float | None = None):
    """P_down when the ion sits at (x, z) in the standing phase pattern.

    Used with a fixed analysis phase; the fringe runs along the effective
    wave vector at `pattern.rotation` from the z axis.
    """
    c = pattern.amplitude if contrast is None else contrast
    u = (
        2.0
        * math.pi
        * (np.asarray(x) * math.sin(pattern.rotation) + np.asarray(z) * math.cos(pattern.rotation))
        / pattern.wavelength
    )
    out = 0.5 + 0.5 * c * np.cos(u + pattern.phase_origin)
    return float(out) if np.isscalar(x) or np.asarray(x).ndim == 0 else out


def interleaved_reference(
    pairs: list[tuple[ScanRecord, ScanRecord]],
    fringe: CosineFit,
) -> list[ScanRecord]:
    """Correct measurement phase coordinates using adjacent alpha = 0 references.

    Each pair is (measurement, reference) with the reference taken at
    mid-fringe. The drift inferred from the reference detection is added
    to the measurement's phase coordinate so corrected records lie on the
    drift-free fringe; re-estimating the drift from a corrected reference
    gives zero by construction.
    """
    corrected = []
    for pair in pairs:
        if len(pair) != 2 or pair[1] is None:
            raise ConfigError("every measurement record needs a reference record")
        meas, ref = pair
        drift_hat = _invert_reference(ref.p_down_mean, fringe)
        corrected.append(replace(meas, phi=meas.phi + drift_hat))
    return corrected
