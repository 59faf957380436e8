"""End-to-end experiment: initialize, wait, measure the clock, read the data.

The time-averaged state is block diagonal across clock walls, so sampling
``(config, winding)`` from its diagonal reproduces the statistics of
measuring the clock register.  When the sampled wall lies inside the
output region the logical register is either the input or the circuit
output, and the flag bits tell which.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, gates, walk
from .errors import ErgoError, ReadoutError
from .lattice import ClockConfig, Dims, brick_count, flat_config, lattice, lift, signed_bricks, staircase_config


@dataclass(frozen=True)
class ExperimentSpec:
    dims: Dims
    m: int
    circuit: gates.Circuit
    x: str = ""
    T: float | None = None
    shots: int = 100_000
    seed: int = 0
    init: str = "staircase"
    M: int = 2
    eps: float = 0.1

    def __post_init__(self):
        if self.m <= 2 * self.dims.h:
            raise ReadoutError(f"output region m={self.m} must exceed 2h={2 * self.dims.h}")
        if self.shots < 1:
            raise ReadoutError(f"shots must be >= 1, got {self.shots}")
        if self.init not in ("flat", "staircase"):
            raise ReadoutError(f"init must be 'flat' or 'staircase', got {self.init!r}")
        if self.T is not None and self.T <= 0:
            raise ReadoutError(f"averaging horizon must be positive, got {self.T}")
        if self.circuit.h != self.dims.h:
            raise ReadoutError(f"circuit has {self.circuit.h} qubits, cylinder has h={self.dims.h}")
        if len(self.x) != self.circuit.n_in:
            raise ReadoutError(f"input {self.x!r} does not match n_in={self.circuit.n_in}")
        if self.eps < 0:
            raise ReadoutError(f"eps must be non-negative, got {self.eps}")

    def echo(self) -> dict:
        return {
            "h": self.dims.h,
            "c": self.dims.c,
            "m": self.m,
            "M": self.M,
            "x": self.x,
            "T": self.T,
            "shots": self.shots,
            "seed": self.seed,
            "init": self.init,
            "eps": self.eps,
            "circuit": gates.format_circuit(self.circuit),
        }


@dataclass(frozen=True)
class InitRecord:
    config: ClockConfig
    winding: int
    logical_bits: tuple[int, ...]


def initial_config(dims: Dims, init: str) -> ClockConfig:
    return flat_config(dims) if init == "flat" else staircase_config(dims)


def initial_state(spec: ExperimentSpec, circuit: gates.Circuit | None = None):
    """Reduced basis vector of the initial wall plus the data initialization.

    The logical register sits on the data qubits under the initial wall; all
    other data qubits start in |0>.
    """
    circuit = spec.circuit if circuit is None else circuit
    a = initial_config(spec.dims, spec.init)
    space = dynamics.ReducedSpace(spec.dims, spec.M)
    i0 = space.index_of(a)
    record = InitRecord(a, space.split(i0)[1], circuit.initial_bits(spec.x))
    return space.basis_vector(i0), record


def front_in_region(config: ClockConfig, m: int) -> bool:
    return all(1 <= j <= m for j in config.front)


def region_grades(dims: Dims, m: int) -> list[int]:
    """Brick counts in [0, g) whose every wall lies in the output region."""
    lat = lattice(dims)
    inside: dict[int, bool] = {}
    for a, count in zip(lat.configs, lat.counts):
        inside[count] = inside.get(count, True) and front_in_region(a, m)
    return sorted(l for l, ok in inside.items() if ok)


def logical_state(
    config: ClockConfig,
    winding: int,
    program: gates.Program,
    phi0: np.ndarray,
    M: int = 2,
    start: ClockConfig | None = None,
) -> np.ndarray:
    """Logical register carried by the wall ``config`` at winding ``winding``.

    ``phi0`` is the register on the initial wall ``start`` (flat by default).
    Every brick between the unwrapped initial wall and the unwrapped target
    wall is applied row by row, which is a valid time order for the
    brickwork.  Half bricks only move data and act trivially on the logical
    register.
    """
    dims = program.dims
    start = ClockConfig((0,) * dims.h) if start is None else start
    lo = np.asarray(lift(start, dims))
    lo_count = signed_bricks(lo, dims)
    grade = brick_count(config, dims) + dims.g * (winding % M)
    steps = (grade - lo_count) % (M * dims.g)
    hi = np.asarray(lift(config, dims))
    shift, rem = divmod(lo_count + steps - signed_bricks(hi, dims), dims.g)
    assert rem == 0
    hi = hi + dims.c * shift
    lo_pair = np.minimum(lo[:-1], lo[1:])
    hi_pair = np.minimum(hi[:-1], hi[1:])
    psi = np.asarray(phi0, dtype=complex)
    for j in range(int(lo.min()), int(hi.max())):
        layer = {
            k: code
            for k, code in program.row(j).items()
            if lo_pair[k] <= j < hi_pair[k]
        }
        psi = gates.apply_layer(psi, layer, dims.h)
    return psi


@dataclass(frozen=True)
class Readout:
    output: str
    flags: str
    accepted: bool


def readout_distribution(config, winding, program, circuit, x, M: int = 2, start=None) -> dict[tuple[str, str], float]:
    """Exact joint distribution of (output bits, flag bits) at a wall in the region."""
    phi0 = gates.basis_state(circuit.initial_bits(x))
    psi = logical_state(config, winding, program, phi0, M, start)
    cols = circuit.output_columns + tuple(circuit.flags)
    dist = gates.measure_distribution(psi, circuit.h, cols)
    n_out = circuit.n_out
    return {(key[:n_out], key[n_out:]): p for key, p in dist.items()}


def logical_readout(config, winding, program, circuit, x, m: int, rng=None, M: int = 2, start=None) -> Readout:
    """Measure output and flag qubits; accept iff every flag reads 1."""
    if not front_in_region(config, m):
        raise ReadoutError(f"wall {config.front} is not inside the output region 1..{m}")
    dist = readout_distribution(config, winding, program, circuit, x, M, start)
    keys = sorted(dist)
    probs = np.array([dist[k] for k in keys])
    rng = np.random.default_rng(0) if rng is None else rng
    out, flags = keys[rng.choice(len(keys), p=probs / probs.sum())]
    return Readout(out, flags, bool(flags) and set(flags) == {"1"})


def sample_shot(rho: np.ndarray, space: dynamics.ReducedSpace, rng) -> tuple[int, int]:
    """Draw (config index, winding) with probability given by the diagonal of rho."""
    i = sample_indices(rho, rng, 1)[0]
    return space.split(int(i))


def sample_indices(rho: np.ndarray, rng, shots: int) -> np.ndarray:
    p = np.clip(np.real(np.diag(rho)), 0.0, None)
    return rng.choice(len(p), size=shots, p=p / p.sum())


def theorem_bound(dims: Dims, m: int, N: int, delta: float, s_eps: float) -> float:
    return dims.h * (m - 2 * dims.h) / 2 * (1 / N - 2 * delta) * s_eps


def lemma_bound(dims: Dims, m: int, N: int, delta: float, s_eps: float) -> float:
    return dims.h * (m - 2 * dims.h) * (1 / N - 2 * delta) * s_eps


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    N: int
    W: np.ndarray
    delta: float
    delta_mixing: float | None
    s_eps: float
    theorem_bound: float
    lemma_bound: float
    front_estimate: float
    success_estimate: float
    success_sigma: float
    front_sigma: float
    success_exact: float
    front_exact: float
    accepted: int
    accepted_correct: int
    expected_output: dict
    crosscheck_deviation: float | None
    shots: dict = field(repr=False, default_factory=dict)

    def confidence_interval(self, z: float = 3.0) -> tuple[float, float]:
        lo = max(0.0, self.success_estimate - z * self.success_sigma)
        hi = min(1.0, self.success_estimate + z * self.success_sigma)
        return lo, hi

    def to_dict(self) -> dict:
        lo, hi = self.confidence_interval()
        return {
            "spec": self.spec.echo(),
            "N": self.N,
            "delta": self.delta,
            "delta_mixing": self.delta_mixing,
            "s_eps": self.s_eps,
            "theorem_bound": self.theorem_bound,
            "lemma_bound": self.lemma_bound,
            "front_estimate": self.front_estimate,
            "front_sigma": self.front_sigma,
            "front_exact": self.front_exact,
            "success_estimate": self.success_estimate,
            "success_sigma": self.success_sigma,
            "success_ci_3sigma": [lo, hi],
            "success_exact": self.success_exact,
            "accepted": self.accepted,
            "accepted_correct": self.accepted_correct,
            "expected_output": {k: v for k, v in sorted(self.expected_output.items())},
            "crosscheck_deviation": self.crosscheck_deviation,
            "W": [float(v) for v in self.W],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def shots_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["shot", "config_index", "front", "winding", "in_region", "accepted", "output", "correct"])
        cols = self.shots
        for i in range(len(cols["index"])):
            writer.writerow([
                i,
                cols["config_index"][i],
                " ".join(map(str, cols["front"][i])),
                cols["winding"][i],
                int(cols["in_region"][i]),
                int(cols["accepted"][i]),
                cols["output"][i],
                int(cols["correct"][i]),
            ])
        return buf.getvalue()


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ErgoError as exc:
        exc.stage = name
        raise


def check_involution(program: gates.Program, circuit: gates.Circuit, x: str, tol: float = 1e-10) -> tuple[float, float]:
    """(|<phi0|U|phi0>|, |U^2 phi0 - phi0|) for the wrap unitary U of ``program``."""
    phi0 = gates.basis_state(circuit.initial_bits(x))
    once = program.wrap_unitary_apply(phi0)
    twice = program.wrap_unitary_apply(once)
    overlap = abs(np.vdot(phi0, once))
    ret = float(np.linalg.norm(twice - phi0))
    if overlap > tol or ret > tol:
        raise ReadoutError(
            f"wrap unitary is not a flagged involution on the input (overlap {overlap:.2e}, return {ret:.2e})"
        )
    return overlap, ret


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    dims, m = spec.dims, spec.m
    flagged = _stage("gates", gates.attach_flags, spec.circuit)
    program = _stage("gates", gates.compile_circuit, flagged, dims, m)
    _stage("gates", check_involution, program, flagged, spec.x)

    fr = _stage("dynamics", dynamics.build_reduced_f, dims, spec.M)
    space = fr.space
    psi0, record = initial_state(spec, flagged)

    deviation = None
    if dims.h * dims.c <= dynamics.FULL_MODE_MAX_CELLS:
        cc = _stage(
            "dynamics", dynamics.crosscheck_reduced, dims, program, record.logical_bits,
            2 * space.N, spec.M, record.config,
        )
        deviation = cc.max_deviation
        if deviation > 1e-10:
            raise ReadoutError(f"reduced model disagrees with full simulation ({deviation:.2e})", "dynamics")

    sd = _stage("dynamics", dynamics.spectral, fr)
    rho = dynamics.time_average(sd, psi0, spec.T)
    origin = int(space.grades[int(np.argmax(np.abs(psi0)))])
    W = dynamics.grade_distribution(rho, space, origin)
    delta = walk.tv_distance(W, walk.uniform(space.N))
    s_eps = dynamics.spectral_mass(fr, psi0, spec.eps)
    # TV of the mixing component alone (the part of psi0 with |eigenvalue| >= eps)
    component, mass = dynamics.spectral_component(fr, psi0, spec.eps)
    delta_mixing = None
    if mass > 0:
        rho_mix = dynamics.time_average(sd, component / math.sqrt(mass), spec.T)
        W_mix = dynamics.grade_distribution(rho_mix, space, origin)
        delta_mixing = walk.tv_distance(W_mix, walk.uniform(space.N))

    expected = gates.output_distribution(flagged, spec.x, flagged.output_columns)
    lat = lattice(dims)
    p = np.clip(np.real(np.diag(rho)), 0.0, None)
    p = p / p.sum()

    # exact success: sum over in-region walls of P(wall) * P(accept and correct | wall)
    cache: dict[int, dict] = {}
    front_exact = success_exact = 0.0
    for i in np.flatnonzero(p > 0):
        ci, w = space.split(int(i))
        a = lat.configs[ci]
        if not front_in_region(a, m):
            continue
        front_exact += p[i]
        dist = readout_distribution(a, w, program, flagged, spec.x, spec.M, record.config)
        cache[int(i)] = dist
        success_exact += p[i] * sum(
            q for (out, fl), q in dist.items() if set(fl) == {"1"} and expected.get(out, 0) > 1e-12
        )

    clock_rng, data_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(2))
    idx = sample_indices(rho, clock_rng, spec.shots)
    n = spec.shots
    config_index = idx % space.n_configs
    winding = idx // space.n_configs
    in_region = np.array([front_in_region(lat.configs[ci], m) for ci in config_index])
    accepted = np.zeros(n, dtype=bool)
    correct = np.zeros(n, dtype=bool)
    output = np.full(n, "", dtype=object)
    for i in np.unique(idx[in_region]):
        dist = cache[int(i)]
        keys = sorted(dist)
        probs = np.array([dist[k] for k in keys])
        where = np.flatnonzero(idx == i)
        draws = data_rng.choice(len(keys), size=len(where), p=probs / probs.sum())
        for pos, d in zip(where, draws):
            out, fl = keys[d]
            output[pos] = out
            accepted[pos] = set(fl) == {"1"}
            correct[pos] = accepted[pos] and expected.get(out, 0.0) > 1e-12

    success = correct.mean()
    front = in_region.mean()
    report = ExperimentReport(
        spec=spec,
        N=space.N,
        W=W,
        delta=delta,
        delta_mixing=delta_mixing,
        s_eps=s_eps,
        theorem_bound=theorem_bound(dims, m, space.N, delta, s_eps),
        lemma_bound=lemma_bound(dims, m, space.N, delta, s_eps),
        front_estimate=float(front),
        success_estimate=float(success),
        success_sigma=math.sqrt(max(success * (1 - success), 1e-300) / n),
        front_sigma=math.sqrt(max(front * (1 - front), 1e-300) / n),
        success_exact=float(success_exact),
        front_exact=float(front_exact),
        accepted=int(accepted.sum()),
        accepted_correct=int((accepted & correct).sum()),
        expected_output=expected,
        crosscheck_deviation=deviation,
        shots={
            "index": idx,
            "config_index": config_index,
            "front": [lat.configs[ci].front for ci in config_index],
            "winding": winding,
            "in_region": in_region,
            "accepted": accepted,
            "output": output,
            "correct": correct,
        },
    )
    return report
