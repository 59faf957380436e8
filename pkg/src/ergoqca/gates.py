"""Gate set, layered circuits, flag gadgets and compilation onto the cylinder.

Qubit ordering is big-endian throughout: in a two-qubit gate on the pair
``(k, k+1)`` qubit ``k`` is the first tensor factor, and in an ``h``-qubit
register qubit 0 is the most significant bit of the basis index.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import CircuitError, CompileError
from .lattice import Dims

SQRT2 = np.sqrt(2.0)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2
IDENTITY2 = np.eye(2, dtype=complex)


class GateCode(IntEnum):
    """Two-bit program word ``lm`` selecting one of the four pair gates."""

    I = 0b00
    IH = 0b01
    HI = 0b10
    CS = 0b11

    @classmethod
    def parse(cls, text) -> "GateCode":
        if isinstance(text, GateCode):
            return text
        text = str(text).strip()
        if not re.fullmatch(r"[01]{2}", text):
            raise CircuitError(f"gate code must be two bits, got {text!r}")
        return cls(int(text, 2))

    @property
    def bits(self) -> str:
        return format(int(self), "02b")


def gate_matrix(code, literal: bool = False) -> np.ndarray:
    """4x4 unitary of the pair gate selected by ``code``.

    ``11`` is the controlled square root of Z, diag(1, 1, 1, i).  With
    ``literal=True`` the controlled block carries an extra 1/sqrt(2), which
    is not unitary; it exists only so the discrepancy can be tested.
    """
    code = GateCode.parse(code)
    if literal and code is GateCode.CS:
        return np.diag([1, 1, 1 / SQRT2, 1j / SQRT2]).astype(complex)
    if code is GateCode.I:
        return np.eye(4, dtype=complex)
    if code is GateCode.IH:
        return np.kron(IDENTITY2, HADAMARD)
    if code is GateCode.HI:
        return np.kron(HADAMARD, IDENTITY2)
    return np.diag([1, 1, 1, 1j]).astype(complex)


# basis |a b c d> with a=(j,k), b=(j,k+1), c=(j+1,k), d=(j+1,k+1), a most significant
_ROW_SWAP = np.zeros((16, 16), dtype=complex)
for _i in range(16):
    _ROW_SWAP[((_i & 0b11) << 2) | (_i >> 2), _i] = 1.0


def vertex_gate(code) -> np.ndarray:
    """16x16 data operator of one brick: the pair gate on row j, then the row swap."""
    return _ROW_SWAP @ np.kron(gate_matrix(code), np.eye(4))


def row_swap() -> np.ndarray:
    return _ROW_SWAP.copy()


@dataclass(frozen=True)
class Circuit:
    """Layered two-qubit circuit on ``h`` adjacent-pair qubits.

    ``layers[t]`` maps the left index ``k`` of a pair to its gate; only
    non-identity gates are stored.  Columns ``[0, n_in)`` hold the input,
    the next ``n_out`` the output register, the rest are ancillas.
    ``flags`` and ``control`` are filled in by :func:`attach_flags`.
    """

    h: int
    n_in: int = 0
    n_out: int = 0
    layers: tuple = ()
    flags: tuple[int, ...] = ()
    control: int | None = None
    ones: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.h < 2:
            raise CircuitError(f"need at least two qubits, got h={self.h}")
        if self.n_in < 0 or self.n_out < 0 or self.n_in + self.n_out > self.h:
            raise CircuitError(f"registers in={self.n_in} out={self.n_out} exceed h={self.h}")
        clean = []
        for t, layer in enumerate(self.layers):
            gates = {}
            used = set()
            for k, code in dict(layer).items():
                k = int(k)
                code = GateCode.parse(code)
                if not 0 <= k <= self.h - 2:
                    raise CircuitError(f"layer {t}: pair ({k},{k + 1}) outside h={self.h}")
                if k % 2 != t % 2:
                    raise CircuitError(f"layer {t}: pair start {k} has the wrong parity")
                if {k, k + 1} & used:
                    raise CircuitError(f"layer {t}: overlapping pairs at {k}")
                used |= {k, k + 1}
                if code is not GateCode.I:
                    gates[k] = code
            clean.append(gates)
        object.__setattr__(self, "layers", tuple(clean))

    @property
    def depth(self) -> int:
        return len(self.layers)

    def touched(self) -> set[int]:
        cols = set()
        for layer in self.layers:
            for k in layer:
                cols |= {k, k + 1}
        return cols

    @property
    def output_columns(self) -> tuple[int, ...]:
        return tuple(range(self.n_in, self.n_in + self.n_out))

    def initial_bits(self, x: str) -> tuple[int, ...]:
        """Register contents |x>|0..0>|0..0> with control columns set to 1."""
        if len(x) != self.n_in or set(x) - {"0", "1"}:
            raise CircuitError(f"input {x!r} does not match n_in={self.n_in}")
        bits = [0] * self.h
        for k, b in enumerate(x):
            bits[k] = int(b)
        for k in self.ones:
            bits[k] = 1
        return tuple(bits)


def basis_state(bits) -> np.ndarray:
    h = len(bits)
    psi = np.zeros(2**h, dtype=complex)
    psi[int("".join(map(str, bits)), 2) if h else 0] = 1.0
    return psi


def apply_pair(psi: np.ndarray, gate: np.ndarray, k: int, h: int) -> np.ndarray:
    view = psi.reshape(2**k, 4, 2 ** (h - k - 2))
    return np.einsum("ab,ibj->iaj", gate, view).reshape(-1)


def apply_layer(psi: np.ndarray, layer: dict, h: int) -> np.ndarray:
    for k, code in layer.items():
        psi = apply_pair(psi, gate_matrix(code), k, h)
    return psi


def apply_circuit(circ: Circuit, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**circ.h,):
        raise CircuitError(f"state of shape {state.shape} does not fit h={circ.h}")
    for layer in circ.layers:
        state = apply_layer(state, layer, circ.h)
    return state


def circuit_unitary(circ: Circuit) -> np.ndarray:
    dim = 2**circ.h
    return np.column_stack([apply_circuit(circ, np.eye(dim, dtype=complex)[:, i]) for i in range(dim)])


def output_distribution(circ: Circuit, x: str, columns=None) -> dict[str, float]:
    """Distribution of the measured ``columns`` after running ``circ`` on ``x``."""
    columns = circ.output_columns if columns is None else tuple(columns)
    psi = apply_circuit(circ, basis_state(circ.initial_bits(x)))
    return measure_distribution(psi, circ.h, columns)


def measure_distribution(psi: np.ndarray, h: int, columns) -> dict[str, float]:
    probs = np.abs(psi) ** 2
    out: dict[str, float] = {}
    for idx in np.flatnonzero(probs > 1e-15):
        bits = format(idx, f"0{h}b")
        key = "".join(bits[k] for k in columns)
        out[key] = out.get(key, 0.0) + float(probs[idx])
    return out


# H on the flag, controlled-S twice (a Z on the flag when the control is 1), H again:
# a CNOT from the always-1 control column onto the flag.
def _gadget(flag: int, control: int) -> list[tuple[int, GateCode]]:
    k = min(flag, control)
    hadamard = GateCode.IH if flag == k + 1 else GateCode.HI
    return [(k, hadamard), (k, GateCode.CS), (k, GateCode.CS), (k, hadamard)]


GADGET_SPAN = 7


def _place_gadget(layers: list[dict], start: int, steps) -> None:
    for i, (k, code) in enumerate(steps):
        t = start + 2 * i
        while len(layers) <= t:
            layers.append({})
        if any(q in (k, k + 1) for p in layers[t] for q in (p, p + 1)):
            raise CircuitError(f"flag gadget collides with a gate in layer {t}")
        layers[t][k] = code


def attach_flags(circ: Circuit, n_flags: int | None = None) -> Circuit:
    """Add bit-flip gadgets on spare ancilla columns at the top of the register.

    One column becomes an always-1 control; one flag is flipped by a gadget in
    the first layers and, when a third spare column exists, a second flag is
    flipped by a gadget in the last layers.
    """
    if circ.flags:
        raise CircuitError("circuit already carries flags")
    busy = circ.touched() | set(range(circ.n_in + circ.n_out)) | set(circ.ones)
    spare = 0
    for k in range(circ.h - 1, -1, -1):
        if k in busy:
            break
        spare += 1
    if n_flags is None:
        n_flags = 2 if spare >= 3 else 1
    if n_flags not in (1, 2) or spare < n_flags + 1:
        raise CircuitError(f"need {n_flags + 1} spare top columns for flags, found {spare}")

    h = circ.h
    layers = [dict(layer) for layer in circ.layers]
    if n_flags == 1:
        control, flags = h - 2, (h - 1,)
        pair = control
        _place_gadget(layers, pair % 2, _gadget(h - 1, control))
    else:
        control, flags = h - 2, (h - 3, h - 1)
        first = (h - 3) % 2
        _place_gadget(layers, first, _gadget(h - 3, control))
        last_start = max(first + GADGET_SPAN, circ.depth - GADGET_SPAN)
        if last_start % 2 != (h - 2) % 2:
            last_start += 1
        _place_gadget(layers, last_start, _gadget(h - 1, control))
    return Circuit(
        h=h,
        n_in=circ.n_in,
        n_out=circ.n_out,
        layers=tuple(layers),
        flags=flags,
        control=control,
        ones=tuple(sorted(set(circ.ones) | {control})),
    )


def gadget_circuit(h: int = 2) -> Circuit:
    """The bare flag gadget on ``h`` otherwise idle qubits."""
    return attach_flags(Circuit(h=h), n_flags=1)


# ---------------------------------------------------------------- programs


def vertices(dims: Dims) -> list[tuple[int, int]]:
    """Brick positions carrying program qubits: full-brick (j, k) with j = k mod 2."""
    return [(j, k) for j in range(dims.c) for k in range(j % 2, dims.h - 1, 2)]


@dataclass(frozen=True)
class Program:
    """Gate codes on every vertex of the cylinder (absent vertices mean ``00``)."""

    dims: Dims
    codes: dict = field(default_factory=dict)
    band: tuple[int, int] | None = None

    def __post_init__(self):
        valid = set(vertices(self.dims))
        for (j, k), code in self.codes.items():
            if (j, k) not in valid:
                raise CompileError(f"({j},{k}) is not a program vertex on {self.dims}")
            GateCode.parse(code)

    def code(self, j: int, k: int) -> GateCode:
        return GateCode.parse(self.codes.get((j % self.dims.c, k), GateCode.I))

    def vertex_codes(self) -> dict[tuple[int, int], GateCode]:
        return {v: self.code(*v) for v in vertices(self.dims)}

    def row(self, j: int) -> dict[int, GateCode]:
        j %= self.dims.c
        return {k: self.code(j, k) for k in range(j % 2, self.dims.h - 1, 2) if self.code(j, k) is not GateCode.I}

    def export_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "k", "code"])
        for (j, k), code in self.vertex_codes().items():
            writer.writerow([j, k, code.bits])
        return buf.getvalue()

    def wrap_unitary_apply(self, psi: np.ndarray) -> np.ndarray:
        """Apply one full wrap of bricks, row by row, to a logical register."""
        for j in range(self.dims.c):
            psi = apply_layer(psi, self.row(j), self.dims.h)
        return psi


def place(circ: Circuit, dims: Dims, start: int) -> Program:
    """Write ``circ`` onto rows ``start .. start + depth - 1`` (``start`` even)."""
    if circ.h != dims.h:
        raise CompileError(f"circuit width {circ.h} differs from h={dims.h}")
    if start % 2:
        raise CompileError(f"parity misalignment: band must start on an even row, got {start}")
    if start < 0 or start + circ.depth > dims.c:
        raise CompileError(
            f"depth overflow: {circ.depth} layers from row {start} do not fit c={dims.c}"
        )
    codes = {}
    for t, layer in enumerate(circ.layers):
        for k, code in layer.items():
            codes[(start + t, k)] = code
    return Program(dims, codes, band=(start, start + circ.depth))


def band_start(m: int) -> int:
    return m + 1 if (m + 1) % 2 == 0 else m + 2


def compile_circuit(circ: Circuit, dims: Dims, m: int) -> Program:
    """Compile with rows 0..m left as identity (output region), circuit above."""
    if m <= 2 * dims.h:
        raise CompileError(f"output region m={m} must exceed 2h={2 * dims.h}")
    return place(circ, dims, band_start(m))


def decompile(program: Program, h: int | None = None, n_in: int = 0, n_out: int = 0) -> Circuit:
    if program.band is None:
        raise CompileError("program has no recorded circuit band")
    start, stop = program.band
    layers = tuple(program.row(j) for j in range(start, stop))
    return Circuit(h=program.dims.h if h is None else h, n_in=n_in, n_out=n_out, layers=layers)


# ------------------------------------------------------------ text format

_HEADER = re.compile(r"qubits\s+(\d+)\s+in\s+(\d+)\s+out\s+(\d+)")
_GATE = re.compile(r"layer\s+(\d+)\s+pair\s+(\d+)\s+code\s+([01]{2})")


def parse_circuit(text: str) -> Circuit:
    """Parse the line format ``qubits <h> in <n> out <n>`` / ``layer <t> pair <k> code <lm>``."""
    header = None
    gates: dict[int, dict[int, str]] = {}
    depth = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            mh = _HEADER.fullmatch(line)
            if not mh:
                raise CircuitError(f"line {lineno}: expected header 'qubits <h> in <n> out <n>'")
            header = tuple(int(v) for v in mh.groups())
            continue
        mg = _GATE.fullmatch(line)
        if not mg:
            raise CircuitError(f"line {lineno}: cannot parse {raw!r}")
        t, k, code = int(mg[1]), int(mg[2]), mg[3]
        if k in gates.setdefault(t, {}):
            raise CircuitError(f"line {lineno}: pair {k} assigned twice in layer {t}")
        gates[t][k] = code
        depth = max(depth, t + 1)
    if header is None:
        raise CircuitError("empty circuit file")
    h, n_in, n_out = header
    return Circuit(h=h, n_in=n_in, n_out=n_out, layers=tuple(gates.get(t, {}) for t in range(depth)))


def format_circuit(circ: Circuit) -> str:
    lines = [f"qubits {circ.h} in {circ.n_in} out {circ.n_out}"]
    for t, layer in enumerate(circ.layers):
        for k in sorted(layer):
            lines.append(f"layer {t} pair {k} code {layer[k].bits}")
        if not layer and t % 2 <= circ.h - 2:
            lines.append(f"layer {t} pair {t % 2} code 00")  # keeps idle layers in the depth
    return "\n".join(lines) + "\n"
