"""Standard-form conic programs: ``opt c'x  s.t.  A x = b,  x in K``.

``K`` is a product of cones laid out over consecutive slices of ``x``.
Complex PSD blocks store a Hermitian matrix in orthonormal ``hvec``
coordinates; membership is that of its real embedding, whose side is
reported as ``side``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..hermitian import hvec_dim, svec_dim

CONE_KINDS = ("NONNEG", "SOC", "ROTATED_SOC", "EXP", "PSD")
DUMP_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Cone:
    kind: str
    offset: int
    dim: int
    side: int = 0
    complex: bool = False

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "EXP" and self.dim != 3:
            raise ValueError("EXP cones have dimension 3")
        if self.kind == "SOC" and self.dim < 1:
            raise ValueError("SOC needs dim >= 1")
        if self.kind == "ROTATED_SOC" and self.dim < 2:
            raise ValueError("ROTATED_SOC needs dim >= 2")
        if self.kind == "PSD":
            expect = hvec_dim(self.side // 2) if self.complex else svec_dim(self.side)
            if self.complex and self.side % 2:
                raise ValueError("complex PSD cones have an even embedded side")
            if self.dim != expect:
                raise ValueError(f"PSD side {self.side} implies dim {expect}, got {self.dim}")

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.dim)

    @property
    def matrix_order(self) -> int:
        """Order of the stored matrix (N for a complex block of embedded side 2N)."""
        return self.side // 2 if self.complex else self.side

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "offset": self.offset, "dim": self.dim}
        if self.kind == "PSD":
            d.update(side=self.side, complex=self.complex)
        return d


@dataclass
class ConicProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: list[Cone]
    maximize: bool = False
    seed: np.ndarray | None = None
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.validate()

    @property
    def n(self) -> int:
        return self.c.size

    def validate(self):
        n = self.n
        if self.A.shape[0] != self.b.size:
            raise ValueError(f"A has {self.A.shape[0]} rows but b has {self.b.size} entries")
        for arr, name in ((self.c, "c"), (self.A, "A"), (self.b, "b")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        pos = 0
        for cone in self.cones:
            if cone.offset != pos:
                raise ValueError(f"cone at offset {cone.offset} leaves a gap or overlap at {pos}")
            pos += cone.dim
        if pos != n:
            raise ValueError(f"cone dims sum to {pos}, variable dimension is {n}")
        if self.seed is not None:
            self.seed = np.asarray(self.seed, dtype=float)
            if self.seed.shape != (n,):
                raise ValueError("seed has the wrong shape")

    def cone_counts(self) -> dict:
        counts = {k: 0 for k in CONE_KINDS}
        for cone in self.cones:
            counts[cone.kind] += 1
        counts["NONNEG_SCALARS"] = sum(c.dim for c in self.cones if c.kind == "NONNEG")
        counts["PSD_SIDES"] = [c.side for c in self.cones if c.kind == "PSD"]
        return counts

    def to_dict(self) -> dict:
        return {
            "schema_version": DUMP_SCHEMA_VERSION,
            "sense": "maximize" if self.maximize else "minimize",
            "n": self.n,
            "c": self.c.tolist(),
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "cones": [c.to_dict() for c in self.cones],
            "names": {k: [v.start, v.stop] if isinstance(v, slice) else v for k, v in self.names.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, doc: dict) -> "ConicProblem":
        if doc.get("schema_version") != DUMP_SCHEMA_VERSION:
            raise ValueError(f"unsupported dump schema_version {doc.get('schema_version')!r}")
        n = int(doc["n"])
        cones = [Cone(d["kind"], d["offset"], d["dim"], d.get("side", 0), d.get("complex", False))
                 for d in doc["cones"]]
        names = {k: slice(*v) if isinstance(v, list) else v for k, v in doc.get("names", {}).items()}
        a = np.asarray(doc["A"], dtype=float).reshape(-1, n)
        return cls(np.asarray(doc["c"]), a, np.asarray(doc["b"]), cones,
                   maximize=doc["sense"] == "maximize", names=names)

    @classmethod
    def load(cls, path) -> "ConicProblem":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class ConicBuilder:
    """Incremental assembly of a :class:`ConicProblem`.

    Variables are allocated in cone blocks. ``add_le``/``add_ge`` rows get a
    nonnegative slack; all slacks share one NONNEG block appended last.
    """

    def __init__(self):
        self._cones: list[tuple[str, int, int, bool]] = []
        self._n = 0
        self._rows: list[tuple[list, float, int | None]] = []
        self._nslack = 0
        self.names: dict[str, slice] = {}

    def add_block(self, kind: str, dim: int = 0, side: int = 0, complex: bool = False, name=None) -> slice:
        if kind == "PSD":
            dim = hvec_dim(side // 2) if complex else svec_dim(side)
        sl = slice(self._n, self._n + dim)
        self._cones.append((kind, dim, side, complex))
        self._n += dim
        if name:
            self.names[name] = sl
        return sl

    def add_hermitian_psd(self, order: int, name=None) -> slice:
        return self.add_block("PSD", side=2 * order, complex=True, name=name)

    def add_eq(self, terms: Iterable, rhs: float):
        self._rows.append((list(terms), float(rhs), None))

    def add_le(self, terms: Iterable, rhs: float, name=None) -> int:
        idx = self._nslack
        self._rows.append((list(terms), float(rhs), idx))
        self._nslack += 1
        if name:
            self.names[name] = idx
        return idx

    def add_ge(self, terms: Iterable, rhs: float, name=None) -> int:
        return self.add_le([(sl, -np.asarray(co, dtype=float)) for sl, co in terms], -rhs, name=name)

    def build(self, objective: Iterable, maximize: bool = False) -> ConicProblem:
        n = self._n + self._nslack
        cones = []
        off = 0
        for kind, dim, side, cplx in self._cones:
            cones.append(Cone(kind, off, dim, side, cplx))
            off += dim
        if self._nslack:
            cones.append(Cone("NONNEG", off, self._nslack))
            self.names["slacks"] = slice(off, off + self._nslack)
        c = np.zeros(n)
        for sl, co in objective:
            c[sl] += co
        a = np.zeros((len(self._rows), n))
        b = np.zeros(len(self._rows))
        for i, (terms, rhs, slack) in enumerate(self._rows):
            for sl, co in terms:
                a[i, sl] += co
            if slack is not None:
                a[i, self._n + slack] = 1.0
            b[i] = rhs
        names = dict(self.names)
        for key, val in list(names.items()):
            if isinstance(val, int):
                names[key] = self._n + val
        return ConicProblem(c, a, b, cones, maximize=maximize, names=names)
