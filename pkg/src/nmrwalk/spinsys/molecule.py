"""Molecule description: spins, rotating-frame offsets and J couplings."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..qops import MAX_SPINS

COUPLING_MODELS = ("ising", "strong")
DEFAULT_SOFT_PULSE = 704e-6


class MoleculeError(ValueError):
    """Invalid molecule description; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class Spin:
    name: str
    offset_hz: float
    species: str = "C"
    soft_pulse: float = DEFAULT_SOFT_PULSE


@dataclass(frozen=True)
class Coupling:
    i: int
    j: int
    j_hz: float
    model: str = "ising"


@dataclass(frozen=True)
class Molecule:
    name: str
    spins: tuple[Spin, ...]
    couplings: tuple[Coupling, ...] = ()
    representative: bool = False
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        n = len(self.spins)
        if not 1 <= n <= MAX_SPINS:
            raise MoleculeError(f"need 1..{MAX_SPINS} spins, got {n}", "spins")
        names = [s.name for s in self.spins]
        if len(set(names)) != n:
            raise MoleculeError("spin names must be unique", "spins")
        for k, s in enumerate(self.spins):
            if not _finite(s.offset_hz):
                raise MoleculeError("offset must be finite", f"spins[{k}].offset_hz")
            if not s.soft_pulse > 0:
                raise MoleculeError("soft pulse length must be positive", f"spins[{k}].soft_pulse")
        seen = set()
        canon = []
        for k, c in enumerate(self.couplings):
            i, j = sorted((c.i, c.j))
            where = f"couplings[{k}]"
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise MoleculeError(f"bad spin pair ({c.i}, {c.j})", where)
            if (i, j) in seen:
                raise MoleculeError(f"duplicate pair ({i}, {j})", where)
            if c.model not in COUPLING_MODELS:
                raise MoleculeError(f"model must be one of {COUPLING_MODELS}", where + ".model")
            if not _finite(c.j_hz):
                raise MoleculeError("coupling must be finite", where + ".j_hz")
            seen.add((i, j))
            canon.append(Coupling(i, j, float(c.j_hz), c.model))
        object.__setattr__(self, "couplings", tuple(sorted(canon, key=lambda c: (c.i, c.j))))

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def offsets(self) -> list[float]:
        return [s.offset_hz for s in self.spins]

    def index(self, name: str | int) -> int:
        if isinstance(name, int):
            return name
        for k, s in enumerate(self.spins):
            if s.name == name:
                return k
        raise MoleculeError(f"no spin named {name!r}")

    def j(self, i: int, k: int) -> float:
        a, b = sorted((i, k))
        for c in self.couplings:
            if (c.i, c.j) == (a, b):
                return c.j_hz
        return 0.0

    def pairs(self) -> list[tuple[int, int]]:
        """Every unordered spin pair with a nonzero coupling."""
        return [(c.i, c.j) for c in self.couplings if c.j_hz != 0]

    def same_species(self, k: int) -> list[int]:
        sp = self.spins[k].species
        return [m for m, s in enumerate(self.spins) if s.species == sp]

    def with_model(self, model: str, pairs=None) -> "Molecule":
        """Copy with the coupling model switched (all pairs, or just ``pairs``)."""
        pairs = None if pairs is None else {tuple(sorted(p)) for p in pairs}
        cs = tuple(
            replace(c, model=model) if pairs is None or (c.i, c.j) in pairs else c for c in self.couplings
        )
        return replace(self, couplings=cs)

    def with_couplings_scaled(self, factor: float) -> "Molecule":
        return replace(self, couplings=tuple(replace(c, j_hz=c.j_hz * factor) for c in self.couplings))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "representative": self.representative,
            "notes": self.notes,
            "spins": [
                {"name": s.name, "offset_hz": s.offset_hz, "species": s.species, "soft_pulse": s.soft_pulse}
                for s in self.spins
            ],
            "couplings": [
                {"i": self.spins[c.i].name, "j": self.spins[c.j].name, "j_hz": c.j_hz, "model": c.model}
                for c in self.couplings
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Molecule":
        if not isinstance(data, Mapping):
            raise MoleculeError("molecule config must be a mapping")
        for key in ("name", "spins"):
            if key not in data:
                raise MoleculeError("missing required field", key)
        spins = []
        for k, s in enumerate(data["spins"]):
            try:
                spins.append(
                    Spin(
                        name=str(s["name"]),
                        offset_hz=float(s["offset_hz"]),
                        species=str(s.get("species", "C")),
                        soft_pulse=float(s.get("soft_pulse", DEFAULT_SOFT_PULSE)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MoleculeError(f"malformed spin entry ({exc})", f"spins[{k}]") from None
        names = [s.name for s in spins]
        couplings = []
        for k, c in enumerate(data.get("couplings", []) or []):
            try:
                i = names.index(c["i"]) if isinstance(c["i"], str) else int(c["i"])
                j = names.index(c["j"]) if isinstance(c["j"], str) else int(c["j"])
                couplings.append(Coupling(i, j, float(c["j_hz"]), str(c.get("model", "ising"))))
            except (KeyError, TypeError, ValueError) as exc:
                raise MoleculeError(f"malformed coupling entry ({exc})", f"couplings[{k}]") from None
        return cls(
            name=str(data["name"]),
            spins=tuple(spins),
            couplings=tuple(couplings),
            representative=bool(data.get("representative", False)),
            notes=str(data.get("notes", "")),
        )


def _finite(x) -> bool:
    try:
        return abs(float(x)) < float("inf")
    except (TypeError, ValueError):
        return False


def load_molecule(path: str | Path) -> Molecule:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise MoleculeError(f"unparseable molecule file: {exc}") from None
    return Molecule.from_dict(data)


def save_molecule(m: Molecule, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(m.to_dict(), fh, sort_keys=False)


def builtin_molecule(name: str) -> Molecule:
    """``crotonic_like`` or ``tce`` from the bundled configs."""
    ref = resources.files("nmrwalk.data").joinpath(f"{name}.yaml")
    if not ref.is_file():
        raise MoleculeError(f"no built-in molecule {name!r}")
    return Molecule.from_dict(yaml.safe_load(ref.read_text()))


def crotonic_like() -> Molecule:
    return builtin_molecule("crotonic_like")


def tce(j_cc: float = 100.0, ratio: float = -10.5, model: str = "strong") -> Molecule:
    """Three-spin TCE model in the C1 rotating frame.

    Only the carbon shift difference ``ratio * J_CC`` is pinned; the C-H
    couplings are representative. Spin order is C1, C2, H.
    """
    base = builtin_molecule("tce")
    spins = list(base.spins)
    spins[1] = replace(spins[1], offset_hz=ratio * j_cc)
    cs = []
    for c in base.couplings:
        if (c.i, c.j) == (0, 1):
            c = replace(c, j_hz=j_cc, model=model)
        cs.append(c)
    return replace(base, spins=tuple(spins), couplings=tuple(cs))
