"""Synthetic malware-like corpora built from tiled byte motifs.

A family is a motif tiled to a random length with per-byte noise.  A twin
family keeps the leading ``shared`` fraction of another family's motif and
only its tail is its own.  The first rows of every resized image then come
from the common prefix, so twins look alike and get confused with each
other, much like visually similar real families.

Spec files are a small INI-like format::

    [family]
    name = Alpha
    motif = random 256         # or: hex 4d5a9000...
    samples = 200
    mutation = 0.05
    length = 4000..9000

    [twin]
    a = Gamma
    b = Delta
    shared = 0.9
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidArgument, ParseError
from .rng import Rng

_SAFE_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._!+ -]*$")


@dataclass(frozen=True)
class FamilySpec:
    name: str
    samples: int
    mutation: float
    length_range: tuple
    motif: Optional[bytes] = None
    motif_length: Optional[int] = None  # used when motif is None ("random N")

    def __post_init__(self):
        if not _SAFE_NAME.match(self.name):
            raise InvalidArgument(f"family name {self.name!r} is not filename-safe")
        if self.samples < 2:
            raise InvalidArgument(f"family {self.name}: samples must be >= 2")
        if not 0.0 <= self.mutation <= 1.0:
            raise InvalidArgument(f"family {self.name}: mutation must lie in [0, 1]")
        lo, hi = self.length_range
        if not 1 <= lo <= hi:
            raise InvalidArgument(f"family {self.name}: bad length range {lo}..{hi}")
        if self.motif is not None and len(self.motif) == 0:
            raise InvalidArgument(f"family {self.name}: motif is empty")
        if self.motif is None and (self.motif_length or 0) < 1:
            raise InvalidArgument(f"family {self.name}: random motif needs a length >= 1")


@dataclass(frozen=True)
class TwinSpec:
    a: int
    b: int
    shared: float

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidArgument("a family cannot be its own twin")
        if not 0.0 <= self.shared <= 1.0:
            raise InvalidArgument("shared fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SynthSpec:
    families: tuple
    twins: tuple = field(default=())

    def __post_init__(self):
        names = [f.name for f in self.families]
        if not names:
            raise InvalidArgument("spec declares no families")
        if len(set(names)) != len(names):
            raise InvalidArgument("family names must be unique")
        seen_b = set()
        for t in self.twins:
            if not (0 <= t.a < len(names) and 0 <= t.b < len(names)):
                raise InvalidArgument("twin refers to an unknown family")
            if t.b in seen_b:
                raise InvalidArgument(f"family {names[t.b]} is the copy side of two twins")
            seen_b.add(t.b)

    @property
    def total_samples(self) -> int:
        return sum(f.samples for f in self.families)


def _parse_length(value: str, lineno: int) -> tuple:
    m = re.fullmatch(r"(\d+)\s*(?:\.\.|-)\s*(\d+)|(\d+)", value)
    if not m:
        raise ParseError(f"length must be 'lo..hi' or a single integer, got {value!r}", lineno)
    if m.group(3):
        n = int(m.group(3))
        return (n, n)
    return (int(m.group(1)), int(m.group(2)))


def _parse_motif(value: str, lineno: int) -> tuple:
    kind, _, arg = value.partition(" ")
    arg = arg.strip()
    if kind == "random":
        try:
            return None, int(arg)
        except ValueError:
            raise ParseError(f"bad random motif length {arg!r}", lineno) from None
    if kind == "hex":
        try:
            return bytes.fromhex(arg), None
        except ValueError:
            raise ParseError("bad hex motif", lineno) from None
    raise ParseError("motif must be 'random <len>' or 'hex <digits>'", lineno)


def parse_spec(text: str) -> SynthSpec:
    """Parse a synth spec; every error reports the offending line."""
    sections = []  # (kind, header line, {key: (value, line)})
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            kind = m.group(1).lower()
            if kind not in ("family", "twin"):
                raise ParseError(f"unknown section [{kind}]", lineno)
            sections.append((kind, lineno, {}))
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        if not sections:
            raise ParseError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        keys = sections[-1][2]
        if key in keys:
            raise ParseError(f"duplicate key {key!r}", lineno)
        keys[key] = (value, lineno)

    allowed = {"family": {"name", "motif", "samples", "mutation", "length"},
               "twin": {"a", "b", "shared"}}
    families, twin_sections = [], []
    for kind, header_line, keys in sections:
        for key, (_, lineno) in keys.items():
            if key not in allowed[kind]:
                raise ParseError(f"unknown key {key!r} in [{kind}]", lineno)
        missing = allowed[kind] - set(keys)
        if missing:
            raise ParseError(f"[{kind}] missing {', '.join(sorted(missing))}", header_line)
        if kind == "twin":
            twin_sections.append((header_line, keys))
            continue
        motif, motif_len = _parse_motif(*keys["motif"])
        try:
            samples = int(keys["samples"][0])
        except ValueError:
            raise ParseError("samples must be an integer", keys["samples"][1]) from None
        try:
            mutation = float(keys["mutation"][0])
        except ValueError:
            raise ParseError("mutation must be a number", keys["mutation"][1]) from None
        try:
            families.append(FamilySpec(keys["name"][0], samples, mutation,
                                       _parse_length(*keys["length"]), motif, motif_len))
        except InvalidArgument as exc:
            raise ParseError(str(exc), header_line) from None

    index = {f.name: i for i, f in enumerate(families)}
    twins = []
    for header_line, keys in twin_sections:
        for side in ("a", "b"):
            if keys[side][0] not in index:
                raise ParseError(f"unknown family {keys[side][0]!r}", keys[side][1])
        try:
            twins.append(TwinSpec(index[keys["a"][0]], index[keys["b"][0]],
                                  float(keys["shared"][0])))
        except (ValueError, InvalidArgument) as exc:
            raise ParseError(str(exc), header_line) from None
    try:
        return SynthSpec(tuple(families), tuple(twins))
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from None


def family_motifs(spec: SynthSpec, seed: int) -> list[bytes]:
    """Resolve every family's effective motif, twins included."""
    motifs = []
    for i, fam in enumerate(spec.families):
        if fam.motif is not None:
            motifs.append(fam.motif)
        else:
            rng = Rng.stream(seed, 2, i)
            motifs.append(rng.randbelow_array(256, fam.motif_length).astype(np.uint8).tobytes())
    for twin in spec.twins:
        base = np.frombuffer(motifs[twin.a], dtype=np.uint8).copy()
        own = np.frombuffer(motifs[twin.b], dtype=np.uint8)
        own = np.resize(own, base.size)
        n_shared = base.size - math.floor((1.0 - twin.shared) * base.size + 0.5)
        base[n_shared:] = own[n_shared:]
        motifs[twin.b] = base.tobytes()
    return motifs


def _make_sample(motif: bytes, fam: FamilySpec, rng: Rng) -> bytes:
    lo, hi = fam.length_range
    length = lo + rng.randbelow(hi - lo + 1)
    data = np.resize(np.frombuffer(motif, dtype=np.uint8), length)
    if fam.mutation > 0:
        hit = rng.random_array(length) < fam.mutation
        noise = rng.randbelow_array(256, length).astype(np.uint8)
        data = np.where(hit, noise, data)
    return data.astype(np.uint8).tobytes()


def synth_families(spec: SynthSpec, seed: int = 0) -> list[tuple[str, str, bytes]]:
    """Generate the corpus as ``(relative_path, family, data)`` tuples.

    Each sample draws from its own stream ``(seed, 4, family, sample)``, so
    generation order never affects the bytes.
    """
    motifs = family_motifs(spec, seed)
    corpus = []
    for i, fam in enumerate(spec.families):
        for j in range(fam.samples):
            data = _make_sample(motifs[i], fam, Rng.stream(seed, 4, i, j))
            corpus.append((f"{fam.name}/{fam.name}_{j:04d}.bin", fam.name, data))
    return corpus


def write_corpus(corpus, out_dir) -> Path:
    """Write binaries plus ``manifest.tsv`` (``path<TAB>family`` lines)."""
    out = Path(out_dir)
    lines = []
    for rel, family, data in corpus:
        target = out / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        lines.append(f"{rel}\t{family}\n")
    manifest = out / "manifest.tsv"
    manifest.write_text("".join(lines), encoding="utf-8")
    return manifest


def read_manifest(text: str) -> dict[str, str]:
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParseError("expected 'filename<TAB>family'", lineno)
        mapping[parts[0]] = parts[1]
    return mapping


def bundled_spec_text() -> str:
    return (Path(__file__).parent / "data" / "twins.spec").read_text(encoding="utf-8")
