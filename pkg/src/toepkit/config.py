"""Run configuration shared by the CLI, benchmarks and estimators."""

from __future__ import annotations

from dataclasses import dataclass, replace

__all__ = ["TnoConfig", "MODES", "parse_kv_text", "read_kv_config"]

MODES = ("baseline", "ski", "ski-dense", "fd-causal", "fd-bidir", "causal-scan")


@dataclass
class TnoConfig:
    """Hyperparameters: sequence length, channels, rank, filter width,
    decay, interpolation degree and operating mode."""

    n: int = 512
    d: int = 8
    r: int = 64
    m: int = 32
    lam: float = 0.99
    degree: int = 1
    mode: str = "ski"

    def __post_init__(self):
        self.n = int(self.n)
        self.d = int(self.d)
        self.r = int(self.r)
        self.m = int(self.m)
        self.lam = float(self.lam)
        self.degree = int(self.degree)
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.d < 1:
            raise ValueError("d must be positive")
        if not 2 <= self.r <= self.n:
            raise ValueError(f"need 2 <= r <= n, got r={self.r}, n={self.n}")
        if not 1 <= self.m <= 128:
            raise ValueError(f"filter width m must lie in [1, 128], got {self.m}")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.degree not in (1, 3):
            raise ValueError(f"degree must be 1 or 3, got {self.degree}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, items):
        known = {"n", "d", "r", "m", "lambda", "lam", "degree", "mode"}
        unknown = set(items) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(items)
        if "lambda" in kw:
            kw["lam"] = kw.pop("lambda")
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(read_kv_config(path))


def parse_kv_text(text):
    """Parse flat ``key=value`` lines; '#' starts a comment."""
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        items[key] = value
    return items


def read_kv_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())
